"""Prediction records and the global argmax tie rule.

Every ranker in the toolkit resolves score ties the same way: the lowest
candidate index wins. Keeping the rule here keeps rankers, the external
scorer client, and the evaluator consistent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


def argmax_lowest_index(scores: Sequence[float]) -> int:
    """Index of the maximum score; ties broken by the lowest index."""
    if not scores:
        raise ValueError("cannot take argmax of an empty score list")
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


@dataclass(frozen=True)
class Prediction:
    example_id: str
    chosen_index: int
    scores: tuple[float, ...]


def prediction_from_scores(example_id: str, scores: Sequence[float]) -> Prediction:
    """Build a Prediction whose chosen index obeys the global tie rule."""
    for i, s in enumerate(scores):
        if not math.isfinite(s):
            raise ValueError(f"non-finite score at candidate {i} for example {example_id}")
    return Prediction(
        example_id=example_id,
        chosen_index=argmax_lowest_index(scores),
        scores=tuple(float(s) for s in scores),
    )


def write_predictions(path: str | Path, predictions: Iterable[Prediction], urls: dict[str, str | None] | None = None) -> None:
    """Write predictions as JSON Lines; ``urls`` adds a "url" field by id."""
    with open(path, "w", encoding="utf-8") as fh:
        for pred in predictions:
            row: dict = {
                "example_id": pred.example_id,
                "chosen_index": pred.chosen_index,
                "scores": list(pred.scores),
            }
            if urls is not None:
                row["url"] = urls.get(pred.example_id)
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def read_predictions(path: str | Path) -> list[Prediction]:
    """Read a predictions file; duplicate example ids are an error."""
    predictions: list[Prediction] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            example_id = row["example_id"]
            if example_id in seen:
                raise ValueError(f"{path}: line {lineno}: duplicate prediction for {example_id}")
            seen.add(example_id)
            predictions.append(
                Prediction(
                    example_id=example_id,
                    chosen_index=int(row["chosen_index"]),
                    scores=tuple(float(s) for s in row["scores"]),
                )
            )
    return predictions
