"""Likert item responses to averaged factor scores."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .domain import FACTORS, ID_COLUMN, Dataset, DataError, SchemaError


class SurveyError(ValueError):
    pass


@dataclass(frozen=True)
class SurveyItem:
    item_id: str
    factor: str
    reverse_scored: bool = False


@dataclass(frozen=True)
class SurveyMapping:
    items: tuple[SurveyItem, ...]
    factors: tuple[str, ...] = FACTORS

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def item_ids(self) -> tuple[str, ...]:
        return tuple(it.item_id for it in self.items)

    @classmethod
    def from_json(cls, path: str | Path, factors=FACTORS) -> SurveyMapping:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        try:
            items = tuple(
                SurveyItem(str(r["item_id"]), str(r["factor"]), bool(r.get("reverse_scored", False)))
                for r in raw
            )
        except (KeyError, TypeError) as exc:
            raise SurveyError(f"malformed mapping file {path}: {exc}") from None
        return cls(items, factors)

    def to_json(self) -> str:
        return json.dumps(
            [{"item_id": i.item_id, "factor": i.factor, "reverse_scored": i.reverse_scored} for i in self.items],
            indent=2,
        )


def default_mapping() -> SurveyMapping:
    """Placeholder 24-item layout: 7/7/7 need items plus 3 presence items.

    Item ids are synthetic (``competence_01`` ...). Real studies must supply
    the instrument's own item-to-factor assignment.
    """
    items = []
    for factor, count in zip(FACTORS, (7, 7, 7, 3)):
        items += [SurveyItem(f"{factor}_{k:02d}", factor) for k in range(1, count + 1)]
    return SurveyMapping(tuple(items))


def validate_mapping(
    mapping: SurveyMapping,
    expected_total: int | None = None,
    expected_counts: Mapping[str, int] | None = None,
) -> list[str]:
    """Return a list of human-readable violations; an empty list means ok."""
    problems = []
    seen = set()
    for it in mapping.items:
        if it.item_id in seen:
            problems.append(f"duplicate item_id {it.item_id!r}")
        seen.add(it.item_id)
        if it.factor not in mapping.factors:
            problems.append(f"item {it.item_id!r} maps to unknown factor {it.factor!r}")
    for f in mapping.factors:
        n = sum(it.factor == f for it in mapping.items)
        if n == 0:
            problems.append(f"empty factor {f!r}")
        if expected_counts and f in expected_counts and n != expected_counts[f]:
            problems.append(f"factor {f!r} has {n} items, expected {expected_counts[f]}")
    if expected_total is not None and len(mapping.items) != expected_total:
        problems.append(f"mapping has {len(mapping.items)} items, expected {expected_total}")
    return problems


@dataclass(frozen=True)
class SurveyResponse:
    player_id: str
    answers: Mapping[str, int]


def aggregate_factor_scores(resp: SurveyResponse, mapping: SurveyMapping) -> tuple[float, ...]:
    """Mean item value per factor, reverse-scored items flipped as ``6 - v``."""
    known = set(mapping.item_ids)
    extra = set(resp.answers) - known
    if extra:
        raise SurveyError(f"{resp.player_id}: answers for unknown items {sorted(extra)}")
    sums = dict.fromkeys(mapping.factors, 0.0)
    counts = dict.fromkeys(mapping.factors, 0)
    for it in mapping.items:
        if it.item_id not in resp.answers:
            raise SurveyError(f"{resp.player_id}: missing answer for item {it.item_id!r}")
        v = resp.answers[it.item_id]
        if isinstance(v, bool) or v not in (1, 2, 3, 4, 5):
            raise SurveyError(f"{resp.player_id}: answer {v!r} to {it.item_id!r} is not in 1..5")
        sums[it.factor] += 6 - v if it.reverse_scored else v
        counts[it.factor] += 1
    empty = [f for f in mapping.factors if counts[f] == 0]
    if empty:
        raise SurveyError(f"mapping has no items for factors {empty}")
    return tuple(sums[f] / counts[f] for f in mapping.factors)


def _parse_answer(cell: str):
    cell = cell.strip()
    if not cell:
        return None
    try:
        v = float(cell)
    except ValueError:
        return cell
    return int(v) if v.is_integer() else v


def load_responses(path: str | Path) -> list[SurveyResponse]:
    """Responses CSV: ``player_id`` column then one column per item.

    Blank cells are treated as unanswered items.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != ID_COLUMN:
            raise SurveyError(f"{path}: first column must be {ID_COLUMN!r}")
        out = []
        for row in reader:
            if not row:
                continue
            answers = {
                item: a for item, a in ((h, _parse_answer(c)) for h, c in zip(header[1:], row[1:])) if a is not None
            }
            out.append(SurveyResponse(row[0], answers))
    return out


def attach_scores(ds: Dataset, responses: list[SurveyResponse], mapping: SurveyMapping) -> Dataset:
    """Fill the factor columns of ``ds`` from survey responses matched by player id.

    Players without a response keep missing factor values (dropped by cleaning).
    """
    if tuple(mapping.factors) != tuple(ds.schema.factor_names):
        raise SchemaError("mapping factors do not match the dataset factor columns")
    by_id = {}
    for r in responses:
        if r.player_id in by_id:
            raise DataError(f"duplicate survey response for {r.player_id!r}")
        by_id[r.player_id] = aggregate_factor_scores(r, mapping)
    Y = np.array([by_id.get(pid, (math.nan,) * 4) for pid in ds.ids], dtype=float).reshape(len(ds), 4)
    return ds.with_factors(Y)
