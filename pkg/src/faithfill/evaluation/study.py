"""Pairwise preference studies: vote records, aggregation, judge clients.

Votes arrive as records of head-to-head comparisons between two methods on
one task, judged by humans or by an external model judge. Aggregation is
plain vote counting: per method pair, the fraction of votes favoring each
side (they sum to 100%) plus per-task majority tallies.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Protocol, Sequence, Tuple

from ..errors import ValidationError
from ..images import ImageBuffer

JUDGE_KINDS = ("human", "gpt")


@dataclass(frozen=True)
class VoteRecord:
    task_id: str
    target_id: str
    method_a: str
    method_b: str
    votes: Tuple[str, ...]
    judge_kind: str = "human"
    order_randomized: bool = True

    def __post_init__(self):
        if not self.votes:
            raise ValidationError(f"task {self.task_id}: a vote record needs at least one vote")
        bad = [v for v in self.votes if v not in ("a", "b")]
        if bad:
            raise ValidationError(f"task {self.task_id}: votes must be 'a' or 'b', got {bad[:4]}")
        if self.method_a == self.method_b:
            raise ValidationError(f"task {self.task_id}: methods must differ")
        if self.judge_kind not in JUDGE_KINDS:
            raise ValidationError(f"task {self.task_id}: judge_kind must be one of {JUDGE_KINDS}")
        object.__setattr__(self, "votes", tuple(self.votes))


@dataclass
class PairPreference:
    method_a: str
    method_b: str
    pct_a: float
    pct_b: float
    total_votes: int
    tasks: int
    majority: Dict[str, int] = field(default_factory=dict)


def aggregate_preferences(records: Sequence[VoteRecord]) -> Dict[Tuple[str, str], PairPreference]:
    """Vote shares and per-task majorities for every method pair seen."""
    if not records:
        raise ValidationError("no vote records to aggregate")
    counts: Dict[Tuple[str, str], List[int]] = defaultdict(lambda: [0, 0])
    task_majority: Dict[Tuple[str, str], Dict[str, int]] = defaultdict(
        lambda: {"a": 0, "b": 0, "tie": 0})
    tasks: Dict[Tuple[str, str], int] = defaultdict(int)

    for rec in records:
        # canonical orientation: lexicographically smaller method is side a
        flip = rec.method_a > rec.method_b
        key = (rec.method_b, rec.method_a) if flip else (rec.method_a, rec.method_b)
        n_a = sum(1 for v in rec.votes if v == ("b" if flip else "a"))
        n_b = len(rec.votes) - n_a
        counts[key][0] += n_a
        counts[key][1] += n_b
        tasks[key] += 1
        if n_a > n_b:
            task_majority[key]["a"] += 1
        elif n_b > n_a:
            task_majority[key]["b"] += 1
        else:
            task_majority[key]["tie"] += 1

    out: Dict[Tuple[str, str], PairPreference] = {}
    for key in sorted(counts):
        n_a, n_b = counts[key]
        total = n_a + n_b
        out[key] = PairPreference(
            method_a=key[0], method_b=key[1],
            pct_a=100.0 * n_a / total, pct_b=100.0 * n_b / total,
            total_votes=total, tasks=tasks[key],
            majority={key[0]: task_majority[key]["a"], key[1]: task_majority[key]["b"],
                      "tie": task_majority[key]["tie"]},
        )
    return out


def shares_from_margin(margin_points: float) -> Tuple[float, float]:
    """Split 100% into (winner, loser) given a winner-minus-loser margin."""
    if not -100.0 <= margin_points <= 100.0:
        raise ValidationError(f"margin must lie in [-100, 100], got {margin_points}")
    return (100.0 + margin_points) / 2.0, (100.0 - margin_points) / 2.0


def read_votes_file(path) -> List[VoteRecord]:
    """One JSON record per line; see write_votes_file for the fields."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"votes file not found: {path}")
    records = []
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{ln}: not valid JSON: {exc}") from exc
        try:
            records.append(VoteRecord(
                task_id=d["task_id"], target_id=d.get("target_id", ""),
                method_a=d["method_a"], method_b=d["method_b"],
                votes=tuple(d["votes"]), judge_kind=d.get("judge_kind", "human"),
                order_randomized=bool(d.get("order_randomized", True))))
        except KeyError as exc:
            raise ValidationError(f"{path}:{ln}: missing field {exc}") from exc
    if not records:
        raise ValidationError(f"{path}: no vote records found")
    return records


def write_votes_file(records: Sequence[VoteRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({
                "task_id": r.task_id, "target_id": r.target_id,
                "method_a": r.method_a, "method_b": r.method_b,
                "votes": list(r.votes), "judge_kind": r.judge_kind,
                "order_randomized": r.order_randomized,
            }) + "\n")
    return path


@dataclass(frozen=True)
class JudgeDecision:
    choice: str  # "a" or "b"
    rationale: str = ""


class JudgeClient(Protocol):
    """Submit (target, candidate_a, candidate_b), receive choice + rationale."""

    def judge(self, target: ImageBuffer, image_a: ImageBuffer,
              image_b: ImageBuffer) -> JudgeDecision: ...


class CannedJudge:
    """Replays scripted decisions; the CI stand-in for a live model judge."""

    def __init__(self, decisions: Sequence[JudgeDecision]):
        self._decisions = list(decisions)
        self._cursor = 0

    def judge(self, target, image_a, image_b) -> JudgeDecision:
        if self._cursor >= len(self._decisions):
            raise ValidationError("canned judge ran out of scripted decisions")
        d = self._decisions[self._cursor]
        self._cursor += 1
        if d.choice not in ("a", "b"):
            raise ValidationError(f"scripted choice must be 'a' or 'b', got {d.choice!r}")
        return d


def collect_votes(tasks: Sequence[dict], judge: JudgeClient, repeats: int = 3,
                  judge_kind: str = "gpt") -> List[VoteRecord]:
    """Run a judge `repeats` times per task; tasks carry target/image_a/image_b."""
    records = []
    for task in tasks:
        votes = tuple(judge.judge(task["target"], task["image_a"], task["image_b"]).choice
                      for _ in range(repeats))
        records.append(VoteRecord(
            task_id=task["task_id"], target_id=task.get("target_id", ""),
            method_a=task["method_a"], method_b=task["method_b"],
            votes=votes, judge_kind=judge_kind,
            order_randomized=bool(task.get("order_randomized", True))))
    return records
