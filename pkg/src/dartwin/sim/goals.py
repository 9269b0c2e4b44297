"""Checking goal constraints against a trace."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .. import model as m
from ..constraints import holds
from .engine import Trace


class GoalEvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class GoalResult:
    goal: str
    verdict: str  # "satisfied" or "violated"
    intervals: tuple[tuple[float, float], ...]
    metrics: Mapping[str, float]

    @property
    def satisfied(self) -> bool:
        return self.verdict == "satisfied"


@dataclass(frozen=True)
class GoalReport:
    results: tuple[GoalResult, ...]

    @property
    def all_satisfied(self) -> bool:
        return all(r.satisfied for r in self.results)

    def result(self, goal: str) -> GoalResult:
        return next(r for r in self.results if r.goal == goal)

    def to_text(self) -> str:
        lines = []
        for r in self.results:
            lines.append(f"{r.goal}: {r.verdict}")
            for a, b in r.intervals:
                lines.append(f"  violated from t={a:g} to t={b:g}")
            for k, v in sorted(r.metrics.items()):
                lines.append(f"  {k} = {v:.6g}")
        return "\n".join(lines) + ("\n" if lines else "")

    def to_records(self) -> str:
        out = []
        for r in self.results:
            rec = {"goal": r.goal, "verdict": r.verdict, "intervals": [list(i) for i in r.intervals], "metrics": dict(r.metrics)}
            out.append(json.dumps(rec, sort_keys=True))
        return "\n".join(out) + ("\n" if out else "")


def false_runs(time: np.ndarray, ok: np.ndarray) -> tuple[tuple[float, float], ...]:
    """Maximal runs of False samples as (first time, last time)."""
    runs = []
    start = None
    for k, v in enumerate(ok):
        if not v and start is None:
            start = k
        elif v and start is not None:
            runs.append((float(time[start]), float(time[k - 1])))
            start = None
    if start is not None:
        runs.append((float(time[start]), float(time[-1])))
    return tuple(runs)


def _channel(model: m.Model, trace: Trace, goal: m.Goal, poi: str, bindings: Mapping[str, str]) -> np.ndarray:
    name = bindings.get(f"{goal.id}.{poi}", bindings.get(poi))
    candidates = [name] if name else [poi, f"{model.root.id}.{poi}"]
    for c in candidates:
        if c in trace:
            return np.asarray(trace[c], dtype=float)
    raise GoalEvaluationError(f"{goal.id}: no trace channel for PoI {poi!r} (tried {', '.join(candidates)})")


def evaluate_goals(
    model: m.Model,
    trace: Trace,
    bindings: Optional[Mapping[str, str]] = None,
    goals: Optional[Sequence[str]] = None,
) -> GoalReport:
    """Verdicts for the selected goals (all goals when ``goals`` is None).

    A goal without a constraint is reported satisfied.
    """
    bindings = bindings or {}
    selected = list(goals) if goals is not None else [g.id for g in model.goals]
    results = []
    for gid in selected:
        g = model.goal(gid)
        if g is None:
            raise GoalEvaluationError(f"unknown goal {gid!r}")
        if g.constraint is None:
            results.append(GoalResult(gid, "satisfied", (), {}))
            continue
        env = {n: _channel(model, trace, g, n, bindings) for n in sorted(g.constraint.names())}
        ok = np.broadcast_to(holds(g.constraint.body, env), trace.time.shape)
        if g.constraint.temporal == "at_end":
            ok = np.ones_like(ok, dtype=bool) if ok[-1] else np.r_[np.ones(len(ok) - 1, bool), False]
        intervals = false_runs(trace.time, ok)
        metrics = {"samples": float(len(ok)), "violated_samples": float(np.count_nonzero(~ok))}
        for n, arr in env.items():
            metrics[f"min_{n}"] = float(np.min(arr))
            metrics[f"max_{n}"] = float(np.max(arr))
        results.append(GoalResult(gid, "satisfied" if not intervals else "violated", intervals, metrics))
    return GoalReport(tuple(results))
