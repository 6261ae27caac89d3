"""Hit-rate estimators over recorded session traces.

All estimators read traces, never re-run recommenders, so the same run can
be scored under different conventions (or replayed against a hypothetical
cache) without touching the simulator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .catalog import CacheSet
from .demand import SessionTrace, position_distribution


def _wald_halfwidth(p: float, n: int) -> float:
    if n <= 0:
        return float("nan")
    return 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / n)


@dataclass(frozen=True)
class ChrReport:
    """Hit-rate summary for a batch of sessions.

    ``aggregate`` treats steps lost to truncation as misses (hits over the
    intended step count), so shorter sessions cannot inflate the headline
    number. ``aggregate_observed`` divides by steps actually taken, and
    ``mean_hits_per_session`` skips normalization by steps entirely; all
    three agree when no session truncates. Degraded steps (fallback lists
    served during provider outages) are excluded from every numerator and
    denominator except ``intended_steps``.
    """

    sessions: int
    k: int
    hits: int
    observed_steps: int
    intended_steps: int
    aggregate: float
    aggregate_observed: float
    mean_hits_per_session: float
    ci_halfwidth: float
    per_step: dict[int, float] = field(default_factory=dict)
    per_step_n: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "sessions": self.sessions,
            "k": self.k,
            "hits": self.hits,
            "observed_steps": self.observed_steps,
            "intended_steps": self.intended_steps,
            "aggregate": self.aggregate,
            "aggregate_observed": self.aggregate_observed,
            "mean_hits_per_session": self.mean_hits_per_session,
            "ci_halfwidth": self.ci_halfwidth,
            "per_step": {str(s): r for s, r in sorted(self.per_step.items())},
            "per_step_n": {str(s): n for s, n in sorted(self.per_step_n.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def rows(self) -> list[tuple]:
        """(step, ratio, n, ci) rows for CSV export; step 0 is the aggregate."""
        out = [(0, self.aggregate, self.intended_steps,
                _wald_halfwidth(self.aggregate, self.intended_steps))]
        for s in sorted(self.per_step):
            n = self.per_step_n[s]
            out.append((s, self.per_step[s], n, _wald_halfwidth(self.per_step[s], n)))
        return out


def chr_sequential(traces: list[SessionTrace], k: int | None = None) -> ChrReport:
    """Hit rate over every recommendation-driven step of every session.

    Step indices follow watch order: the item watched second is step 2, so
    per-step keys run 2..k. ``k`` defaults to the longest intended session
    (max steps + 1 over non-truncated traces, or observed otherwise).
    """
    if not traces:
        raise ValueError("no traces to score")
    if k is None:
        k = max(len(t.steps) for t in traces) + 1
    hits = 0
    observed = 0
    step_hits: dict[int, int] = {}
    step_n: dict[int, int] = {}
    for t in traces:
        for i, step in enumerate(t.steps):
            if step.degraded:
                continue
            s = i + 2
            observed += 1
            step_n[s] = step_n.get(s, 0) + 1
            if step.cached:
                hits += 1
                step_hits[s] = step_hits.get(s, 0) + 1
    intended = len(traces) * (k - 1)
    aggregate = hits / intended if intended else float("nan")
    return ChrReport(
        sessions=len(traces),
        k=k,
        hits=hits,
        observed_steps=observed,
        intended_steps=intended,
        aggregate=aggregate,
        aggregate_observed=hits / observed if observed else float("nan"),
        mean_hits_per_session=hits / len(traces),
        ci_halfwidth=_wald_halfwidth(aggregate, intended),
        per_step={s: step_hits.get(s, 0) / n for s, n in step_n.items()},
        per_step_n=step_n,
    )


def chr_single(traces: list[SessionTrace]) -> float:
    """Hit rate of the first recommendation-driven selection only."""
    if not traces:
        raise ValueError("no traces to score")
    hits = sum(1 for t in traces if t.steps and not t.steps[0].degraded and t.steps[0].cached)
    n = sum(1 for t in traces if t.steps and not t.steps[0].degraded)
    return hits / n if n else float("nan")


@dataclass(frozen=True)
class ConditionalReport:
    """Hit rate conditioned on how many presented slots were cached."""

    observed: dict[int, float]
    counts: dict[int, int]
    expected_uniform: dict[int, float]
    expected_rank_biased: dict[int, float]
    n_slots: int

    def to_dict(self) -> dict:
        return {
            "n_slots": self.n_slots,
            "observed": {str(x): r for x, r in sorted(self.observed.items())},
            "counts": {str(x): c for x, c in sorted(self.counts.items())},
            "expected_uniform": {str(x): r for x, r in sorted(self.expected_uniform.items())},
            "expected_rank_biased": {str(x): r for x, r in sorted(self.expected_rank_biased.items())},
        }


def chr_conditional(traces: list[SessionTrace], rank_alpha: float = 1.0) -> ConditionalReport:
    """Group steps by cached-slot count x and compare against two selection
    hypotheses: uniform over slots (x / n) and rank-biased with weights
    i^(-rank_alpha). Under cached-first ordering both reduce to the mass on
    the first x positions."""
    groups_hit: dict[int, int] = {}
    groups_n: dict[int, int] = {}
    n_slots = 0
    for t in traces:
        for step in t.steps:
            if step.degraded:
                continue
            x = sum(step.presented_cached)
            n_slots = max(n_slots, len(step.presented))
            groups_n[x] = groups_n.get(x, 0) + 1
            if step.cached:
                groups_hit[x] = groups_hit.get(x, 0) + 1
    if n_slots == 0:
        raise ValueError("no steps to score")
    pdist = position_distribution("zipf", n_slots, rank_alpha)
    xs = sorted(groups_n)
    return ConditionalReport(
        observed={x: groups_hit.get(x, 0) / groups_n[x] for x in xs},
        counts=dict(groups_n),
        expected_uniform={x: x / n_slots for x in xs},
        expected_rank_biased={x: pdist.cum(x) for x in xs},
        n_slots=n_slots,
    )


def zero_cached_fraction(traces: list[SessionTrace]) -> dict[int, float]:
    """Per step index, the fraction of presented lists with no cached item.

    A growing value over steps means sessions wander away from the region
    the cache covers.
    """
    zero: dict[int, int] = {}
    n: dict[int, int] = {}
    for t in traces:
        for i, step in enumerate(t.steps):
            if step.degraded:
                continue
            s = i + 2
            n[s] = n.get(s, 0) + 1
            if not any(step.presented_cached):
                zero[s] = zero.get(s, 0) + 1
    return {s: zero.get(s, 0) / n[s] for s in sorted(n)}


@dataclass(frozen=True)
class ReplayReport:
    """Result of rescoring recorded selections against a different cache."""

    report: ChrReport
    outside_original: bool


def replay_chr(traces: list[SessionTrace], cache: CacheSet, k: int | None = None) -> ReplayReport:
    """Score the recorded selections as if ``cache`` had been deployed.

    Selection positions depend on rank only, so the same choices would have
    been made under any cache that keeps the presented lists unchanged;
    that holds exactly when the replay cache is a subset of the one the
    traces were recorded under. ``outside_original`` is set when some
    presented item the original run flagged uncached shows up in the replay
    cache, which is evidence the subset assumption is broken.
    """
    if not traces:
        raise ValueError("no traces to score")
    if k is None:
        k = max(len(t.steps) for t in traces) + 1
    hits = 0
    observed = 0
    step_hits: dict[int, int] = {}
    step_n: dict[int, int] = {}
    outside = False
    for t in traces:
        for i, step in enumerate(t.steps):
            if step.degraded:
                continue
            if not outside:
                for vid, flag in zip(step.presented, step.presented_cached):
                    if not flag and vid in cache:
                        outside = True
                        break
            s = i + 2
            observed += 1
            step_n[s] = step_n.get(s, 0) + 1
            if step.selected in cache:
                hits += 1
                step_hits[s] = step_hits.get(s, 0) + 1
    intended = len(traces) * (k - 1)
    aggregate = hits / intended if intended else float("nan")
    report = ChrReport(
        sessions=len(traces),
        k=k,
        hits=hits,
        observed_steps=observed,
        intended_steps=intended,
        aggregate=aggregate,
        aggregate_observed=hits / observed if observed else float("nan"),
        mean_hits_per_session=hits / len(traces),
        ci_halfwidth=_wald_halfwidth(aggregate, intended),
        per_step={s: step_hits.get(s, 0) / n for s, n in step_n.items()},
        per_step_n=step_n,
    )
    return ReplayReport(report=report, outside_original=outside)
