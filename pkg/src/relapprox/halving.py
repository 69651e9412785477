"""Iterated halving: the constructive route to family-size-free sample bounds.

The construction builds nested samples X = A_m ⊇ ... ⊇ A_0.  Level j targets
error delta/3^j with failure budget gamma/2^j; the recursion bottoms out when
delta/3^m <= 1/sqrt(n), where the whole ground set is already small enough to
serve as-is.  Sampling outward, each level draws from the previous one a
union-bound-sized sample for the previous level's trace system, whose
distinct-trace count is computed exactly.  Each step degrades the error by
the composition rule d1 + d2 + d1*d2, and the schedule telescopes to delta.

Modes differ in how oversized requests are handled: without replacement the
draw is capped at the available set (taking everything is a zero-error
approximation); with replacement an oversized draw is well-defined, so the
requested size is drawn in full and the output size follows the size formula
rather than n.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import AuditFailure, ConstructionError, PreconditionFailed, RetriesExhausted
from .sampling import (
    WITH,
    WITHOUT,
    ApproxParams,
    Constants,
    Sample,
    basic_sample_size,
    chaining_sample_size,
    make_rng,
    relative_error,
    seed_sequence,
    uniform_sample,
)
from .set_system import SetSystem, restrict, trace_count


@dataclass(frozen=True)
class HalvingLevel:
    delta_level: float
    gamma_level: float
    set_size_before: int  # size of the set (or multiset) sampled from
    sample_size_requested: int
    set_size_after: int
    seed_used: int | None


@dataclass(frozen=True)
class HalvingTrace:
    """Per-level record of one construction, base level first."""

    levels: tuple[HalvingLevel, ...]
    final_sample: Sample

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def to_json_dict(self) -> dict:
        return {
            "levels": [
                {
                    "delta_level": lv.delta_level,
                    "gamma_level": lv.gamma_level,
                    "set_size_before": lv.set_size_before,
                    "sample_size_requested": lv.sample_size_requested,
                    "set_size_after": lv.set_size_after,
                    "seed_used": lv.seed_used,
                }
                for lv in self.levels
            ],
            "final_size": self.final_sample.t,
            "mode": self.final_sample.mode,
        }


def _level_schedule(delta: float, gamma: float, n: int) -> list[tuple[float, float]]:
    """(delta_j, gamma_j) for the recursive levels, j = 0 at the output."""
    out = []
    d, g = delta, gamma
    while d > 1.0 / math.sqrt(n):
        out.append((d, g))
        d, g = d / 3.0, g / 2.0
    return out


def expected_depth(delta: float, n: int) -> int:
    """ceil(log3(delta sqrt(n))) for delta > 1/sqrt(n), else 0."""
    v = delta * math.sqrt(n)
    return max(0, math.ceil(math.log(v, 3))) if v > 1 else 0


def _support_trace_count(system, sample: Sample) -> int:
    if isinstance(system, SetSystem):
        return trace_count(system, sample.bits)
    return system.trace_count_for_support(len(sample.support))


def _subsample_without(sample: Sample, t: int, rng: np.random.Generator) -> Sample:
    pool = sample.support
    chosen = rng.permutation(len(pool))[:t]
    return Sample(sample.n, tuple(sorted(pool[int(i)] for i in chosen)))


def _subsample_with(sample: Sample, t: int, rng: np.random.Generator) -> Sample:
    # t i.i.d. draws from the multiset == a multinomial over its slots
    weights = (
        np.ones(len(sample.support), dtype=np.float64)
        if sample.multiplicity is None
        else np.array(sample.multiplicity, dtype=np.float64)
    )
    counts = rng.multinomial(t, weights / weights.sum())
    keep = counts > 0
    support = tuple(e for e, k in zip(sample.support, keep) if k)
    return Sample(sample.n, support, tuple(int(c) for c in counts[keep]))


def iterated_halving(system, params: ApproxParams, seed, mode: str = WITHOUT):
    """Run the raw construction; no verification happens here.

    Returns (final sample, trace).  Deterministic in (system, params, seed,
    mode).
    """
    n = system.n
    schedule = _level_schedule(params.delta, params.gamma, n)
    seed_val = seed if isinstance(seed, int) else None
    base_delta, base_gamma = (
        (params.delta, params.gamma)
        if not schedule
        else (schedule[-1][0] / 3.0, schedule[-1][1] / 2.0)
    )

    current = Sample.full(n)
    levels = [HalvingLevel(base_delta, base_gamma, n, n, n, None)]
    for j in range(len(schedule) - 1, -1, -1):
        d, g = schedule[j]
        tr = _support_trace_count(system, current)
        req = basic_sample_size(ApproxParams(params.eps, d / 3.0, g / 2.0), tr)
        rng = make_rng(seed, j)
        if mode == WITHOUT:
            if req >= current.t:
                nxt = current  # the whole set: zero additional error
            else:
                nxt = _subsample_without(current, req, rng)
        elif mode == WITH:
            nxt = _subsample_with(current, req, rng)
        else:
            raise ConstructionError(f"unknown sampling mode {mode!r}")
        levels.append(HalvingLevel(d, g, current.t, req, nxt.t, seed_val))
        current = nxt

    if seed_val is not None and current.seed is None:
        current = Sample(current.n, current.support, current.multiplicity, seed=seed_val)
    return current, HalvingTrace(tuple(levels), current)


def certified_halving(
    system,
    params: ApproxParams,
    seed,
    max_retries: int = 5,
    mode: str = WITHOUT,
) -> Sample:
    """Las Vegas wrapper: retry the construction until the exact verifier
    certifies the output."""
    if max_retries < 1:
        raise ConstructionError(f"max_retries must be >= 1, got {max_retries}")
    best = math.inf
    for attempt in range(max_retries):
        sample, _ = iterated_halving(system, params, seed_sequence(seed, attempt), mode=mode)
        report = relative_error(system, sample, params.eps)
        if report.passes(params.delta):
            return sample
        best = min(best, report.worst_ratio)
    raise RetriesExhausted(
        f"no verified sample in {max_retries} attempts "
        f"(best worst_ratio observed: {best:.6g})",
        best,
    )


def composition_check(system: SetSystem, a1: Sample, a2: Sample, eps, delta1, delta2) -> bool:
    """Whether a2 is a relative (eps, d1 + d2 + d1 d2)-approximation of F,
    given (checked here) a2 <= a1 <= X, a1 a relative (eps, d1)-approximation
    of F and a2 a relative (eps, d2)-approximation of F restricted to a1.

    The property suite asserts this always returns True.  Fraction arguments
    make every comparison exact.
    """
    if a1.multiplicity is not None or a2.multiplicity is not None:
        raise ConstructionError("composition is defined for without-replacement samples")
    if a2.bits & ~a1.bits:
        raise PreconditionFailed("a2 is not contained in a1")
    if not relative_error(system, a1, eps).passes(delta1):
        raise PreconditionFailed(f"a1 is not a relative ({eps}, {delta1})-approximation")
    traced, index_map = restrict(system, a1.bits)
    a2_traced = Sample(len(a1.support), tuple(index_map[e] for e in a2.support))
    if not relative_error(traced, a2_traced, eps).passes(delta2):
        raise PreconditionFailed(
            f"a2 is not a relative ({eps}, {delta2})-approximation of the trace"
        )
    combined = delta1 + delta2 + delta1 * delta2
    return relative_error(system, a2, eps).passes(combined)


def combined_construction(
    system: SetSystem,
    params: ApproxParams,
    d: int,
    constants: Constants,
    seed,
    max_retries: int = 5,
) -> Sample:
    """Two-stage construction: certified halving at (eps, delta/3), then a
    chaining-sized verified subsample of the trace at (eps, delta/3).  The
    composition rule makes the result a relative (eps, delta)-approximation.
    """
    stage = ApproxParams(params.eps, params.delta / 3.0, params.gamma / 2.0)
    a1 = certified_halving(system, stage, seed_sequence(seed, 0), max_retries)
    traced, _ = restrict(system, a1.bits)
    m1 = len(a1.support)
    t2 = min(m1, chaining_sample_size(stage, d, len(traced), constants))
    for attempt in range(max_retries):
        cand = uniform_sample(m1, t2, seed_sequence(seed, 1, attempt))
        if relative_error(traced, cand, params.eps).passes(stage.delta):
            final = Sample(system.n, tuple(a1.support[i] for i in cand.support))
            if not relative_error(system, final, params.eps).passes(params.delta):
                raise AuditFailure(
                    "composition violated: both stages verified but the "
                    "combined sample fails at the combined delta"
                )
            return final
    raise RetriesExhausted(
        f"no verified stage-2 sample in {max_retries} attempts", math.nan
    )


def write_trace_json(trace: HalvingTrace, path) -> None:
    with open(path, "w") as fh:
        json.dump(trace.to_json_dict(), fh, indent=2)
        fh.write("\n")
