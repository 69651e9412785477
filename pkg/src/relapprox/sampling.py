"""Uniform sampling and exact verification of relative approximations.

A sample A of size t is a relative (eps, delta)-approximation for (X, F)
when for every S in F

    | |S|/n - |A & S|/t |  <=  delta * max(|S|/n, eps).

Verifiers here compute the left side exactly (integer intersection counts)
and report the worst ratio over the family.  Arithmetic is float by default;
passing `eps` as a Fraction switches the per-set loop to exact rationals.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import _bitops
from .errors import ConstructionError
from .set_system import SetSystem

WITHOUT = "without"
WITH = "with"


@dataclass(frozen=True)
class ApproxParams:
    eps: float
    delta: float
    gamma: float

    def __post_init__(self):
        for name in ("eps", "delta", "gamma"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConstructionError(f"{name} must lie strictly in (0, 1), got {v}")


@dataclass(frozen=True)
class Constants:
    """Leading constants of the four size bounds; values come from calibration."""

    c: float
    c1: float
    c2: float
    c3: float

    def __post_init__(self):
        for name in ("c", "c1", "c2", "c3"):
            v = getattr(self, name)
            if v < 1:
                raise ConstructionError(f"constant {name} must be >= 1, got {v}")


# Placeholders only; a calibration run (see harness.calibrate_constants and
# scripts/calibrate.py) writes constants.json, which find_constants prefers.
DEFAULT_CONSTANTS = Constants(c=8.0, c1=8.0, c2=8.0, c3=4.0 * math.sqrt(8.0))


def load_constants(path) -> Constants:
    with open(path) as fh:
        doc = json.load(fh)
    return Constants(c=doc["c"], c1=doc["c1"], c2=doc["c2"], c3=doc["c3"])


def find_constants(path=None) -> Constants:
    """Calibrated constants if available: explicit path, $RELAPPROX_CONSTANTS,
    ./constants.json, else the uncalibrated defaults."""
    candidates = [path, os.environ.get("RELAPPROX_CONSTANTS"), "constants.json"]
    for cand in candidates:
        if cand and os.path.exists(cand):
            return load_constants(cand)
    return DEFAULT_CONSTANTS


@dataclass(frozen=True)
class Sample:
    """A uniform sample of [0, n): a t-subset, or t draws with multiplicity.

    `support` is the strictly ascending tuple of distinct sampled elements;
    `multiplicity` is parallel to it in with-replacement mode and None
    otherwise.  `seed` records provenance (None for external samples).
    """

    n: int
    support: tuple[int, ...]
    multiplicity: tuple[int, ...] | None = None
    seed: int | None = None

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.support, self.support[1:])):
            raise ConstructionError("sample support must be strictly ascending")
        if self.support and not (0 <= self.support[0] and self.support[-1] < self.n):
            raise ConstructionError("sample members outside the ground set")
        if self.multiplicity is not None:
            if len(self.multiplicity) != len(self.support):
                raise ConstructionError("multiplicity vector does not match support")
            if any(c < 1 for c in self.multiplicity):
                raise ConstructionError("multiplicities must be >= 1")

    @property
    def mode(self) -> str:
        return WITHOUT if self.multiplicity is None else WITH

    @cached_property
    def t(self) -> int:
        if self.multiplicity is None:
            return len(self.support)
        return int(sum(self.multiplicity))

    @cached_property
    def bits(self) -> int:
        return _bitops.mask_from_indices(self.support)

    @cached_property
    def threshold_bits(self) -> tuple[int, ...]:
        """Masks of elements with multiplicity >= k, k = 1, 2, ...

        A multiplicity-weighted intersection count is then the plain popcount
        sum over these masks, which keeps with-replacement verification on
        the same bit-parallel path as without-replacement.
        """
        if self.multiplicity is None:
            return (self.bits,)
        out = []
        k = 1
        while True:
            m = _bitops.mask_from_indices(
                e for e, c in zip(self.support, self.multiplicity) if c >= k
            )
            if not m:
                break
            out.append(m)
            k += 1
        return tuple(out)

    def counts_array(self) -> np.ndarray:
        dense = np.zeros(self.n, dtype=np.int64)
        if self.support:
            idx = np.array(self.support, dtype=np.int64)
            if self.multiplicity is None:
                dense[idx] = 1
            else:
                dense[idx] = np.array(self.multiplicity, dtype=np.int64)
        return dense

    @classmethod
    def from_mask(cls, n: int, bits: int) -> "Sample":
        return cls(n, tuple(_bitops.indices_from_mask(bits)))

    @classmethod
    def full(cls, n: int) -> "Sample":
        return cls(n, tuple(range(n)))


def seed_sequence(*entropy) -> np.random.SeedSequence:
    """Deterministic SeedSequence from a path of integers (nesting flattens)."""
    flat = []
    stack = list(reversed(entropy))
    while stack:
        e = stack.pop()
        if isinstance(e, np.random.SeedSequence):
            ent = e.entropy if isinstance(e.entropy, (list, tuple)) else [e.entropy]
            flat.extend(int(v) for v in ent)
        elif isinstance(e, (list, tuple)):
            stack.extend(reversed(e))
        else:
            flat.append(int(e))
    return np.random.SeedSequence(flat)


def make_rng(*entropy) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(*entropy)))


def _partial_fisher_yates(n: int, t: int, rng: np.random.Generator) -> list[int]:
    # first t entries of a uniform permutation, sparse representation
    jumps = rng.integers(low=np.arange(t), high=n)
    perm: dict[int, int] = {}
    out = []
    for i in range(t):
        j = int(jumps[i])
        vj = perm.get(j, j)
        perm[j] = perm.get(i, i)
        out.append(vj)
    return out


def uniform_sample(n: int, t: int, seed, mode: str = WITHOUT) -> Sample:
    """Uniform random sample, a deterministic function of (n, t, seed, mode)."""
    if n < 1 or t < 1:
        raise ConstructionError(f"need n >= 1 and t >= 1, got n={n}, t={t}")
    seed_val = seed if isinstance(seed, int) else None
    rng = make_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    if mode == WITHOUT:
        if t > n:
            raise ConstructionError(f"cannot draw {t} distinct elements from {n}")
        members = sorted(_partial_fisher_yates(n, t, rng))
        return Sample(n, tuple(members), seed=seed_val)
    if mode == WITH:
        draws = rng.integers(0, n, size=t)
        support, counts = np.unique(draws, return_counts=True)
        return Sample(
            n,
            tuple(int(e) for e in support),
            tuple(int(c) for c in counts),
            seed=seed_val,
        )
    raise ConstructionError(f"unknown sampling mode {mode!r}")


# --- verification -----------------------------------------------------------


@dataclass(frozen=True)
class ApproximationReport:
    worst_ratio: float
    worst_set_index: int | None
    t: int
    eps: float
    per_set_errors: tuple | None = None

    def passes(self, delta) -> bool:
        return self.worst_ratio <= delta

    def to_json_dict(self) -> dict:
        return {
            "worst_ratio": float(self.worst_ratio),
            "worst_set_index": self.worst_set_index,
            "t": self.t,
            "eps": float(self.eps),
        }


def intersection_counts(system: SetSystem, sample: Sample) -> np.ndarray:
    """|A & S| for every S in the family (multiplicity-weighted in WITH mode)."""
    total = np.zeros(len(system), dtype=np.int64)
    for thr in sample.threshold_bits:
        total += _bitops.intersection_sizes(system.packed, _bitops.pack_mask(thr, system.n))
    return total


def _check_verifier_inputs(system, sample) -> None:
    if sample.n != system.n:
        raise ConstructionError(
            f"sample over [0, {sample.n}) but system over [0, {system.n})"
        )
    if sample.t < 1:
        raise ConstructionError("sample has t = 0; densities are undefined")


_NUMPY_PATH_MIN_FAMILY = 64


def relative_error(system, sample: Sample, eps, per_set: bool = False) -> ApproximationReport:
    """Exact worst relative error of the sample over the family.

    Ties for the worst set break toward the lowest family index.  `eps` as a
    Fraction selects exact rational arithmetic (the report then carries
    Fractions); float eps uses IEEE doubles, identically on the scalar and
    vectorized paths.
    """
    if not isinstance(system, SetSystem):
        return system.error_report(sample, eps, per_set=per_set)
    _check_verifier_inputs(system, sample)
    if len(system) == 0:
        return ApproximationReport(0.0, None, sample.t, eps, () if per_set else None)

    n, t = system.n, sample.t
    exact = isinstance(eps, Fraction)
    if not exact and len(system) >= _NUMPY_PATH_MIN_FAMILY and not per_set:
        counts = intersection_counts(system, sample)
        dens = system.sizes_array / n
        err = np.abs(dens - counts / t)
        ratio = err / np.maximum(dens, eps)
        worst = int(np.argmax(ratio))
        return ApproximationReport(float(ratio[worst]), worst, t, eps)

    div = (lambda a, b: Fraction(a, b)) if exact else (lambda a, b: a / b)
    worst_ratio = div(0, 1)
    worst_idx = 0
    errors = [] if per_set else None
    for idx, (m, s) in enumerate(zip(system.masks, system.sizes)):
        cnt = sum((m & thr).bit_count() for thr in sample.threshold_bits)
        err = abs(div(s, n) - div(cnt, t))
        ratio = err / max(div(s, n), eps)
        if errors is not None:
            errors.append(ratio)
        if ratio > worst_ratio:
            worst_ratio, worst_idx = ratio, idx
    return ApproximationReport(
        worst_ratio, worst_idx, t, eps, tuple(errors) if errors is not None else None
    )


def is_relative_approx(system, sample: Sample, params: ApproxParams) -> bool:
    return relative_error(system, sample, params.eps).passes(params.delta)


def max_additive_error(system, sample: Sample):
    """max over S of | |S|/n - |A & S|/t |."""
    if not isinstance(system, SetSystem):
        return system.max_additive_error(sample)
    _check_verifier_inputs(system, sample)
    if len(system) == 0:
        return 0.0
    counts = intersection_counts(system, sample)
    return float(np.max(np.abs(system.sizes_array / system.n - counts / sample.t)))


def is_eps_approximation(system, sample: Sample, eps) -> bool:
    return max_additive_error(system, sample) <= eps


def is_eps_net(system, sample: Sample, eps) -> bool:
    """Whether the sample hits every set of size >= eps * n."""
    if not isinstance(system, SetSystem):
        return system.is_eps_net(sample, eps)
    _check_verifier_inputs(system, sample)
    if len(system) == 0:
        return True
    big = system.sizes_array >= eps * system.n
    if not big.any():
        return True
    counts = intersection_counts(system, sample)
    return bool((counts[big] > 0).all())


# --- tail bound and sample-size formulas ------------------------------------


def chernoff_bound(n: int, s: int, t: int, eta: float) -> float:
    """Raw tail expression 2 exp(-eta^2 n / (2 s t + eta n)); may exceed 1."""
    if eta <= 0:
        raise ConstructionError(f"eta must be positive, got {eta}")
    if n < 1 or t < 1 or not 0 <= s <= n:
        raise ConstructionError(f"need n, t >= 1 and 0 <= s <= n, got {(n, s, t)}")
    return 2.0 * math.exp(-(eta * eta * n) / (2.0 * s * t + eta * n))


def basic_sample_size(params: ApproxParams, family_size: int) -> int:
    """Union-bound size: ceil( 3/(eps delta^2) * ln(2 |F| / gamma) )."""
    if family_size < 1:
        raise ConstructionError("family_size must be >= 1")
    e, d, g = params.eps, params.delta, params.gamma
    return math.ceil(3.0 / (e * d * d) * math.log(2.0 * family_size / g))


def main_sample_size(params: ApproxParams, d: int, constants: Constants) -> int:
    """ceil( c/(eps delta^2) * (d ln(1/eps) + ln(1/gamma)) )."""
    _check_dim(d)
    e, dl, g = params.eps, params.delta, params.gamma
    return math.ceil(constants.c / (e * dl * dl) * (d * math.log(1 / e) + math.log(1 / g)))


def halving_sample_size(params: ApproxParams, d: int, constants: Constants) -> int:
    """ceil( c1/(eps delta^2) * (d ln(1/(eps delta)) + ln(1/gamma)) )."""
    _check_dim(d)
    e, dl, g = params.eps, params.delta, params.gamma
    return math.ceil(
        constants.c1 / (e * dl * dl) * (d * math.log(1 / (e * dl)) + math.log(1 / g))
    )


def chaining_sample_size(
    params: ApproxParams, d: int, family_size: int, constants: Constants
) -> int:
    """ceil( c2 * max( ln(|F|/gamma)/(eps delta), (d ln(1/eps) + ln(1/gamma))/(eps delta^2) ) )."""
    _check_dim(d)
    if family_size < 1:
        raise ConstructionError("family_size must be >= 1")
    e, dl, g = params.eps, params.delta, params.gamma
    first = math.log(family_size / g) / (e * dl)
    second = (d * math.log(1 / e) + math.log(1 / g)) / (e * dl * dl)
    return math.ceil(constants.c2 * max(first, second))


def _check_dim(d: int) -> None:
    if d < 1:
        raise ConstructionError(f"dimension parameter d must be >= 1, got {d}")


# --- sample JSON format ------------------------------------------------------


def write_sample_json(sample: Sample, path) -> None:
    doc = {
        "n": sample.n,
        "t": sample.t,
        "mode": sample.mode,
        "members": list(sample.support),
        "seed": sample.seed,
    }
    if sample.multiplicity is not None:
        doc["counts"] = list(sample.multiplicity)
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def read_sample_json(path) -> Sample:
    with open(path) as fh:
        doc = json.load(fh)
    mult = tuple(doc["counts"]) if "counts" in doc else None
    return Sample(doc["n"], tuple(doc["members"]), mult, seed=doc.get("seed"))
