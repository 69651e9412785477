"""Greedy maximal packings under symmetric-difference distance.

An alpha-packing is a subfamily whose members are pairwise >= alpha apart in
symmetric-difference size; it is maximal when every family member is within
distance < alpha of some packing member.  The greedy construction scans the
family in index order, so the result is deterministic; the cover map (every
set's nearest admitted member, ties to the lowest member index) doubles as
the maximality certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _bitops
from .errors import AuditFailure, ConstructionError, PreconditionFailed
from .sampling import Sample, relative_error
from .set_system import SetSystem

_BIG = np.iinfo(np.int64).max


@dataclass(frozen=True)
class Packing:
    alpha: float
    member_indices: tuple[int, ...]
    cover_map: tuple[int, ...]  # family index -> covering member's family index

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConstructionError(f"alpha must be positive, got {self.alpha}")

    @property
    def size(self) -> int:
        return len(self.member_indices)

    def to_json_dict(self) -> dict:
        return {
            "alpha": float(self.alpha),
            "member_indices": list(self.member_indices),
            "cover_map": list(self.cover_map),
        }


def greedy_maximal_packing(
    system: SetSystem, alpha, seed_members: Sequence[int] = ()
) -> Packing:
    """Scan in family-index order, admitting every set >= alpha from all
    admitted members.

    `seed_members` are admitted first, in the given order; they must
    themselves be pairwise >= alpha apart.  Seeding a coarser packing yields
    a maximal finer packing that contains it (used by the chain builder).
    """
    if not alpha > 0:
        raise ConstructionError(f"alpha must be positive, got {alpha}")
    fam = len(system)
    if fam == 0:
        return Packing(alpha, (), ())

    if alpha <= 1:
        # distinct sets are >= 1 apart, so everything is admitted
        idx = tuple(range(fam))
        return Packing(alpha, idx, idx)

    best_dist = np.full(fam, _BIG, dtype=np.int64)
    best_member = np.full(fam, -1, dtype=np.int64)
    members: list[int] = []

    def admit(k: int) -> None:
        d = _bitops.xor_sizes(system.packed, system.packed[k])
        closer = (d < best_dist) | ((d == best_dist) & (k < best_member))
        best_dist[closer] = d[closer]
        best_member[closer] = k
        members.append(k)

    for k in seed_members:
        if best_dist[k] < alpha:
            raise ConstructionError(
                f"seed member {k} is within {best_dist[k]} < alpha of an earlier seed"
            )
        admit(k)
    for k in range(fam):
        if best_dist[k] >= alpha:
            admit(k)
    return Packing(alpha, tuple(members), tuple(int(m) for m in best_member))


def verify_packing(system: SetSystem, packing: Packing) -> None:
    """Independent re-check of the packing and maximality certificates."""
    mem = packing.member_indices
    alpha = packing.alpha
    if sorted(set(mem)) != sorted(mem):
        raise AuditFailure("duplicate member indices")
    mem_arr = np.array(mem, dtype=np.int64)
    for k in mem:
        d = _bitops.xor_sizes(system.packed[mem_arr], system.packed[k])
        d[mem_arr == k] = _BIG
        if len(mem) > 1 and d.min() < alpha:
            raise AuditFailure(f"members {k} and {mem[int(d.argmin())]} are {d.min()} apart")
    if len(packing.cover_map) != len(system):
        raise AuditFailure("cover map is not total")
    # recompute nearest member (ties to lowest member index) from scratch
    best_dist = np.full(len(system), _BIG, dtype=np.int64)
    best_member = np.full(len(system), -1, dtype=np.int64)
    for k in sorted(mem):
        d = _bitops.xor_sizes(system.packed, system.packed[k])
        closer = d < best_dist
        best_dist[closer] = d[closer]
        best_member[closer] = k
    mem_set = set(mem)
    for i, cover in enumerate(packing.cover_map):
        if cover not in mem_set:
            raise AuditFailure(f"set {i} covered by non-member {cover}")
        if best_dist[i] >= alpha:
            raise AuditFailure(f"set {i} is {best_dist[i]} >= alpha from every member")
        if cover != best_member[i]:
            raise AuditFailure(f"set {i}: cover {cover} is not the nearest member")
        if i in mem_set and cover != i:
            raise AuditFailure(f"member {i} does not cover itself")


def delta_system(system: SetSystem, packing: Packing) -> SetSystem:
    """The family of symmetric differences over distinct packing member pairs."""
    mem = packing.member_indices
    masks = []
    for a in range(len(mem)):
        ma = system.masks[mem[a]]
        for b in range(a + 1, len(mem)):
            masks.append(ma ^ system.masks[mem[b]])
    return SetSystem.from_masks(system.n, masks)


def packing_trace_property(system: SetSystem, packing: Packing, sample: Sample) -> bool:
    """Whether packing members have pairwise-distinct traces on the sample.

    Requires the sample to verify as a relative (alpha/n, 1/2)-approximation
    of the members' symmetric-difference system; when that holds the traces
    are provably distinct, and property tests assert exactly that.
    """
    deltas = delta_system(system, packing)
    if len(deltas) > 0:
        eps = packing.alpha / system.n
        report = relative_error(deltas, sample, eps)
        half = Fraction(1, 2) if isinstance(eps, Fraction) else 0.5
        if not report.passes(half):
            raise PreconditionFailed(
                "sample is not a relative (alpha/n, 1/2)-approximation of the "
                f"delta system (worst ratio {float(report.worst_ratio):.6g})"
            )
    traces = {system.masks[k] & sample.bits for k in packing.member_indices}
    return len(traces) == len(packing.member_indices)


def packing_size_bound(n: int, alpha: float, d: int, c3: float) -> float:
    """(c3 n / alpha)^(2d); meaningful as a bound for alpha >= 2."""
    if n < 1 or not alpha > 0 or d < 1:
        raise ConstructionError(f"bad arguments {(n, alpha, d)}")
    return (c3 * n / alpha) ** (2 * d)
