"""Range spaces of known VC dimension, used as ground truth everywhere.

`intervals`, `halfplanes`, `axis_rectangles`, `random_system`, `power_set`
return materialized SetSystems.  `ImplicitIntervals` is the same interval
family without materialization: the family of all intervals on n points has
n(n+1)/2 + 1 sets, so at n = 10^5 it can only be handled through its
structure (prefix sums for intersection counts, a closed form for trace
counts).  Its verifier is exact and agrees with the generic one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import ConstructionError
from .sampling import ApproximationReport, Sample
from .set_system import SetSystem

_INT64_MAX = np.iinfo(np.int64).max


# --- intervals ---------------------------------------------------------------


@dataclass(frozen=True)
class ImplicitIntervals:
    """All intervals {i..j} on [0, n), plus the empty set, unmaterialized.

    Family order (shared with the materialized form): index 0 is the empty
    set, then intervals in lexicographic (i, j) order.  VC dimension is 2
    for n >= 4.
    """

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ConstructionError(f"need n >= 1, got {self.n}")

    @property
    def family_size(self) -> int:
        return self.n * (self.n + 1) // 2 + 1

    def __len__(self) -> int:
        return self.family_size

    def trace_count_for_support(self, m: int) -> int:
        """|F|_Y| depends only on |Y|: intervals trace to intervals."""
        if m < 0:
            raise ConstructionError("support size must be >= 0")
        return m * (m + 1) // 2 + 1 if m else 1

    def index_of(self, i: int, j: int) -> int:
        """Family index of the interval {i..j}, 0 <= i <= j < n."""
        return 1 + i * self.n - i * (i - 1) // 2 + (j - i)

    def materialize(self) -> SetSystem:
        masks = [0]
        for i in range(self.n):
            run = 0
            for j in range(i, self.n):
                run |= 1 << j
                masks.append(run)
        # mask for {i..j} built incrementally; orders match index_of
        return SetSystem(self.n, tuple(masks))

    # -- exact verification without materializing ---------------------------
    #
    # For the interval [i, j] with boundaries a = i, b = j + 1 and prefix
    # counts p, the signed error is (u_b - u_a) / (n t) with
    # u_x = x t - p_x n.  Small sets (size <= eps n) maximize |u_b - u_a|
    # over a bounded window; large sets maximize |u_b - u_a| / (b - a),
    # a maximum-slope query answered exactly.

    def _u_values(self, sample: Sample) -> np.ndarray:
        counts = sample.counts_array()
        p = np.concatenate(([0], np.cumsum(counts, dtype=np.int64)))
        x = np.arange(self.n + 1, dtype=np.int64)
        return x * sample.t - p * self.n

    def error_report(self, sample: Sample, eps, per_set: bool = False) -> ApproximationReport:
        if per_set:
            raise ConstructionError("per-set errors are not materialized for implicit families")
        if isinstance(eps, Fraction):
            raise ConstructionError("exact-arithmetic reports require a materialized system")
        if sample.n != self.n:
            raise ConstructionError(f"sample over [0, {sample.n}) but system over [0, {self.n})")
        if sample.t < 1:
            raise ConstructionError("sample has t = 0; densities are undefined")

        n, t = self.n, sample.t
        u = self._u_values(sample)
        counts_prefix = np.concatenate(([0], np.cumsum(sample.counts_array(), dtype=np.int64)))

        def ratio_of(a: int, b: int) -> float:
            # same float operation order as the generic per-set verifier
            s = b - a
            cnt = int(counts_prefix[b] - counts_prefix[a])
            err = abs(s / n - cnt / t)
            return err / max(s / n, eps)

        # worst ratio 0 is attained by the empty set (family index 0)
        best_ratio, best_index = 0.0, 0

        small_max = self._largest_small_size(eps)
        if small_max >= 1:
            pair = _window_max_abs_diff(u, small_max)
            if pair is not None:
                a, b = pair
                r = ratio_of(a, b)
                if r > best_ratio:
                    best_ratio, best_index = r, self.index_of(a, b - 1)
        large_min = small_max + 1
        if large_min <= n:
            pair = _max_abs_slope_at_least(u, large_min)
            if pair is not None:
                a, b = pair
                r = ratio_of(a, b)
                if r > best_ratio:
                    best_ratio, best_index = r, self.index_of(a, b - 1)
        return ApproximationReport(best_ratio, best_index, t, eps)

    def _largest_small_size(self, eps: float) -> int:
        """Largest integer s in [0, n] with s/n <= eps under float comparison."""
        s = min(self.n, max(0, math.floor(eps * self.n)))
        while s + 1 <= self.n and (s + 1) / self.n <= eps:
            s += 1
        while s > 0 and s / self.n > eps:
            s -= 1
        return s

    def max_additive_error(self, sample: Sample) -> float:
        u = self._u_values(sample)
        return float(int(u.max()) - int(u.min())) / (self.n * sample.t)

    def is_eps_net(self, sample: Sample, eps) -> bool:
        """No empty interval of size >= eps n exists."""
        counts = sample.counts_array()
        s_min = math.ceil(eps * self.n)
        longest = 0
        run = 0
        for c in counts:
            run = run + 1 if c == 0 else 0
            longest = max(longest, run)
        return longest < s_min


def _trailing_min(arr: np.ndarray, w: int) -> np.ndarray:
    """out[i] = min(arr[max(0, i-w+1) .. i]), O(len) via the two-block trick."""
    k = len(arr)
    if w >= k:
        return np.minimum.accumulate(arr)
    pad = (-k) % w
    padded = np.concatenate((arr, np.full(pad, _INT64_MAX, dtype=arr.dtype)))
    blocks = padded.reshape(-1, w)
    pre = np.minimum.accumulate(blocks, axis=1).ravel()[:k]
    suf = np.minimum.accumulate(blocks[:, ::-1], axis=1)[:, ::-1].ravel()
    out = pre.copy()
    idx = np.arange(w - 1, k)
    out[idx] = np.minimum(pre[idx], suf[idx - w + 1])
    return out


def _window_max_diff(u: np.ndarray, w: int) -> tuple[int, int, int] | None:
    """max of u[b] - u[a] over 1 <= b - a <= w; returns (diff, a, b)."""
    k = len(u)
    if k < 2:
        return None
    tm = _trailing_min(u[:-1], w)
    diffs = u[1:] - tm
    b = int(np.argmax(diffs)) + 1
    lo = max(0, b - w)
    a = lo + int(np.argmin(u[lo:b]))
    return int(diffs[b - 1]), a, b


def _window_max_abs_diff(u: np.ndarray, w: int) -> tuple[int, int] | None:
    pos = _window_max_diff(u, w)
    neg = _window_max_diff(-u, w)
    if pos is None:
        return None
    if neg[0] > pos[0]:
        return neg[1], neg[2]
    return pos[1], pos[2]


def _max_slope_bruteforce(u: np.ndarray, min_gap: int) -> tuple[int, int] | None:
    # the optimum over gaps >= L is attained at some gap in [L, 2L): a longer
    # segment splits into two of at least L whose slopes bracket it
    k = len(u)
    if min_gap >= k:
        return None
    best = None  # (du, dx, a, b) maximizing du/dx, exact integer comparisons
    for gap in range(min_gap, min(2 * min_gap, k)):
        diffs = u[gap:] - u[:-gap]
        a = int(np.argmax(diffs))
        du = int(diffs[a])
        if best is None or du * best[1] > best[0] * gap:
            best = (du, gap, a, a + gap)
    return (best[2], best[3]) if best else None


def _max_slope_bisect(u: np.ndarray, min_gap: int) -> tuple[int, int] | None:
    """argmax of (u[b] - u[a]) / (b - a) over b - a >= min_gap, via parametric
    search; the recovered pair's slope is exact, within float resolution of
    the true optimum."""
    k = len(u)
    if min_gap >= k:
        return None
    x = np.arange(k, dtype=np.float64)
    uf = u.astype(np.float64)

    def best_pair_at(lam: float) -> tuple[int, int]:
        w = uf - lam * x
        pre = np.minimum.accumulate(w)[: k - min_gap]
        margins = w[min_gap:] - pre
        b = int(np.argmax(margins)) + min_gap
        a = int(np.argmin(w[: b - min_gap + 1]))
        return a, b

    lo, hi = 0.0, (float(u.max() - u.min())) / min_gap + 1.0
    best: tuple[int, int, int, int] | None = None  # (du, dx, a, b)
    for _ in range(60):
        lam = (lo + hi) / 2
        a, b = best_pair_at(lam)
        du, dx = int(u[b] - u[a]), b - a
        if best is None or du * best[1] > best[0] * dx:
            best = (du, dx, a, b)
        if du > lam * dx:
            lo = lam
        else:
            hi = lam
    return best[2], best[3]


def _max_slope_at_least(u: np.ndarray, min_gap: int) -> tuple[int, int] | None:
    if len(u) <= 1500:
        return _max_slope_bruteforce(u, min_gap)
    return _max_slope_bisect(u, min_gap)


def _max_abs_slope_at_least(u: np.ndarray, min_gap: int) -> tuple[int, int] | None:
    pos = _max_slope_at_least(u, min_gap)
    if pos is None:
        return None
    neg = _max_slope_at_least(-u, min_gap)
    pa, pb = pos
    na, nb = neg
    dup, dxp = int(u[pb] - u[pa]), pb - pa
    dun, dxn = int(u[na] - u[nb]), nb - na
    if dun * dxp > dup * dxn:
        return neg
    return pos


def intervals(n: int) -> SetSystem:
    """All intervals {i..j} on n points plus the empty set; VC dimension 2."""
    return ImplicitIntervals(n).materialize()


# --- geometric ranges --------------------------------------------------------


@dataclass(frozen=True)
class PointSet2D:
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.points:
            raise ConstructionError("point set must be nonempty")

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def has_duplicates(self) -> bool:
        return len(set(self.points)) != len(self.points)


def random_points(m: int, seed: int, box: int = 10**6) -> PointSet2D:
    """m distinct lattice points in [0, box)^2; lattice coords keep the
    halfplane sweep exact."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    seen: set[tuple[int, int]] = set()
    pts = []
    while len(pts) < m:
        x, y = (int(v) for v in rng.integers(0, box, size=2))
        if (x, y) not in seen:
            seen.add((x, y))
            pts.append((float(x), float(y)))
    return PointSet2D(tuple(pts))


def _integer_coords(pts: PointSet2D) -> list[tuple[int, int]]:
    fracs = [(Fraction(x), Fraction(y)) for x, y in pts.points]
    denom = 1
    for fx, fy in fracs:
        denom = denom * fx.denominator // math.gcd(denom, fx.denominator)
        denom = denom * fy.denominator // math.gcd(denom, fy.denominator)
    return [(int(fx * denom), int(fy * denom)) for fx, fy in fracs]


def halfplanes(pts: PointSet2D) -> SetSystem:
    """Distinct traces of closed halfplanes on the points; VC dimension <= 3.

    A trace is realizable iff it is strictly linearly separable from its
    complement, so it survives an infinitesimal rotation.  It therefore
    appears as a prefix of the projection order just after some critical
    direction (one perpendicular to a pair difference); ties in the primary
    projection break by the perpendicular key, which realizes that
    infinitesimal rotation exactly.
    """
    coords = _integer_coords(pts)
    m = len(coords)
    full = (1 << m) - 1
    traces = {0, full}
    directions: set[tuple[int, int]] = set()
    for i in range(m):
        xi, yi = coords[i]
        for j in range(m):
            if i == j:
                continue
            dx, dy = coords[j][0] - xi, coords[j][1] - yi
            if dx == 0 and dy == 0:
                continue
            for vx, vy in ((-dy, dx), (dy, -dx)):
                g = math.gcd(abs(vx), abs(vy))
                directions.add((vx // g, vy // g))
    for vx, vy in directions:
        wx, wy = -vy, vx  # CCW perpendicular: the tie-break key
        keyed = sorted(
            ((vx * coords[k][0] + vy * coords[k][1],
              wx * coords[k][0] + wy * coords[k][1]), k)
            for k in range(m)
        )
        mask = 0
        for (key, k), (nxt_key, _) in zip(keyed, keyed[1:]):
            mask |= 1 << k
            if key != nxt_key:  # equal keys = duplicate points; never split them
                traces.add(mask)
    return SetSystem.from_masks(m, sorted(traces))


def axis_rectangles(pts: PointSet2D) -> SetSystem:
    """Distinct traces of closed axis-aligned rectangles; VC dimension <= 4."""
    xs = sorted({x for x, _ in pts.points})
    ys = sorted({y for _, y in pts.points})
    px = np.array([x for x, _ in pts.points])
    py = np.array([y for _, y in pts.points])
    x_masks = set()
    for i, x1 in enumerate(xs):
        for x2 in xs[i:]:
            x_masks.add(_mask_of((px >= x1) & (px <= x2)))
    y_masks = set()
    for i, y1 in enumerate(ys):
        for y2 in ys[i:]:
            y_masks.add(_mask_of((py >= y1) & (py <= y2)))
    traces = {0}
    for xm in x_masks:
        for ym in y_masks:
            traces.add(xm & ym)
    return SetSystem.from_masks(len(pts), sorted(traces))


def _mask_of(flags: np.ndarray) -> int:
    mask = 0
    for k in np.flatnonzero(flags):
        mask |= 1 << int(k)
    return mask


# --- random and exhaustive families ------------------------------------------


def random_system(n: int, m: int, p: float, seed: int) -> SetSystem:
    """m independent Bernoulli(p) subsets of [0, n), deduplicated."""
    if not 0 <= p <= 1:
        raise ConstructionError(f"need 0 <= p <= 1, got {p}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    masks = []
    for _ in range(m):
        row = rng.random(n) < p
        masks.append(_mask_of(row))
    return SetSystem.from_masks(n, masks)


def power_set(n: int) -> SetSystem:
    """All 2^n subsets of [0, n); VC dimension n.  Guarded at n <= 20."""
    if n > 20:
        raise ConstructionError(f"power set of [{n}] is too large (guard: n <= 20)")
    return SetSystem(n, tuple(range(1 << n)))
