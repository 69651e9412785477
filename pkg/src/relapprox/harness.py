"""Monte Carlo harness: failure-rate estimation, size search, calibration.

Every trial's seed is derived from (master_seed, cell index, trial index),
so results are independent of worker count and execution order; aggregation
is a deterministic fold over trial indices.  Failure rates carry Wilson
score intervals, which stay honest at zero or few failures.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

from . import generators
from .chaining import build_chain, claim7_check
from .errors import CalibrationError, ConstructionError
from .packing import greedy_maximal_packing
from .sampling import (
    WITH,
    WITHOUT,
    ApproxParams,
    Constants,
    Sample,
    basic_sample_size,
    chaining_sample_size,
    halving_sample_size,
    main_sample_size,
    relative_error,
    seed_sequence,
    uniform_sample,
)
from .set_system import SetSystem, read_json

CALIBRATION_GRID = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0)


def wilson_interval(failures: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if trials < 1 or not 0 <= failures <= trials:
        raise ConstructionError(f"bad counts {(failures, trials)}")
    p = failures / trials
    z2 = z * z
    denom = 1 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    lo = 0.0 if failures == 0 else max(0.0, center - half)
    hi = 1.0 if failures == trials else min(1.0, center + half)
    return lo, hi


def wilson_width(failures: int, trials: int) -> float:
    lo, hi = wilson_interval(failures, trials)
    return hi - lo


@dataclass(frozen=True)
class CellResult:
    eps: float
    delta: float
    gamma: float
    t: int
    trials: int
    failures: int
    seed: int

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials

    @property
    def wilson(self) -> tuple[float, float]:
        return wilson_interval(self.failures, self.trials)


def _run_trials(trial_fn: Callable[[int], object], trials: int, workers: int) -> list:
    """Evaluate trial_fn on 0..trials-1, results in trial order regardless of
    scheduling (per-trial seeds are pre-assigned, so order cannot matter)."""
    if workers <= 1:
        return [trial_fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(trial_fn, range(trials)))


@dataclass(frozen=True)
class TrialRow:
    trial: int
    t: int
    failed: bool
    worst_ratio: float


def monte_carlo_rows(
    system,
    params: ApproxParams,
    t: int,
    trials: int,
    master_seed: int,
    mode: str = WITHOUT,
    workers: int = 1,
    cell_index: int = 0,
) -> list[TrialRow]:
    """Per-trial outcomes; reproducible from (master_seed, cell_index, trial)."""
    if mode == WITHOUT and t > system.n:
        raise ConstructionError(
            f"t={t} exceeds n={system.n}; cap the size or use with-replacement mode"
        )
    if trials < 1:
        raise ConstructionError("trials must be >= 1")

    def one_trial(i: int) -> TrialRow:
        sample = uniform_sample(
            system.n, t, seed_sequence(master_seed, cell_index, i), mode=mode
        )
        report = relative_error(system, sample, params.eps)
        return TrialRow(i, t, not report.passes(params.delta), float(report.worst_ratio))

    return _run_trials(one_trial, trials, workers)


def monte_carlo_failure(
    system,
    params: ApproxParams,
    t: int,
    trials: int,
    master_seed: int,
    mode: str = WITHOUT,
    workers: int = 1,
    cell_index: int = 0,
) -> CellResult:
    """Estimate the probability that a uniform t-sample fails to be a
    relative (eps, delta)-approximation.  The aggregate equals a fold over
    monte_carlo_rows with the same seeds."""
    rows = monte_carlo_rows(
        system, params, t, trials, master_seed, mode=mode, workers=workers,
        cell_index=cell_index,
    )
    failures = sum(r.failed for r in rows)
    return CellResult(
        params.eps, params.delta, params.gamma, t, trials, failures, master_seed
    )


def minimal_sample_size_search(
    system,
    params: ApproxParams,
    trials: int,
    master_seed: int,
    mode: str = WITHOUT,
    workers: int = 1,
) -> int:
    """Smallest t in [1, n] whose empirical failure rate is <= gamma.

    Per-trial seeds are shared across candidate t values, so the sweep is
    monotone up to sampling noise; acceptance is by point estimate, with the
    Wilson interval available from a follow-up monte_carlo_failure call.
    """

    def rate(t: int) -> float:
        def one_trial(i: int) -> bool:
            sample = uniform_sample(system.n, t, seed_sequence(master_seed, i), mode=mode)
            return not relative_error(system, sample, params.eps).passes(params.delta)

        fails = _run_trials(one_trial, trials, workers)
        return sum(fails) / trials

    lo, hi = 1, system.n
    if rate(hi) > params.gamma:
        raise CalibrationError(f"even t = n = {system.n} fails the gamma target")
    while lo < hi:
        mid = (lo + hi) // 2
        if rate(mid) <= params.gamma:
            hi = mid
        else:
            lo = mid + 1
    return lo


# --- experiment sweeps --------------------------------------------------------


def system_from_descriptor(desc: dict):
    """Build a system from a JSON-able descriptor (generator or file path)."""
    if "path" in desc:
        return read_json(desc["path"]).system
    family = desc.get("family")
    if family == "intervals":
        return generators.intervals(desc["n"])
    if family == "implicit_intervals":
        return generators.ImplicitIntervals(desc["n"])
    if family == "power_set":
        return generators.power_set(desc["n"])
    if family == "random":
        return generators.random_system(desc["n"], desc["m"], desc["p"], desc.get("seed", 0))
    if family == "halfplanes":
        return generators.halfplanes(generators.random_points(desc["points"], desc.get("seed", 0)))
    if family == "rectangles":
        return generators.axis_rectangles(
            generators.random_points(desc["points"], desc.get("seed", 0))
        )
    raise ConstructionError(f"unknown system descriptor {desc!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    system: dict
    eps: tuple[float, ...]
    delta: tuple[float, ...]
    gamma: tuple[float, ...]
    trials: int
    master_seed: int
    t_values: tuple[int, ...] = ()
    formula: str | None = None  # basic | main | halving | chaining
    d: int | None = None
    replacement_mode: str = WITHOUT
    workers: int = 1
    constants_path: str | None = None

    def __post_init__(self):
        if not (self.eps and self.delta and self.gamma):
            raise ConstructionError("parameter grids must be nonempty")
        if self.trials < 1:
            raise ConstructionError("trials must be >= 1")
        if bool(self.t_values) == (self.formula is not None):
            raise ConstructionError("give exactly one of t_values or formula")

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(
            system=doc["system"],
            eps=tuple(doc["eps"]),
            delta=tuple(doc["delta"]),
            gamma=tuple(doc["gamma"]),
            trials=doc["trials"],
            master_seed=doc["master_seed"],
            t_values=tuple(doc.get("t", ())),
            formula=doc.get("formula"),
            d=doc.get("d"),
            replacement_mode=doc.get("replacement_mode", WITHOUT),
            workers=doc.get("workers", 1),
            constants_path=doc.get("constants"),
        )


def run_sweep(spec: ExperimentSpec) -> list[CellResult]:
    from .sampling import find_constants

    system = system_from_descriptor(spec.system)
    constants = find_constants(spec.constants_path)
    rows = []
    cell_index = 0
    for eps in spec.eps:
        for delta in spec.delta:
            for gamma in spec.gamma:
                params = ApproxParams(eps, delta, gamma)
                for t in _cell_sizes(spec, params, system, constants):
                    rows.append(
                        monte_carlo_failure(
                            system,
                            params,
                            t,
                            spec.trials,
                            spec.master_seed,
                            mode=spec.replacement_mode,
                            workers=spec.workers,
                            cell_index=cell_index,
                        )
                    )
                    cell_index += 1
    return rows


def _cell_sizes(spec, params, system, constants) -> list[int]:
    if spec.t_values:
        return list(spec.t_values)
    if spec.formula == "basic":
        t = basic_sample_size(params, len(system))
    elif spec.formula == "main":
        t = main_sample_size(params, _need_d(spec), constants)
    elif spec.formula == "halving":
        t = halving_sample_size(params, _need_d(spec), constants)
    elif spec.formula == "chaining":
        t = chaining_sample_size(params, _need_d(spec), len(system), constants)
    else:
        raise ConstructionError(f"unknown formula {spec.formula!r}")
    if spec.replacement_mode == WITHOUT:
        t = min(t, system.n)
    return [t]


def _need_d(spec) -> int:
    if spec.d is None:
        raise ConstructionError(f"formula {spec.formula!r} needs the dimension d")
    return spec.d


CSV_COLUMNS = [
    "eps",
    "delta",
    "gamma",
    "t",
    "trials",
    "failures",
    "failure_rate",
    "wilson_lo",
    "wilson_hi",
    "seed",
]


def write_sweep_csv(rows: list[CellResult], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            lo, hi = r.wilson
            writer.writerow(
                [
                    repr(r.eps),
                    repr(r.delta),
                    repr(r.gamma),
                    r.t,
                    r.trials,
                    r.failures,
                    repr(r.failure_rate),
                    repr(lo),
                    repr(hi),
                    r.seed,
                ]
            )


# --- constant calibration -------------------------------------------------------


@dataclass(frozen=True)
class CalibrationCase:
    name: str
    system_desc: dict
    params: ApproxParams
    d: int
    use_for: tuple[str, ...] = ("c", "c1")  # subset of {"c", "c1", "c2", "c3"}

    def descriptor(self) -> dict:
        return {
            "name": self.name,
            "system": self.system_desc,
            "eps": self.params.eps,
            "delta": self.params.delta,
            "gamma": self.params.gamma,
            "d": self.d,
            "use_for": list(self.use_for),
        }


@dataclass
class _CaseRuntime:
    case: CalibrationCase
    system: object = None
    chain: object = None

    def get_system(self):
        if self.system is None:
            self.system = system_from_descriptor(self.case.system_desc)
        return self.system

    def get_chain(self):
        if self.chain is None:
            sys_ = self.get_system()
            self.chain = build_chain(sys_, self.case.params.eps, self.case.params.delta)
        return self.chain


def load_suite(path) -> tuple[list[CalibrationCase], int, int]:
    with open(path) as fh:
        doc = json.load(fh)
    cases = [
        CalibrationCase(
            name=c["name"],
            system_desc=c["system"],
            params=ApproxParams(c["eps"], c["delta"], c["gamma"]),
            d=c["d"],
            use_for=tuple(c.get("use_for", ("c", "c1"))),
        )
        for c in doc["cases"]
    ]
    return cases, doc["trials"], doc["master_seed"]


def suite_sha256(cases: list[CalibrationCase], trials: int, master_seed: int) -> str:
    doc = {
        "cases": [c.descriptor() for c in cases],
        "trials": trials,
        "master_seed": master_seed,
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def calibrate_constants(
    cases: list[CalibrationCase],
    trials: int,
    master_seed: int,
    grid: tuple[float, ...] = CALIBRATION_GRID,
    workers: int = 1,
) -> tuple[Constants, dict]:
    """Smallest grid values making each size formula meet its gamma target
    across the suite (c2 against the simultaneous chain check, the strictest
    downstream use), and c3 covering every observed greedy packing size."""
    runtimes = {c.name: _CaseRuntime(c) for c in cases}

    def formula_rate(case: CalibrationCase, t: int, cell: int) -> float:
        system = runtimes[case.name].get_system()
        t = min(t, system.n)
        res = monte_carlo_failure(
            system, case.params, t, trials, master_seed, workers=workers, cell_index=cell
        )
        return res.failure_rate

    def chain_rate(case: CalibrationCase, t: int, cell: int) -> float:
        system = runtimes[case.name].get_system()
        chain = runtimes[case.name].get_chain()
        t = min(t, system.n)

        def one_trial(i: int) -> bool:
            sample = uniform_sample(system.n, t, seed_sequence(master_seed, cell, i))
            return not claim7_check(chain, sample).ok

        fails = _run_trials(one_trial, trials, workers)
        return sum(fails) / trials

    def smallest_passing(kind: str, size_fn, rate_fn) -> float:
        relevant = [c for c in cases if kind in c.use_for]
        if not relevant:
            raise CalibrationError(f"no calibration cases for {kind}")
        failures_log = []
        for value in grid:
            ok = True
            for ci, case in enumerate(relevant):
                t = size_fn(case, value)
                rate = rate_fn(case, t, _cell_id(kind, ci, value))
                if rate > case.params.gamma:
                    ok = False
                    failures_log.append((kind, value, case.name, rate))
                    break
            if ok:
                return value
        raise CalibrationError(f"no grid value satisfied {kind}: {failures_log}")

    trial_consts = {v: Constants(c=v, c1=v, c2=v, c3=v) for v in grid}
    c = smallest_passing(
        "c",
        lambda case, v: main_sample_size(case.params, case.d, trial_consts[v]),
        formula_rate,
    )
    c1 = smallest_passing(
        "c1",
        lambda case, v: halving_sample_size(case.params, case.d, trial_consts[v]),
        formula_rate,
    )
    c2 = smallest_passing(
        "c2",
        lambda case, v: chaining_sample_size(
            case.params, case.d, len(runtimes[case.name].get_system()), trial_consts[v]
        ),
        chain_rate,
    )

    # c3: every observed greedy packing must satisfy |P| <= (c3 n / alpha)^(2d)
    c3_floor = 1.0
    observed = 0
    for case in cases:
        if "c3" not in case.use_for and "c2" not in case.use_for:
            continue
        system = runtimes[case.name].get_system()
        packings = (
            [(lv.alpha, lv.packing) for lv in runtimes[case.name].get_chain().levels]
            if "c2" in case.use_for
            else [
                (a, greedy_maximal_packing(system, a))
                for a in _c3_alphas(case.params.eps, system.n)
            ]
        )
        for alpha, packing in packings:
            if packing.size == 0:
                continue
            observed += 1
            needed = alpha * packing.size ** (1.0 / (2 * case.d)) / system.n
            c3_floor = max(c3_floor, needed)
    if observed == 0:
        raise CalibrationError("no packings observed for c3 calibration")
    c3 = next((v for v in grid if v >= c3_floor), None)
    if c3 is None:
        raise CalibrationError(f"no grid value covers c3 floor {c3_floor:.3f}")

    constants = Constants(c=c, c1=c1, c2=c2, c3=c3)
    provenance = {
        "suite_sha256": suite_sha256(cases, trials, master_seed),
        "master_seed": master_seed,
        "trials": trials,
        "grid": list(grid),
        "cases": [case.descriptor() for case in cases],
        "c3_floor": c3_floor,
    }
    return constants, provenance


def _c3_alphas(eps: float, n: int) -> list[float]:
    return [max(2.0, eps * n / 2.0**i) for i in range(4)]


def _cell_id(kind: str, case_index: int, grid_value: float) -> int:
    # distinct deterministic cell index per (kind, case, grid value)
    base = {"c": 1, "c1": 2, "c2": 3}[kind]
    return base * 1_000_000 + case_index * 1_000 + int(round(grid_value * 10))


def write_constants_json(constants: Constants, provenance: dict, path) -> None:
    doc = {
        "c": constants.c,
        "c1": constants.c1,
        "c2": constants.c2,
        "c3": constants.c3,
        "calibrated": True,
        "provenance": provenance,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
