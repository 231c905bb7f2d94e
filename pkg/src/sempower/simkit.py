"""Monte Carlo experiments over Rayleigh block-fading realizations.

Every realization draws its channel from an independent counter-based
random stream keyed by ``(seed, realization index)``, so results do not
depend on execution order or on how many worker processes run them. Channel
draws are shared by all methods and all perception targets of a
realization, which makes method comparisons paired.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import alloc
from .alloc import METHODS, AllocationProblem, AllocationResult
from .errors import InfeasibleError
from .info_theory import JointPmf, mi_bsc_exact, mi_joint
from .link import ChannelParams, ChannelRealization, ber_bpsk, draw_realization, snr_from_ber
from .perception import Metric, PerceptionModel, Scheme, perception_discard

KINDS = ("PowerVsPbar", "PerBitPower", "ErrorAndCapacity", "PerceptionCdf", "LinkValidate")
CDF_QUANTILES = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    kind: str
    scheme: Scheme = Scheme.CODED_DISCARD
    metric: Metric = Metric.CLIP
    p_bar_grid: tuple[float, ...] = ()
    power_budget_grid: tuple[float, ...] = ()
    n_realizations: int = 1000
    seed: int = 0
    methods: tuple[str, ...] = METHODS
    psi_grid: tuple[float, ...] = (0.001, 0.01, 0.1)
    n_blocks: int = 100_000
    block_bits: int = 100

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "metric", Metric(self.metric))
        for name in ("p_bar_grid", "power_budget_grid", "methods", "psi_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.kind not in KINDS:
            raise ValueError(f"{self.name}: unknown experiment kind {self.kind!r}")
        if self.n_realizations < 1:
            raise ValueError(f"{self.name}: n_realizations must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"{self.name}: seed must be an unsigned 64-bit integer")
        for grid_name in ("p_bar_grid", "power_budget_grid", "psi_grid"):
            grid = getattr(self, grid_name)
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{self.name}: {grid_name} must be strictly increasing")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ValueError(f"{self.name}: methods must be a non-empty subset of {METHODS}")
        if self.kind in ("PowerVsPbar", "PerBitPower", "ErrorAndCapacity") and not self.p_bar_grid:
            raise ValueError(f"{self.name}: {self.kind} needs p_bar_grid")
        if self.kind == "PerBitPower" and self.scheme is not Scheme.CODED_DISCARD:
            raise ValueError(f"{self.name}: PerBitPower needs the coded scheme")
        if self.kind == "PerceptionCdf" and not self.power_budget_grid:
            raise ValueError(f"{self.name}: PerceptionCdf needs power_budget_grid")
        if self.kind == "LinkValidate":
            if self.n_blocks < 1 or self.block_bits < 1:
                raise ValueError(f"{self.name}: n_blocks and block_bits must be positive")
            if any(not 0.0 <= p <= 0.5 for p in self.psi_grid):
                raise ValueError(f"{self.name}: psi_grid values must lie in [0, 0.5]")


@dataclass(frozen=True)
class Scenario:
    model: PerceptionModel
    channel: ChannelParams


@dataclass
class RunRecord:
    index: int
    p_bar: float
    gain_sq: tuple[float, ...]
    results: dict[str, AllocationResult | None] = field(default_factory=dict)

    @property
    def capacities(self) -> dict[str, tuple[float, ...]]:
        return {m: r.capacities for m, r in self.results.items() if r is not None}


class Table(NamedTuple):
    header: tuple[str, ...]
    rows: list[tuple]


POWER_VS_PBAR_HEADER = ("pbar", "method", "mean_total_power_w", "stderr_w", "n_feasible")
PER_BIT_HEADER = ("pbar", "method", "stream", "mean_power_per_bit_w", "zero_power_fraction", "n_feasible")
ERROR_CAPACITY_HEADER = ("pbar", "method", "stream", "mean_error", "mean_capacity_bits", "n_feasible")
CDF_HEADER = ("budget_w", "method", "quantile", "perception")
LINK_HEADER = ("check", "psi", "expected", "empirical", "stderr", "n_sigma", "passed")


def rng_stream(seed: int, realization_index: int) -> np.random.Generator:
    """Independent Philox stream for one realization."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(realization_index,))
    return np.random.Generator(np.random.Philox(ss))


def _realization(scenario: Scenario, seed: int, index: int) -> ChannelRealization:
    return draw_realization(scenario.channel, scenario.model.n, rng_stream(seed, index))


def _allocate_or_none(problem: AllocationProblem, method: str) -> AllocationResult | None:
    try:
        res = alloc.allocate(problem, method)
    except InfeasibleError:
        return None
    return None if res.near_infeasible else res


def _run_one(args) -> list[RunRecord]:
    scenario, spec, index = args
    real = _realization(scenario, spec.seed, index)
    out = []
    for p_bar in spec.p_bar_grid:
        rec = RunRecord(index, p_bar, real.gain_sq)
        problem = AllocationProblem(scenario.model, real, p_bar)
        for method in spec.methods:
            rec.results[method] = _allocate_or_none(problem, method)
        out.append(rec)
    return out


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def simulate(spec: ExperimentSpec, scenario: Scenario, workers: int = 1) -> list[list[RunRecord]]:
    """Per-realization records, indexed ``[p_bar index][realization index]``."""
    per_real = _map(_run_one, [(scenario, spec, i) for i in range(spec.n_realizations)], workers)
    return [[recs[k] for recs in per_real] for k in range(len(spec.p_bar_grid))]


def mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Mean and standard error; exactly rounded sums keep them order-independent."""
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(values) / n
    if n == 1:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def power_table(spec: ExperimentSpec, records: list[list[RunRecord]]) -> Table:
    rows = []
    for p_bar, recs in zip(spec.p_bar_grid, records):
        for method in spec.methods:
            vals = [r.results[method].total_power for r in recs if r.results[method] is not None]
            mean, se = mean_stderr(vals)
            rows.append((p_bar, method, mean, se, len(vals)))
    return Table(POWER_VS_PBAR_HEADER, rows)


def per_bit_table(spec: ExperimentSpec, scenario: Scenario, records) -> Table:
    model = scenario.model
    rows = []
    for p_bar, recs in zip(spec.p_bar_grid, records):
        for method in spec.methods:
            ok = [r.results[method] for r in recs if r.results[method] is not None]
            for i, s in enumerate(model.streams):
                per_bit = [alloc.symbol_count(model, i) * res.powers[i] / s.bits for res in ok]
                zero = sum(1 for res in ok if res.powers[i] == 0.0)
                mean, _ = mean_stderr(per_bit)
                rows.append((p_bar, method, s.name, mean, zero / len(ok) if ok else math.nan, len(ok)))
    return Table(PER_BIT_HEADER, rows)


def error_capacity_table(spec: ExperimentSpec, scenario: Scenario, records) -> Table:
    rows = []
    for p_bar, recs in zip(spec.p_bar_grid, records):
        for method in spec.methods:
            ok = [r.results[method] for r in recs if r.results[method] is not None]
            for i, s in enumerate(scenario.model.streams):
                err, _ = mean_stderr([res.errors[i] for res in ok])
                cap, _ = mean_stderr([res.capacities[i] for res in ok])
                rows.append((p_bar, method, s.name, err, cap, len(ok)))
    return Table(ERROR_CAPACITY_HEADER, rows)


def run_power_vs_pbar(spec: ExperimentSpec, scenario: Scenario, workers: int = 1) -> Table:
    return power_table(spec, simulate(spec, scenario, workers))


def run_per_bit_power(spec: ExperimentSpec, scenario: Scenario, workers: int = 1) -> Table:
    if scenario.model.scheme is not Scheme.CODED_DISCARD:
        raise ValueError("per-bit power is reported for the coded scheme")
    return per_bit_table(spec, scenario, simulate(spec, scenario, workers))


def run_error_capacity(spec: ExperimentSpec, scenario: Scenario, workers: int = 1) -> Table:
    return error_capacity_table(spec, scenario, simulate(spec, scenario, workers))


# --------------------------------------------------------------------------
# perception reached under a power budget


def achieved_perception(
    model: PerceptionModel,
    real: ChannelRealization,
    method: str,
    budget: float,
    rtol: float = 1e-6,
) -> float:
    """Smallest target distance whose required total power fits ``budget``.

    Required power is non-increasing in the target, so this is a monotone
    search over the target between the best and worst achievable distance.
    """
    lo, hi = model.p_best, model.worst()
    if math.isinf(budget):
        return lo

    def power(p_bar):
        res = _allocate_or_none(AllocationProblem(model, real, p_bar), method)
        return math.inf if res is None else res.total_power

    if power(hi) > budget:
        return hi
    for _ in range(200):
        if hi - lo <= 1e-12:
            break
        mid = 0.5 * (lo + hi)
        q = power(mid)
        if q <= budget:
            hi = mid
            if q >= budget * (1.0 - rtol):
                break
        else:
            lo = mid
    return hi


def _cdf_one(args):
    scenario, spec, index = args
    real = _realization(scenario, spec.seed, index)
    return [
        [achieved_perception(scenario.model, real, m, b) for m in spec.methods]
        for b in spec.power_budget_grid
    ]


def perception_samples(spec: ExperimentSpec, scenario: Scenario, workers: int = 1) -> np.ndarray:
    """Achieved distance, shape ``(budget, method, realization)``."""
    per_real = _map(_cdf_one, [(scenario, spec, i) for i in range(spec.n_realizations)], workers)
    return np.transpose(np.array(per_real, dtype=float), (1, 2, 0))


def run_perception_cdf(spec: ExperimentSpec, scenario: Scenario, workers: int = 1) -> Table:
    samples = perception_samples(spec, scenario, workers)
    rows = []
    for b_idx, budget in enumerate(spec.power_budget_grid):
        for m_idx, method in enumerate(spec.methods):
            qs = np.quantile(samples[b_idx, m_idx], CDF_QUANTILES, method="inverted_cdf")
            rows.extend((budget, method, float(q), float(v)) for q, v in zip(CDF_QUANTILES, qs))
    return Table(CDF_HEADER, rows)


# --------------------------------------------------------------------------
# bit-level validation of the analytic link formulas


class Check(NamedTuple):
    check: str
    psi: float
    expected: float
    empirical: float
    stderr: float
    n_sigma: float
    passed: bool


def _gate(name, psi, expected, empirical, stderr, n_sigma) -> Check:
    if stderr == 0.0:
        ok = empirical == expected or abs(empirical - expected) <= 1e-12
    else:
        ok = abs(empirical - expected) <= n_sigma * stderr
    return Check(name, psi, expected, empirical, stderr, n_sigma, bool(ok))


def _plugin_mi(counts: np.ndarray) -> tuple[float, float]:
    """Plug-in MI (bias-corrected) and its delta-method standard error."""
    n = int(counts.sum())
    p = counts / n
    mi = mi_joint(JointPmf(p))
    px, py = p.sum(axis=1), p.sum(axis=0)
    dens = []
    for i in range(2):
        for j in range(2):
            if p[i, j] > 0:
                dens.append((p[i, j], math.log2(p[i, j] / (px[i] * py[j]))))
    var = math.fsum(w * d * d for w, d in dens) - mi * mi
    floor = 1.0 / (n * math.log(2.0))
    se = max(math.sqrt(max(var, 0.0) / n), floor)
    bias = 1.0 / (2.0 * n * math.log(2.0))
    return mi - bias, se


def _bsc_blocks(rng: np.random.Generator, psi: float, n_blocks: int, k: int, chunk: int = 10_000):
    """Push uniform bit blocks through a BSC; return bit/block error and joint counts."""
    bit_errors = 0
    block_errors = 0
    counts = np.zeros((2, 2), dtype=np.int64)
    done = 0
    while done < n_blocks:
        m = min(chunk, n_blocks - done)
        x = rng.random((m, k)) < 0.5
        flip = rng.random((m, k)) < psi
        y = x ^ flip
        bit_errors += int(flip.sum())
        block_errors += int(flip.any(axis=1).sum())
        for a in (0, 1):
            xa = x == a
            counts[a, 1] += int((xa & y).sum())
            counts[a, 0] += int(xa.sum()) - int((xa & y).sum())
        done += m
    return bit_errors, block_errors, counts


def run_link_validate(spec: ExperimentSpec, scenario: Scenario | None = None) -> Table:
    """Compare simulated bit and block errors with the analytic formulas.

    For each BER ``psi`` in the grid (the BPSK error at SNR
    ``snr_from_ber(psi)``) the simulator checks the empirical BER and block
    error rate (4 standard errors), the plug-in per-bit mutual information
    against the exact BSC value (3 standard errors) and, given a scenario,
    the frequencies of surviving stream subsets at a discard-with-error
    receiver together with the mean distance they imply (4 standard errors).
    """
    rows = []
    m, k = spec.n_blocks, spec.block_bits
    for j, nominal in enumerate(spec.psi_grid):
        rng = rng_stream(spec.seed, j)
        # flip probability of BPSK at the SNR that nominally yields this BER
        psi = ber_bpsk(snr_from_ber(nominal)) if 0.0 < nominal < 0.5 else nominal
        bit_err, blk_err, counts = _bsc_blocks(rng, psi, m, k)
        n_bits = m * k
        ber_se = math.sqrt(psi * (1.0 - psi) / n_bits)
        rows.append(_gate("ber", nominal, psi, bit_err / n_bits, ber_se, 4.0))
        bler = 1.0 - (1.0 - psi) ** k
        rows.append(_gate("bler", nominal, bler, blk_err / m, math.sqrt(bler * (1.0 - bler) / m), 4.0))
        mi_hat, mi_se = _plugin_mi(counts)
        rows.append(_gate("mi", nominal, mi_bsc_exact(0.5, psi), mi_hat, mi_se, 3.0))
        if scenario is not None:
            rows.extend(_discard_checks(rng, scenario.model, nominal, psi, m))
    return Table(LINK_HEADER, [tuple(r) for r in rows])


def _discard_checks(rng, model: PerceptionModel, nominal: float, psi: float, n_blocks: int) -> list[Check]:
    coded = PerceptionModel(Scheme.CODED_DISCARD, model.preset, model.streams)
    blers = [1.0 - (1.0 - psi) ** s.bits for s in coded.streams]
    received = np.zeros(n_blocks, dtype=np.int64)
    for i, s in enumerate(coded.streams):
        ok = rng.binomial(s.bits, psi, size=n_blocks) == 0
        received |= ok.astype(np.int64) << i
    table = np.array(coded.preset.subset_perception)
    out = []
    weights = []
    for mask in range(len(table)):
        w = 1.0
        for i, b in enumerate(blers):
            w *= (1.0 - b) if mask >> i & 1 else b
        weights.append(w)
        freq = float(np.count_nonzero(received == mask)) / n_blocks
        se = math.sqrt(w * (1.0 - w) / n_blocks)
        out.append(_gate(f"subset_{mask:0{coded.n}b}", nominal, w, freq, se, 4.0))
    expected = perception_discard(coded, blers)
    var = math.fsum(w * (t - expected) ** 2 for w, t in zip(weights, table))
    empirical = math.fsum(table[received].tolist()) / n_blocks
    out.append(_gate("discard_perception", nominal, expected, empirical, math.sqrt(var / n_blocks), 4.0))
    return out


def run_experiment(spec: ExperimentSpec, scenario: Scenario, workers: int = 1) -> Table:
    if spec.kind == "PowerVsPbar":
        return run_power_vs_pbar(spec, scenario, workers)
    if spec.kind == "PerBitPower":
        return run_per_bit_power(spec, scenario, workers)
    if spec.kind == "ErrorAndCapacity":
        return run_error_capacity(spec, scenario, workers)
    if spec.kind == "PerceptionCdf":
        return run_perception_cdf(spec, scenario, workers)
    return run_link_validate(spec, scenario)


OUTPUT_FILES = {
    "PowerVsPbar": "power_vs_pbar.csv",
    "PerBitPower": "per_bit_power.csv",
    "ErrorAndCapacity": "error_capacity.csv",
    "PerceptionCdf": "cdf.csv",
    "LinkValidate": "link_validate.csv",
}
