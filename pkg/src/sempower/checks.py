"""Self-check suites run by ``sempower validate``.

Each suite compares a closed form with an independent computation and
reports the largest residual it saw.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from . import info_theory as it
from . import link
from .config import Config
from .perception import Scheme, invert_semantic_value, semantic_value_received
from .simkit import ExperimentSpec, Scenario, rng_stream, run_link_validate

SUITE_SEED = 7


class SuiteResult(NamedTuple):
    name: str
    passed: bool
    max_residual: float
    detail: str


def _suite_info_theory(cfg: Config) -> SuiteResult:
    rng = rng_stream(SUITE_SEED, 0)
    worst = 0.0
    for psi in np.linspace(0.0, 0.5, 51):
        k = 100
        lemma = it.mi_uncoded_lemma2(it.BernoulliStream([0.5] * k), float(psi))
        worst = max(worst, abs(lemma - k * it.mi_bsc_exact(0.5, float(psi))))
        phi = float(rng.uniform())
        worst = max(worst, abs(it.mi_joint(it.bsc_joint(phi, float(psi))) - it.mi_bsc_exact(phi, float(psi))))
    dpi_ok = True
    for _ in range(200):
        nx, ny, nz = rng.integers(2, 6, size=3)
        src = rng.dirichlet(np.ones(nx))
        a = rng.dirichlet(np.ones(ny), size=nx)
        b = rng.dirichlet(np.ones(nz), size=ny)
        dpi_ok &= it.dpi_check(src, a, b).holds
    ok = worst <= 1e-12 and dpi_ok
    return SuiteResult("info_theory", ok, worst, "stream MI vs BSC, pmf vs closed form, 200 DPI chains")


def _suite_link(cfg: Config) -> SuiteResult:
    worst = 0.0
    for psi in np.geomspace(1e-12, 0.49, 60):
        s = link.snr_from_ber(float(psi))
        worst = max(worst, abs(link.ber_bpsk(s) - psi) / psi)
    for st in cfg.model().streams:
        for target in np.geomspace(1e-9, 0.99, 40):
            s = link.snr_from_bler(float(target), st.bits, st.codeword)
            worst = max(worst, abs(link.bler_fbl(s, st.bits, st.codeword) - target) / target)
    return SuiteResult("link", worst <= 1e-9, worst, "BER and BLER inversions round-trip")


def _suite_lambertw(cfg: Config) -> SuiteResult:
    rng = rng_stream(SUITE_SEED, 1)
    worst = 0.0
    for _ in range(100):
        target = float(10 ** rng.uniform(-6, math.log10(0.49)))
        rate = float(rng.choice([0.5, 0.8, 0.95]))
        n = int(rng.integers(100, 2001))
        k = max(1, round(rate * n))
        direct = link.snr_from_bler(target, k, n)
        closed = link.power_coded_closed_form(target, k, n, 1.0, 1.0)
        worst = max(worst, abs(closed - direct) / direct)
    return SuiteResult("lambertw", worst <= 1e-6, worst, "closed form vs direct inversion, 100 draws")


def _suite_perception(cfg: Config) -> SuiteResult:
    worst = 0.0
    for scheme in Scheme:
        for metric in cfg.doc["presets"]:
            model = cfg.model(scheme, metric)
            worst = max(worst, abs(model.evaluate([0.0] * model.n) - model.p_best))
            corner = model.preset.p_worst_uncoded if scheme is Scheme.UNCODED_FORWARD else 1.0
            worst = max(worst, abs(model.worst() - corner))
            for i, s in enumerate(model.streams):
                lo = 1.0 - model.stream_worst(i)
                for frac in np.linspace(0.05, 0.95, 19):
                    target = lo + float(frac) * (s.semantic_value - lo)
                    e = invert_semantic_value(model, i, target)
                    worst = max(worst, abs(semantic_value_received(model, i, e) - target))
    return SuiteResult("perception", worst <= 1e-10, worst, "corner values and semantic-value inverses")


def _suite_link_validate(cfg: Config) -> SuiteResult:
    spec = ExperimentSpec("validate", "LinkValidate", n_realizations=1, seed=SUITE_SEED)
    scenario = Scenario(cfg.model(Scheme.CODED_DISCARD), cfg.channel)
    table = run_link_validate(spec, scenario)
    sigmas = [abs(r[3] - r[2]) / r[4] for r in table.rows if r[4] > 0]
    failed = [f"{r[0]}@{r[1]:g}" for r in table.rows if not r[6]]
    detail = "failed: " + ", ".join(failed) if failed else "simulated bits agree with analytic rates"
    return SuiteResult("link_validate", not failed, max(sigmas, default=0.0), detail)


SUITES: dict[str, Callable[[Config], SuiteResult]] = {
    "info_theory": _suite_info_theory,
    "link": _suite_link,
    "lambertw": _suite_lambertw,
    "perception": _suite_perception,
    "link_validate": _suite_link_validate,
}


def run_suites(cfg: Config, names=None) -> list[SuiteResult]:
    names = list(SUITES) if names is None else names
    return [SUITES[n](cfg) for n in names]
