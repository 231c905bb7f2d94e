"""Minimum-power allocation under a joint perception constraint.

Three methods are provided, all of which meet the perception target with
equality (a looser operating point would waste power):

* ``unaware``: one common received SNR for every stream.
* ``proportional``: every stream keeps the same fraction of its semantic
  value; powers follow in closed form (Q^-1 for uncoded streams, the
  generalized Lambert W for coded streams).
* ``bisection``: two-stream search along the constraint curve for a point
  where the directional derivative of total power vanishes.

Total power counts symbols: ``sum K_i q_i`` uncoded, ``sum N_i q_i`` coded.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import link
from ._roots import monotone_root
from .errors import InfeasibleError
from .link import SNR_CAP, ChannelRealization
from .perception import (
    PerceptionModel,
    Scheme,
    invert_semantic_value,
    solve_constraint_curve,
)

METHODS = ("unaware", "proportional", "bisection")
BISECTION_EPS = 1e-6
SCAN_POINTS = 33


@dataclass(frozen=True)
class AllocationProblem:
    model: PerceptionModel
    realization: ChannelRealization
    p_bar: float

    def __post_init__(self):
        if len(self.realization) != self.model.n:
            raise ValueError("realization and model disagree on stream count")
        if not 0.0 <= self.p_bar <= 1.0:
            raise ValueError(f"p_bar must lie in [0, 1], got {self.p_bar!r}")


@dataclass(frozen=True)
class AllocationResult:
    method: str
    powers: tuple[float, ...]
    errors: tuple[float, ...]
    snrs: tuple[float, ...]
    achieved_p: float
    total_power: float
    zero_power: bool = False
    near_infeasible: bool = False

    @property
    def capacities(self) -> tuple[float, ...]:
        return tuple(math.log2(1.0 + s) for s in self.snrs)


class FeasibilityReport(NamedTuple):
    feasible: bool
    zero_power_sufficient: bool
    reachable_range: tuple[float, float]
    message: str


class Gradient(NamedTuple):
    partials: tuple[float, ...]
    boundary: bool


# --------------------------------------------------------------------------
# per-stream cost of an operating error


def symbol_count(model: PerceptionModel, i: int) -> int:
    s = model.streams[i]
    return s.bits if model.scheme is Scheme.UNCODED_FORWARD else s.codeword


def required_snr(model: PerceptionModel, i: int, error: float) -> float:
    """Received SNR at which stream ``i`` runs at ``error``; ``inf`` at zero."""
    if error <= 0.0:
        return math.inf
    if model.scheme is Scheme.UNCODED_FORWARD:
        return link.snr_from_ber(min(error, 0.5))
    if error >= 1.0:
        return 0.0
    s = model.streams[i]
    return link.snr_from_bler(error, s.bits, s.codeword)


def required_snr_slope(model: PerceptionModel, i: int, error: float, snr=None) -> float:
    if model.scheme is Scheme.UNCODED_FORWARD:
        return link.dsnr_dber(error)
    s = model.streams[i]
    return link.dsnr_dbler(error, s.bits, s.codeword, snr)


def _error_at_snr(model: PerceptionModel, i: int, snr: float) -> float:
    if model.scheme is Scheme.UNCODED_FORWARD:
        return link.ber_bpsk(snr)
    s = model.streams[i]
    return link.bler_fbl(snr, s.bits, s.codeword)


def _min_snr(model: PerceptionModel, i: int) -> float:
    return required_snr(model, i, model.max_error)


def _weights(problem: AllocationProblem) -> list[float]:
    m, r = problem.model, problem.realization
    return [symbol_count(m, i) * r.noise_to_gain(i) for i in range(m.n)]


def _finish(problem: AllocationProblem, method: str, snrs: Sequence[float]) -> AllocationResult:
    m, r = problem.model, problem.realization
    near = False
    capped = []
    for s in snrs:
        if s >= SNR_CAP:
            near = True
            s = SNR_CAP
        capped.append(float(s))
    powers = tuple(s * r.noise_to_gain(i) for i, s in enumerate(capped))
    errors = tuple(_error_at_snr(m, i, s) for i, s in enumerate(capped))
    total = math.fsum(symbol_count(m, i) * q for i, q in enumerate(powers))
    return AllocationResult(
        method=method,
        powers=powers,
        errors=errors,
        snrs=tuple(capped),
        achieved_p=m.evaluate(errors),
        total_power=total,
        zero_power=all(q == 0.0 for q in powers),
        near_infeasible=near,
    )


# --------------------------------------------------------------------------
# feasibility


def feasibility_report(problem: AllocationProblem) -> FeasibilityReport:
    m, p_bar = problem.model, problem.p_bar
    lo, hi = m.p_best, m.worst()
    if p_bar < lo:
        return FeasibilityReport(
            False, False, (lo, hi),
            f"infeasible: target {p_bar:.9g} is below the best achievable distance {lo:.9g}",
        )
    if p_bar >= hi:
        zero = all(_min_snr(m, i) == 0.0 for i in range(m.n))
        what = "zero power" if zero else "the largest admissible error"
        return FeasibilityReport(
            True, zero, (lo, hi),
            f"target {p_bar:.9g} is met at {what} (worst case {hi:.9g})",
        )
    return FeasibilityReport(True, False, (lo, hi), f"feasible: {lo:.9g} <= {p_bar:.9g} < {hi:.9g}")


def _screen(problem: AllocationProblem, method: str) -> AllocationResult | None:
    """Handle the infeasible and trivially-satisfied cases shared by all methods."""
    rep = feasibility_report(problem)
    if not rep.feasible:
        raise InfeasibleError(rep.message, reason="too_strict", achievable=rep.reachable_range[0])
    if problem.p_bar >= rep.reachable_range[1]:
        return _finish(problem, method, [_min_snr(problem.model, i) for i in range(problem.model.n)])
    return None


# --------------------------------------------------------------------------
# semantic-unaware baseline


def allocate_unaware(problem: AllocationProblem) -> AllocationResult:
    """Equal received SNR on every stream, the smallest one meeting the target."""
    done = _screen(problem, "unaware")
    if done is not None:
        return done
    m, p_bar = problem.model, problem.p_bar
    s_min = max(_min_snr(m, i) for i in range(m.n))

    def resid(s):
        return m.evaluate([_error_at_snr(m, i, s) for i in range(m.n)]) - p_bar

    if resid(SNR_CAP) > 0:
        s = math.inf
    else:
        s = monotone_root(resid, s_min, SNR_CAP)
    return _finish(problem, "unaware", [s] * m.n)


# --------------------------------------------------------------------------
# semantic-proportional


def _proportional_errors(model: PerceptionModel, ratio: float) -> list[float]:
    return [
        invert_semantic_value(model, i, ratio * s.semantic_value)
        for i, s in enumerate(model.streams)
    ]


def allocate_proportional(problem: AllocationProblem) -> AllocationResult:
    """Equal retained fraction of semantic value, with closed-form powers.

    The common ratio is chosen so that the joint constraint binds exactly.
    """
    done = _screen(problem, "proportional")
    if done is not None:
        return done
    m, p_bar = problem.model, problem.p_bar

    def resid(ratio):
        return m.evaluate(_proportional_errors(m, ratio)) - p_bar

    ratio = monotone_root(resid, 0.0, 1.0, xtol=1e-15)
    errors = _proportional_errors(m, ratio)
    snrs = []
    for i, e in enumerate(errors):
        s = m.streams[i]
        if e <= 0.0:
            snrs.append(math.inf)
        elif m.scheme is Scheme.UNCODED_FORWARD:
            snrs.append(link.snr_from_ber(e))
        elif e >= 1.0:
            snrs.append(0.0)
        else:
            snrs.append(link._lambert_snr(e, s.bits, s.codeword))
    return _finish(problem, "proportional", snrs)


# --------------------------------------------------------------------------
# semantic-aware bisection (two streams)


class Curve(NamedTuple):
    """Sampled constraint curve ``P(phi1, phi2) = p_bar``.

    ``phi1`` is increasing, ``phi2`` decreasing; ``snr1``/``snr2`` are the
    received SNRs each point requires. None of this depends on the channel.
    """

    phi1: np.ndarray
    phi2: np.ndarray
    snr1: np.ndarray
    snr2: np.ndarray


def curve_endpoints(model: PerceptionModel, p_bar: float):
    """Left and right ends ``(phi1, phi2)`` of the constraint curve."""
    e_max = model.max_error
    if model.evaluate((0.0, e_max)) >= p_bar:
        left = (0.0, solve_constraint_curve(model, 0, 0.0, p_bar))
    else:
        left = (solve_constraint_curve(model, 1, e_max, p_bar), e_max)
    if model.evaluate((e_max, 0.0)) <= p_bar:
        right = (e_max, solve_constraint_curve(model, 0, e_max, p_bar))
    else:
        right = (solve_constraint_curve(model, 1, 0.0, p_bar), 0.0)
    return left, right


def curve_point(model: PerceptionModel, p_bar: float, phi1: float) -> float:
    return solve_constraint_curve(model, 0, phi1, p_bar)


@functools.lru_cache(maxsize=512)
def sample_curve(model: PerceptionModel, p_bar: float, n: int) -> Curve:
    left, right = curve_endpoints(model, p_bar)
    phi1 = np.linspace(left[0], right[0], n)
    phi2 = np.empty(n)
    phi2[0], phi2[-1] = left[1], right[1]
    for j in range(1, n - 1):
        phi2[j] = curve_point(model, p_bar, float(phi1[j]))
    snr1 = np.array([required_snr(model, 0, float(e)) for e in phi1])
    snr2 = np.array([required_snr(model, 1, float(e)) for e in phi2])
    for a in (phi1, phi2, snr1, snr2):
        a.setflags(write=False)
    return Curve(phi1, phi2, snr1, snr2)


def objective(problem: AllocationProblem, point: Sequence[float]) -> float:
    """Total power at an operating point ``(phi1, phi2)``."""
    w = _weights(problem)
    return math.fsum(
        w[i] * required_snr(problem.model, i, e) for i, e in enumerate(point)
    )


def objective_gradient(problem: AllocationProblem, point: Sequence[float]) -> Gradient:
    """Partial derivatives of total power in each operating error.

    Interior points use the analytic derivative of the SNR requirement.
    Points on the boundary of the error box use a one-sided difference and
    set ``boundary``.
    """
    m = problem.model
    w = _weights(problem)
    out = []
    boundary = False
    for i, e in enumerate(point):
        if 0.0 < e < m.max_error:
            out.append(w[i] * required_snr_slope(m, i, e))
            continue
        boundary = True
        h = 1e-6 * m.max_error
        if e <= 0.0:
            d = (required_snr(m, i, h) - required_snr(m, i, 0.0)) / h
        else:
            d = (required_snr(m, i, e) - required_snr(m, i, e - h)) / h
        out.append(w[i] * d)
    return Gradient(tuple(out), boundary)


def _constraint_slope(model: PerceptionModel, point) -> float:
    """``d phi2 / d phi1`` along the constraint, by implicit differentiation."""
    p1, p2 = model.partials(point)
    if p2 == 0.0:
        return -math.inf if p1 > 0 else 0.0
    return -p1 / p2


class _Bisector:
    """Algorithm state for one allocation problem."""

    def __init__(self, problem: AllocationProblem, eps: float):
        self.model = problem.model
        self.p_bar = problem.p_bar
        self.w = _weights(problem)
        self.eps = eps
        self.lo, self.hi = None, None

    def cost(self, point) -> float:
        return math.fsum(
            self.w[i] * required_snr(self.model, i, e) for i, e in enumerate(point)
        )

    def at(self, phi1: float):
        return (phi1, curve_point(self.model, self.p_bar, phi1))

    def direction(self, point) -> float:
        """Directional derivative of total power along the curve in ``phi1``."""
        m = self.model
        d1 = self.w[0] * required_snr_slope(m, 0, point[0])
        d2 = self.w[1] * required_snr_slope(m, 1, point[1])
        slope = _constraint_slope(m, point)
        with np.errstate(invalid="ignore"):
            g = d1 + slope * d2 if slope != 0.0 else d1
        if math.isnan(g):
            g = self._direction_fd(point[0])
        return g

    def _direction_fd(self, phi1: float) -> float:
        h = 1e-7 * self.model.max_error
        a = max(self.lo, phi1 - h)
        b = min(self.hi, phi1 + h)
        fa, fb = self.cost(self.at(a)), self.cost(self.at(b))
        if math.isinf(fa) and math.isinf(fb):
            return 0.0
        if math.isinf(fa):
            return -math.inf
        if math.isinf(fb):
            return math.inf
        return (fb - fa) / (b - a)

    def run(self, left, right):
        """Bisection on the sign of the directional derivative.

        Returns ``left`` if power already rises there, ``right`` if it still
        falls there, else the last midpoint once the bracket is below ``eps``.
        """
        if self.direction(left) >= 0:
            return left
        if self.direction(right) <= 0:
            return right
        point = left if self.cost(left) <= self.cost(right) else right
        while right[0] - left[0] >= self.eps:
            point = self.at(0.5 * (left[0] + right[0]))
            if self.direction(point) >= 0:
                right = point
            else:
                left = point
        return point


def allocate_bisection(
    problem: AllocationProblem, eps: float = BISECTION_EPS, scan_points: int = SCAN_POINTS
) -> AllocationResult:
    """Two-stream bisection along the perception constraint curve.

    The curve is sampled at ``scan_points`` values of the first stream's
    error. The bisection runs on the bracket around every sampled local
    minimum of total power; the cheapest of those results and the sampled
    points is returned. ``scan_points=2`` runs a single bisection between
    the curve endpoints.
    """
    m = problem.model
    if m.n != 2:
        raise ValueError("the bisection method needs exactly two streams")
    if scan_points < 2:
        raise ValueError("scan_points must be at least 2")
    done = _screen(problem, "bisection")
    if done is not None:
        return done

    curve = sample_curve(m, problem.p_bar, scan_points)
    w = _weights(problem)
    with np.errstate(invalid="ignore"):
        cost = w[0] * curve.snr1 + w[1] * curve.snr2
    if curve.phi1[0] == curve.phi1[-1] and curve.phi2[0] == curve.phi2[-1]:
        # the curve has collapsed onto the error-free corner
        return _finish(problem, "bisection", [math.inf, math.inf])

    bis = _Bisector(problem, eps)
    bis.lo, bis.hi = float(curve.phi1[0]), float(curve.phi1[-1])
    n = len(cost)
    finite = np.isfinite(cost)
    if finite.any():
        # brackets around sampled local minima
        brackets = []
        for j in range(n):
            c = cost[j]
            if not finite[j]:
                continue
            if (j > 0 and cost[j - 1] < c) or (j < n - 1 and cost[j + 1] < c):
                continue
            brackets.append((max(j - 1, 0), min(j + 1, n - 1), j))
    else:
        brackets = [(0, n - 1, None)]
    best_point, best_cost = None, math.inf
    for a, b, j in brackets:
        left = (float(curve.phi1[a]), float(curve.phi2[a]))
        right = (float(curve.phi1[b]), float(curve.phi2[b]))
        cands = [bis.run(left, right)]
        if j is not None:
            cands.append((float(curve.phi1[j]), float(curve.phi2[j])))
        for cand in cands:
            cc = bis.cost(cand)
            if cc < best_cost:
                best_point, best_cost = cand, cc

    snrs = [required_snr(m, i, e) for i, e in enumerate(best_point)]
    return _finish(problem, "bisection", snrs)


# --------------------------------------------------------------------------


_ALLOCATORS = {
    "unaware": allocate_unaware,
    "proportional": allocate_proportional,
    "bisection": allocate_bisection,
}


def allocate(problem: AllocationProblem, method: str) -> AllocationResult:
    try:
        fn = _ALLOCATORS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}") from None
    return fn(problem)
