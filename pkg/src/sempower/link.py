"""Channel model and the BER/BLER maps between SNR and transmission error.

Uncoded streams use BPSK, so the bit error rate is ``Q(sqrt(2 snr))``. Coded
streams use the finite-blocklength normal approximation

    BLER = Q( ln2 * sqrt(N / V) * (C - K/N) ),
    C = log2(1 + snr),  V = 1 - (1 + snr)^-2.

The inverse of the coded map has two independent routes: a bracketed root
search (:func:`snr_from_bler`) and a closed form through the generalized
Lambert W function (:func:`power_coded_closed_form`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from ._roots import bisect_then_refine, monotone_root
from .errors import BracketError

LN2 = math.log(2.0)
SQRT2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)

SNR_CAP = 1e9


# --------------------------------------------------------------------------
# channel


@dataclass(frozen=True)
class ChannelParams:
    """Large-scale channel description.

    ``path_loss_exponent`` follows the loss convention: the gain in dB falls
    by ``10 * exponent * log10(d / d0)``. ``fading`` is ``"rayleigh"`` or a
    tuple of fixed per-stream ``|h~|^2`` values.
    """

    distance_m: float = 100.0
    reference_distance_m: float = 1.0
    pl0_db: float = -30.0
    path_loss_exponent: float = 3.4
    noise_dbm: float = -110.0
    fading: str | tuple[float, ...] = "rayleigh"

    def __post_init__(self):
        if self.distance_m <= 0 or self.reference_distance_m <= 0:
            raise ValueError("distances must be positive")
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be positive")
        if isinstance(self.fading, str):
            if self.fading != "rayleigh":
                raise ValueError(f"unknown fading model {self.fading!r}")
        elif any(g <= 0 for g in self.fading):
            raise ValueError("fixed fading gains must be positive")

    @property
    def noise_w(self) -> float:
        return dbm_to_watts(self.noise_dbm)


@dataclass(frozen=True)
class ChannelRealization:
    """Per-stream ``|h_i|^2`` (linear, path loss included) and noise power."""

    gain_sq: tuple[float, ...]
    noise_w: tuple[float, ...]

    def __post_init__(self):
        if len(self.gain_sq) != len(self.noise_w):
            raise ValueError("gain_sq and noise_w must have equal length")
        if any(not g > 0 for g in self.gain_sq):
            raise ValueError("channel gains must be positive")
        if any(not s > 0 for s in self.noise_w):
            raise ValueError("noise power must be positive")

    def __len__(self):
        return len(self.gain_sq)

    def noise_to_gain(self, i: int) -> float:
        return self.noise_w[i] / self.gain_sq[i]


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(w: float) -> float:
    if w <= 0:
        return -math.inf
    return 10.0 * math.log10(w) + 30.0


def path_loss_linear(params: ChannelParams) -> float:
    gain_db = params.pl0_db - 10.0 * params.path_loss_exponent * math.log10(
        params.distance_m / params.reference_distance_m
    )
    return 10.0 ** (gain_db / 10.0)


def draw_realization(
    params: ChannelParams, n_streams: int, rng: np.random.Generator
) -> ChannelRealization:
    """Sample one block-fading realization.

    Rayleigh fading with unit variance makes ``|h~|^2`` a unit-mean
    exponential variable. Fixed fading ignores ``rng``.
    """
    pl = path_loss_linear(params)
    if isinstance(params.fading, str):
        fading = rng.exponential(1.0, size=n_streams)
    else:
        if len(params.fading) != n_streams:
            raise ValueError(
                f"fixed fading has {len(params.fading)} gains for {n_streams} streams"
            )
        fading = params.fading
    return ChannelRealization(
        gain_sq=tuple(float(pl * f) for f in fading),
        noise_w=(params.noise_w,) * n_streams,
    )


def fixed_realization(params: ChannelParams, fading: Sequence[float]) -> ChannelRealization:
    pl = path_loss_linear(params)
    return ChannelRealization(
        gain_sq=tuple(float(pl * f) for f in fading),
        noise_w=(params.noise_w,) * len(fading),
    )


def snr(q: float, real: ChannelRealization, stream: int) -> float:
    if q < 0:
        raise ValueError("power must be non-negative")
    return q * real.gain_sq[stream] / real.noise_w[stream]


# --------------------------------------------------------------------------
# Q function


def qfunc(x: float) -> float:
    return 0.5 * math.erfc(x / SQRT2)


def qfunc_inv(p: float) -> float:
    """Inverse of the Q function on ``(0, 1)``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"Q^-1 needs p in (0, 1), got {p!r}")
    return 0.0 - float(ndtri(p))


def qfunc_inv_derivative(p: float) -> float:
    """``d Q^-1(p) / dp = -sqrt(2 pi) exp(Q^-1(p)^2 / 2)``."""
    z = qfunc_inv(p)
    return -SQRT_2PI * math.exp(0.5 * z * z)


# --------------------------------------------------------------------------
# uncoded BPSK


def ber_bpsk(snr_: float) -> float:
    if snr_ < 0:
        raise ValueError(f"snr must be non-negative, got {snr_!r}")
    return qfunc(math.sqrt(2.0 * snr_))


def snr_from_ber(psi: float) -> float:
    """SNR at which uncoded BPSK reaches bit error rate ``psi``."""
    if not 0.0 < psi <= 0.5:
        raise ValueError(f"BER must lie in (0, 0.5], got {psi!r}")
    if psi == 0.5:
        return 0.0
    z = qfunc_inv(psi)
    return 0.5 * z * z


def dsnr_dber(psi: float) -> float:
    """Derivative of :func:`snr_from_ber`; ``-inf`` at ``psi = 0``."""
    if psi <= 0.0:
        return -math.inf
    z = qfunc_inv(psi)
    return z * qfunc_inv_derivative(psi)


# --------------------------------------------------------------------------
# coded, finite blocklength


def _dispersion(y: float) -> float:
    # y = ln(1 + snr); V = 1 - (1 + snr)^-2 computed without cancellation
    return -math.expm1(-2.0 * y)


def _fbl_argument(y: float, rate_nats: float, n: int) -> float:
    v = _dispersion(y)
    if v <= 0.0:
        return -math.inf
    return math.sqrt(n / v) * (y - rate_nats)


def bler_fbl(snr_: float, k: int, n: int) -> float:
    """Normal-approximation block error rate. ``snr = 0`` returns 1."""
    if snr_ < 0:
        raise ValueError(f"snr must be non-negative, got {snr_!r}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= K <= N, got K={k}, N={n}")
    if snr_ == 0.0:
        return 1.0
    return qfunc(_fbl_argument(math.log1p(snr_), LN2 * k / n, n))


def snr_from_bler(target: float, k: int, n: int) -> float:
    """SNR at which :func:`bler_fbl` equals ``target``, by bracketed search.

    The search variable is ``ln(1 + snr)``; the initial bracket spans SNR
    ``[1e-9, 1e9]`` and is widened geometrically if needed.
    """
    if not 0.0 < target < 1.0:
        raise ValueError(f"BLER target must lie in (0, 1), got {target!r}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= K <= N, got K={k}, N={n}")
    z = qfunc_inv(target)
    rate = LN2 * k / n

    def resid(y):
        return _fbl_argument(y, rate, n) - z

    s_lo, s_hi = 1e-9, 1e9
    while resid(math.log1p(s_lo)) > 0:
        s_lo *= 1e-3
        if s_lo < 1e-300:
            raise BracketError(f"cannot bracket BLER target {target!r} from below")
    while resid(math.log1p(s_hi)) < 0:
        s_hi *= 1e3
        if s_hi > 1e300:
            raise BracketError(f"cannot bracket BLER target {target!r} from above")
    y = monotone_root(resid, math.log1p(s_lo), math.log1p(s_hi), xtol=1e-300)
    return math.expm1(y)


def dbler_dsnr(snr_: float, k: int, n: int) -> float:
    """Analytic derivative of :func:`bler_fbl` with respect to SNR."""
    if snr_ <= 0.0:
        return 0.0
    y = math.log1p(snr_)
    rate = LN2 * k / n
    v = _dispersion(y)
    z = math.sqrt(n / v) * (y - rate)
    dv = 2.0 / (1.0 + snr_) ** 3
    dz = math.sqrt(n) * ((1.0 / (1.0 + snr_)) / math.sqrt(v) - (y - rate) * dv / (2.0 * v**1.5))
    return -math.exp(-0.5 * z * z) / SQRT_2PI * dz


def dsnr_dbler(target: float, k: int, n: int, snr_: float | None = None) -> float:
    """Derivative of :func:`snr_from_bler` by the inverse-function rule.

    Returns ``-inf`` where the forward slope underflows (BLER close to 1).
    """
    if target >= 1.0:
        return -math.inf
    if target <= 0.0:
        return -math.inf
    if snr_ is None:
        snr_ = snr_from_bler(target, k, n)
    slope = dbler_dsnr(snr_, k, n)
    if slope == 0.0:
        return -math.inf
    return 1.0 / slope


# --------------------------------------------------------------------------
# generalized Lambert W


def glambertw(t1: float, t2: float, a: float, bracket: tuple[float, float]) -> float:
    """Real root of ``(x - t1)(x - t2) e^x = a`` inside ``bracket``.

    The bracket must contain a sign change of the residual. The root is found
    by bisection followed by Illinois regula falsi; the returned point has
    residual at most ``1e-12 * max(1, |a|)`` whenever the residual is that
    well conditioned in double precision.
    """
    lo, hi = bracket
    if not lo <= hi:
        raise ValueError("bracket must satisfy lo <= hi")

    def resid(x):
        return (x - t1) * (x - t2) * math.exp(x) - a

    if lo == hi:
        if resid(lo) == 0.0:
            return lo
        raise BracketError("degenerate bracket without a root")
    tol = 1e-12 * max(1.0, abs(a))
    return bisect_then_refine(resid, lo, hi, ftol=tol * 1e-3)


def _lambert_snr(target: float, k: int, n: int) -> float:
    alpha = qfunc_inv(target) / math.sqrt(n)
    rate = LN2 * k / n
    if alpha == 0.0:
        return math.expm1(rate)
    beta = math.exp(-rate)
    a = -4.0 * beta * beta * alpha * alpha
    if alpha > 0:
        bracket = (0.0, 2.0 * alpha)
    else:
        # the ln(1 + snr) >= 0 requirement bounds eta from below by ln(beta)
        bracket = (max(2.0 * alpha, -2.0 * rate), 0.0)
    x = glambertw(2.0 * alpha, -2.0 * alpha, a, bracket)
    return math.expm1(rate + 0.5 * x)


def power_coded_closed_form(
    target_bler: float, k: int, n: int, gain_sq: float, noise_w: float
) -> float:
    """Transmit power meeting ``target_bler`` through the Lambert W closed form.

    With ``alpha = Q^-1(target) / sqrt(N)`` and ``r = (K/N) ln 2`` the
    BLER equation becomes ``(x - 2 alpha)(x + 2 alpha) e^x = -4 e^{-2r}
    alpha^2`` in ``x = 2 eta``, and ``snr = e^{r + eta} - 1``. Targets below
    0.5 use the bracket ``(0, 2 alpha]``; targets above 0.5 (negative
    ``alpha``) use ``[max(2 alpha, -2r), 0]``.
    """
    if not 0.0 < target_bler < 1.0:
        raise ValueError(f"BLER target must lie in (0, 1), got {target_bler!r}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= K <= N, got K={k}, N={n}")
    return noise_w / gain_sq * _lambert_snr(target_bler, k, n)
