"""Calibrated perception-error models for multi-stream generative decoding.

Perceptual distance lies in ``[0, 1]``, lower is better. Two receiver schemes
are modelled:

* uncoded forward-with-error: every stream is passed to the decoder with bit
  errors; distance is a smooth function of the per-stream BERs.
* coded discard-with-error: a stream with a block error is dropped, so the
  distance is the expectation, over which streams survive, of the base
  distance reached from that subset of streams.

The forward-scheme curves are a logistic-in-BER product model pinned to the
published endpoints (best case, joint worst case, per-stream semantic
values). Its interior is a calibration choice, not measured data.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import InfeasibleError

MAX_BER = 0.5


class Scheme(str, enum.Enum):
    UNCODED_FORWARD = "uncoded"
    CODED_DISCARD = "coded"


class Metric(str, enum.Enum):
    CLIP = "CLIP"
    MSSSIM = "MSSSIM"


@dataclass(frozen=True)
class ForwardShape:
    """Logistic quality curve ``u(psi) = floor + (1 - floor) / (1 + (psi/midpoint)^steepness)``."""

    midpoint: float
    steepness: float = 1.5
    floor: float = 0.05

    def __post_init__(self):
        if not self.midpoint > 0:
            raise ValueError("midpoint must be positive")
        if not self.steepness > 0:
            raise ValueError("steepness must be positive")
        if not 0.0 <= self.floor < 1.0:
            raise ValueError("floor must lie in [0, 1)")


@dataclass(frozen=True)
class StreamProfile:
    """One semantic data stream for a fixed metric.

    ``bits`` is the payload length K, ``codeword`` the coded length N and
    ``semantic_value`` the value L reached by decoding from this stream alone.
    """

    name: str
    bits: int
    codeword: int
    semantic_value: float
    shape: ForwardShape = field(default_factory=lambda: ForwardShape(0.01))

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError(f"{self.name}: bits must be >= 1")
        if self.codeword < self.bits:
            raise ValueError(f"{self.name}: codeword length must be >= bits")
        if not 0.0 < self.semantic_value <= 1.0:
            raise ValueError(f"{self.name}: semantic value must lie in (0, 1]")


@dataclass(frozen=True)
class MetricPreset:
    """Endpoint constants of one perceptual metric.

    ``subset_perception[mask]`` is the distance reached from error-free
    streams whose indices are the set bits of ``mask``; entry 0 is the empty
    set (no regeneration, distance 1) and the last entry the full set.
    ``stream_worst`` holds the single-stream uncoded distance at BER 0.5; it
    defaults to the joint uncoded worst case.
    """

    metric: Metric
    p_best: float
    p_worst_uncoded: float
    subset_perception: tuple[float, ...]
    stream_worst: tuple[float, ...] | None = None

    def __post_init__(self):
        table = self.subset_perception
        n = len(table).bit_length() - 1
        if len(table) != 1 << n or n < 1:
            raise ValueError("subset table must have 2^n entries, n >= 1")
        if table[0] != 1.0:
            raise ValueError("empty subset must map to distance 1")
        if abs(table[-1] - self.p_best) > 1e-12:
            raise ValueError("full subset must map to p_best")
        if not 0.0 <= self.p_best <= self.p_worst_uncoded <= 1.0:
            raise ValueError("need 0 <= p_best <= p_worst_uncoded <= 1")
        for mask, value in enumerate(table):
            if not self.p_best - 1e-12 <= value <= 1.0:
                raise ValueError(f"subset {mask:b}: value outside [p_best, 1]")
            for i in range(n):
                sup = mask | (1 << i)
                if table[sup] > value + 1e-12:
                    raise ValueError(
                        f"subset table not monotone: adding stream {i} to {mask:b} raises distance"
                    )
        if self.stream_worst is not None and len(self.stream_worst) != n:
            raise ValueError("stream_worst length must match stream count")

    @property
    def n_streams(self) -> int:
        return len(self.subset_perception).bit_length() - 1

    @classmethod
    def from_semantic_values(
        cls,
        metric: Metric | str,
        p_best: float,
        p_worst_uncoded: float,
        semantic_values: Sequence[float],
        stream_worst: Sequence[float] | None = None,
    ) -> "MetricPreset":
        """Build the subset table for one or two streams from L values.

        Singletons map to ``1 - L_i``; for one stream ``L`` must equal
        ``1 - p_best``. Larger stream counts need an explicit table.
        """
        n = len(semantic_values)
        if n > 2:
            raise ValueError("explicit subset table required for more than two streams")
        table = [1.0] * (1 << n)
        for i, value in enumerate(semantic_values):
            table[1 << i] = 1.0 - value
        table[-1] = p_best
        return cls(
            metric=Metric(metric),
            p_best=p_best,
            p_worst_uncoded=p_worst_uncoded,
            subset_perception=tuple(table),
            stream_worst=None if stream_worst is None else tuple(stream_worst),
        )


# Published endpoint constants; stream 0 is the textual prompt, 1 the edge map.
CLIP_PRESET = MetricPreset.from_semantic_values(Metric.CLIP, 0.3191, 0.8112, (0.5887, 0.3596))
MSSSIM_PRESET = MetricPreset.from_semantic_values(Metric.MSSSIM, 0.3313, 0.4720, (0.5465, 0.6355))
PRESETS = {Metric.CLIP: CLIP_PRESET, Metric.MSSSIM: MSSSIM_PRESET}


@dataclass(frozen=True)
class PerceptionModel:
    scheme: Scheme
    preset: MetricPreset
    streams: tuple[StreamProfile, ...]
    max_ber: float = MAX_BER

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "streams", tuple(self.streams))
        n = len(self.streams)
        if n != self.preset.n_streams:
            raise ValueError(
                f"{n} streams but the preset describes {self.preset.n_streams}"
            )
        if not 0.0 < self.max_ber <= MAX_BER:
            raise ValueError(f"max_ber must lie in (0, {MAX_BER}], got {self.max_ber!r}")
        for i, s in enumerate(self.streams):
            base = self.preset.subset_perception[1 << i]
            if abs((1.0 - s.semantic_value) - base) > 1e-12:
                raise ValueError(
                    f"stream {s.name!r}: semantic value {s.semantic_value} disagrees "
                    f"with subset distance {base}"
                )
            if self.stream_worst(i) < 1.0 - s.semantic_value - 1e-12:
                raise ValueError(
                    f"stream {s.name!r}: single-stream worst case lies below its best case"
                )

    @property
    def n(self) -> int:
        return len(self.streams)

    @property
    def max_error(self) -> float:
        return self.max_ber if self.scheme is Scheme.UNCODED_FORWARD else 1.0

    @property
    def p_best(self) -> float:
        return self.preset.p_best

    def stream_worst(self, i: int) -> float:
        if self.preset.stream_worst is None:
            return self.preset.p_worst_uncoded
        return self.preset.stream_worst[i]

    def worst(self) -> float:
        """Distance at the largest admissible error on every stream."""
        return self.evaluate((self.max_error,) * self.n)

    def evaluate(self, errors: Sequence[float]) -> float:
        if self.scheme is Scheme.UNCODED_FORWARD:
            return perception_forward(self, errors)
        return perception_discard(self, errors)

    def partials(self, errors: Sequence[float]) -> tuple[float, ...]:
        """Partial derivatives of :meth:`evaluate` in each error coordinate."""
        _check_count(self, errors)
        if self.scheme is Scheme.UNCODED_FORWARD:
            us = [quality_factor(s.shape, e) for s, e in zip(self.streams, errors)]
            u_max = _u_at_max(self)
            scale = (self.preset.p_worst_uncoded - self.p_best) / (1.0 - u_max)
            out = []
            for i, (s, e) in enumerate(zip(self.streams, errors)):
                rest = math.prod(us[:i] + us[i + 1:])
                out.append(-scale * rest * quality_factor_derivative(s.shape, e))
            return tuple(out)
        table = self.preset.subset_perception
        out = []
        for i in range(self.n):
            bit = 1 << i
            others = [j for j in range(self.n) if j != i]
            total = 0.0
            for mask in _masks(others):
                w = 1.0
                for j in others:
                    w *= (1.0 - errors[j]) if mask >> j & 1 else errors[j]
                total += w * (table[mask] - table[mask | bit])
            out.append(total)
        return tuple(out)


def _masks(indices):
    for r in range(len(indices) + 1):
        for combo in itertools.combinations(indices, r):
            yield sum(1 << j for j in combo)


def _check_count(model: PerceptionModel, errors: Sequence[float]) -> None:
    if len(errors) != model.n:
        raise TypeError(f"expected {model.n} error values, got {len(errors)}")


# --------------------------------------------------------------------------
# forward-with-error


def quality_factor(shape: ForwardShape, ber: float) -> float:
    if not 0.0 <= ber <= MAX_BER:
        raise ValueError(f"BER must lie in [0, 0.5], got {ber!r}")
    t = (ber / shape.midpoint) ** shape.steepness
    return shape.floor + (1.0 - shape.floor) / (1.0 + t)


def quality_factor_derivative(shape: ForwardShape, ber: float) -> float:
    m, k, fl = shape.midpoint, shape.steepness, shape.floor
    if ber == 0.0:
        if k > 1:
            return 0.0
        if k == 1:
            return -(1.0 - fl) / m
        return -math.inf
    x = ber / m
    t = x**k
    return -(1.0 - fl) * (k / m) * x ** (k - 1.0) / (1.0 + t) ** 2


def quality_factor_inverse(shape: ForwardShape, u: float) -> float:
    """BER at which the quality factor equals ``u``; clipped to ``[0, 0.5]``."""
    if u >= 1.0:
        return 0.0
    if u <= quality_factor(shape, MAX_BER):
        return MAX_BER
    t = (1.0 - shape.floor) / (u - shape.floor) - 1.0
    return min(MAX_BER, shape.midpoint * t ** (1.0 / shape.steepness))


def _u_at_max(model: PerceptionModel) -> float:
    return math.prod(quality_factor(s.shape, MAX_BER) for s in model.streams)


def _normalised_quality(shape: ForwardShape, ber: float) -> float:
    u_max = quality_factor(shape, MAX_BER)
    return (quality_factor(shape, ber) - u_max) / (1.0 - u_max)


def perception_forward(model: PerceptionModel, bers: Sequence[float]) -> float:
    """Joint distance under forward-with-error.

    ``P = p_worst - (p_worst - p_best) * (U - U_max) / (1 - U_max)`` with
    ``U`` the product of per-stream quality factors and ``U_max`` its value
    at BER 0.5 on every stream.
    """
    if model.scheme is not Scheme.UNCODED_FORWARD:
        raise ValueError("perception_forward needs an uncoded forward-with-error model")
    _check_count(model, bers)
    u = math.prod(quality_factor(s.shape, e) for s, e in zip(model.streams, bers))
    u_max = _u_at_max(model)
    w = (u - u_max) / (1.0 - u_max)
    pw, pb = model.preset.p_worst_uncoded, model.p_best
    return pw - (pw - pb) * w


# --------------------------------------------------------------------------
# discard-with-error


def perception_discard(model: PerceptionModel, blers: Sequence[float]) -> float:
    """Expected distance when each stream is dropped with its block error rate."""
    if model.scheme is not Scheme.CODED_DISCARD:
        raise ValueError("perception_discard needs a coded discard-with-error model")
    _check_count(model, blers)
    for b in blers:
        if not 0.0 <= b <= 1.0:
            raise ValueError(f"BLER must lie in [0, 1], got {b!r}")
    table = model.preset.subset_perception
    total = 0.0
    for mask, value in enumerate(table):
        w = 1.0
        for i, b in enumerate(blers):
            w *= (1.0 - b) if mask >> i & 1 else b
        total += w * value
    return total


# --------------------------------------------------------------------------
# semantic values


def semantic_value_received(model: PerceptionModel, stream_index: int, error: float) -> float:
    """Semantic value of a received stream at the given BER or BLER."""
    if not 0 <= stream_index < model.n:
        raise IndexError(f"stream index {stream_index} out of range")
    s = model.streams[stream_index]
    if model.scheme is Scheme.CODED_DISCARD:
        if not 0.0 <= error <= 1.0:
            raise ValueError(f"BLER must lie in [0, 1], got {error!r}")
        return (1.0 - error) * s.semantic_value
    floor = 1.0 - model.stream_worst(stream_index)
    return floor + (s.semantic_value - floor) * _normalised_quality(s.shape, error)


def invert_semantic_value(model: PerceptionModel, stream_index: int, target: float) -> float:
    """Error level at which the received semantic value equals ``target``.

    Forward-scheme targets below the value left at BER 0.5 map to the
    largest admissible BER, where no transmit power is needed.
    """
    if not 0 <= stream_index < model.n:
        raise IndexError(f"stream index {stream_index} out of range")
    s = model.streams[stream_index]
    if target < 0:
        raise ValueError("target semantic value must be non-negative")
    if target > s.semantic_value:
        if target - s.semantic_value <= 1e-12:
            target = s.semantic_value
        else:
            raise InfeasibleError(
                f"stream {s.name!r}: target {target} exceeds semantic value {s.semantic_value}",
                reason="too_strict",
                achievable=s.semantic_value,
            )
    if model.scheme is Scheme.CODED_DISCARD:
        return 1.0 - target / s.semantic_value
    floor = 1.0 - model.stream_worst(stream_index)
    if target <= floor:
        return model.max_error
    if target == s.semantic_value:
        return 0.0
    g = (target - floor) / (s.semantic_value - floor)
    u_max = quality_factor(s.shape, MAX_BER)
    return min(model.max_error, quality_factor_inverse(s.shape, u_max + g * (1.0 - u_max)))


# --------------------------------------------------------------------------
# constraint curve of two-stream problems


def solve_constraint_curve(
    model: PerceptionModel, fixed_index: int, fixed_error: float, target_p: float
) -> float:
    """Error of the other stream that puts the joint distance at ``target_p``.

    Raises :class:`InfeasibleError` with reason ``"too_strict"`` if even a
    zero error on the free stream leaves the distance above target, and
    ``"always_satisfied"`` if the largest admissible error already meets it.
    """
    if model.n != 2:
        raise ValueError("constraint curves are defined for two streams")
    if fixed_index not in (0, 1):
        raise IndexError(f"stream index {fixed_index} out of range")
    free = 1 - fixed_index
    e_max = model.max_error

    def at(e_free):
        errs = [0.0, 0.0]
        errs[fixed_index] = fixed_error
        errs[free] = e_free
        return model.evaluate(errs)

    p_lo, p_hi = at(0.0), at(e_max)
    if target_p <= p_lo:
        if p_lo - target_p <= 1e-13:
            return 0.0
        raise InfeasibleError(
            f"target {target_p} below {p_lo} reached with an error-free stream {free}",
            reason="too_strict",
            achievable=p_lo,
        )
    if target_p >= p_hi:
        if target_p - p_hi <= 1e-13:
            return e_max
        raise InfeasibleError(
            f"target {target_p} already met at maximum error on stream {free}",
            reason="always_satisfied",
            achievable=p_hi,
        )
    if model.scheme is Scheme.CODED_DISCARD:
        # multilinear: exactly affine in the free coordinate
        e = (target_p - p_lo) / (p_hi - p_lo)
        return min(max(e, 0.0), 1.0)
    pw, pb = model.preset.p_worst_uncoded, model.p_best
    u_max = _u_at_max(model)
    u_needed = u_max + (pw - target_p) / (pw - pb) * (1.0 - u_max)
    u_fixed = quality_factor(model.streams[fixed_index].shape, fixed_error)
    e = quality_factor_inverse(model.streams[free].shape, u_needed / u_fixed)
    return min(e, e_max)
