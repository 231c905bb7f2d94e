"""Entropy and mutual information of the bit-level transmission models.

All quantities are in bits. The closed forms for uncoded and coded streams
are implemented exactly as derived under independent Bernoulli bits; exact
brute-force versions over small joint distributions are provided alongside
so the closed forms can be checked against first principles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_ALPHABET = 16
_PMF_TOL = 1e-12


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


@dataclass(frozen=True)
class BernoulliStream:
    """Independent bits, bit ``j`` equal to 1 with probability ``phi[j]``."""

    phi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(p) for p in self.phi))
        if not self.phi:
            raise ValueError("stream needs at least one bit")
        if any(not 0.0 <= p <= 1.0 for p in self.phi):
            raise ValueError("bit probabilities must lie in [0, 1]")

    @property
    def length(self) -> int:
        return len(self.phi)

    def sequence_probability(self, bits: Sequence[int]) -> float:
        """Probability of one concrete bit pattern (product over bits)."""
        if len(bits) != self.length:
            raise ValueError("pattern length does not match stream length")
        return math.prod(p if b else 1.0 - p for b, p in zip(bits, self.phi))

    def entropy(self) -> float:
        """Entropy of the whole sequence; additive over independent bits."""
        return math.fsum(binary_entropy(p) for p in self.phi)


def _check_ber(psi: float) -> None:
    if not 0.0 <= psi <= 0.5:
        raise ValueError(f"BER must lie in [0, 0.5], got {psi!r}")


def mi_uncoded_lemma2(stream: BernoulliStream, ber: Sequence[float] | float) -> float:
    """Per-bit sum ``sum_j H(phi_j) - H(psi_j)`` for the forward scheme.

    This is the closed form as derived; it coincides with the exact BSC
    mutual information only for uniform bits (``phi = 0.5``) and can go
    negative otherwise.
    """
    if isinstance(ber, (int, float)):
        ber = [float(ber)] * stream.length
    if len(ber) != stream.length:
        raise ValueError("need one BER per bit")
    for psi in ber:
        _check_ber(psi)
    return math.fsum(binary_entropy(p) - binary_entropy(e) for p, e in zip(stream.phi, ber))


def mi_bsc_exact(phi: float, psi: float) -> float:
    """Exact ``I(X; Y)`` of one Bernoulli(phi) bit through a BSC(psi)."""
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"phi must lie in [0, 1], got {phi!r}")
    _check_ber(psi)
    out = phi * (1.0 - psi) + (1.0 - phi) * psi
    return binary_entropy(out) - binary_entropy(psi)


def mi_coded_lemma2(seq_prob_entropy: float, bler: float) -> float:
    """``(1 - BLER) * H`` for the discard scheme: lost blocks carry nothing."""
    if seq_prob_entropy < 0:
        raise ValueError("entropy must be non-negative")
    if not 0.0 <= bler <= 1.0:
        raise ValueError(f"BLER must lie in [0, 1], got {bler!r}")
    return seq_prob_entropy - bler * seq_prob_entropy


@dataclass(frozen=True)
class JointPmf:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2:
            raise ValueError("joint pmf must be a matrix")
        if max(p.shape) > MAX_ALPHABET:
            raise ValueError(f"alphabets are capped at {MAX_ALPHABET} symbols")
        if (p < 0).any():
            raise ValueError("probabilities must be non-negative")
        if abs(p.sum() - 1.0) > _PMF_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def dims(self) -> tuple[int, int]:
        return self.probs.shape


def mi_joint(pmf: JointPmf) -> float:
    """Exact mutual information by the double sum over the joint matrix."""
    p = pmf.probs
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    terms = []
    for i in range(p.shape[0]):
        for j in range(p.shape[1]):
            pij = p[i, j]
            if pij > 0:
                # difference of logs: the marginal product can underflow
                terms.append(pij * (math.log2(pij) - math.log2(px[i]) - math.log2(py[j])))
    return max(0.0, math.fsum(terms))


def bsc_joint(phi: float, psi: float) -> JointPmf:
    """2x2 joint of a Bernoulli(phi) input and its BSC(psi) output."""
    px = np.array([1.0 - phi, phi])
    channel = np.array([[1.0 - psi, psi], [psi, 1.0 - psi]])
    return JointPmf(px[:, None] * channel)


@dataclass(frozen=True)
class DpiReport:
    i_xz: float
    i_xy: float
    holds: bool


def _check_stochastic(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or max(m.shape) > 8:
        raise ValueError(f"{name} must be a matrix with alphabets <= 8")
    if (m < 0).any() or not np.allclose(m.sum(axis=1), 1.0, atol=1e-12, rtol=0):
        raise ValueError(f"{name} is not row-stochastic")
    return m


def dpi_check(source, first, second, slack: float = 1e-10) -> DpiReport:
    """Exact check of ``I(X; Z) <= I(X; Y)`` along ``X -> Y -> Z``.

    ``first`` is ``P(Y | X)`` and ``second`` is ``P(Z | Y)``, both
    row-stochastic.
    """
    px = np.asarray(source, dtype=float)
    if px.ndim != 1 or (px < 0).any() or abs(px.sum() - 1.0) > 1e-12:
        raise ValueError("source must be a probability vector")
    a = _check_stochastic(first, "first stage")
    b = _check_stochastic(second, "second stage")
    if a.shape[0] != px.size or b.shape[0] != a.shape[1]:
        raise ValueError("stage shapes do not chain")
    pxy = px[:, None] * a
    pxz = pxy @ b
    i_xy = mi_joint(JointPmf(pxy / pxy.sum()))
    i_xz = mi_joint(JointPmf(pxz / pxz.sum()))
    return DpiReport(i_xz=i_xz, i_xy=i_xy, holds=i_xz <= i_xy + slack)
