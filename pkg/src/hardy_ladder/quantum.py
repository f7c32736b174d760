"""Quantum predictions for the ladder on the two-qubit state

    |psi> = (x |++> - |-->) / sqrt(1 + x^2),   0 <= x <= 1.

Measurements live in the real plane: setting ``k`` has ``+1`` eigenvector
``(cos t_k, sin t_k)`` and ``-1`` eigenvector ``(-sin t_k, cos t_k)`` in the
``{|+>, |->}`` basis, identical for both parties.  The angles obey
``tan t_0 = sqrt(x)`` and ``tan t_k = -x tan t_{k-1}``, which makes every Hardy
zero vanish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .behavior import Behavior, Scenario, behavior_from_array
from .errors import DomainError, PoleError

POLE_TOL = 1e-12


def _ipow(x: float, n: int) -> float:
    """``x**n`` for integer ``n >= 0`` by binary powering (no exp/log)."""
    result = 1.0
    base = x
    while n:
        if n & 1:
            result *= base
        base *= base
        n >>= 1
    return result


def _check_k(k_param: int) -> int:
    return Scenario(k_param).k_param


def _check_closed(x: float) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    return x


def _check_open(x: float) -> float:
    x = float(x)
    if not (0.0 < x < 1.0):
        raise DomainError(f"x must lie in the open interval (0, 1), got {x!r}")
    return x


@dataclass(frozen=True)
class SchmidtState:
    x: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _check_closed(self.x))

    @property
    def amplitudes(self) -> tuple[float, float]:
        """Coefficients of ``|++>`` and ``|-->``."""
        norm = math.sqrt(1.0 + self.x * self.x)
        return self.x / norm, -1.0 / norm


@dataclass(frozen=True)
class LadderAngles:
    theta_a: tuple[float, ...]
    theta_b: tuple[float, ...]


def ladder_angles(x: float, k_param: int) -> LadderAngles:
    x = _check_open(x)
    K = _check_k(k_param)
    r = math.sqrt(x)
    theta = tuple(math.atan(_ipow(-x, k) * r) for k in range(K + 1))
    return LadderAngles(theta_a=theta, theta_b=theta)


def _eigvecs(theta: tuple[float, ...]) -> np.ndarray:
    # [setting, outcome(+1, -1), component(|+>, |->)]
    t = np.asarray(theta)
    c, s = np.cos(t), np.sin(t)
    return np.stack([np.stack([c, s], axis=-1), np.stack([-s, c], axis=-1)], axis=1)


def born_behavior(x: float, k_param: int) -> Behavior:
    """Full joint-probability table of the ladder measurements on the Schmidt state."""
    angles = ladder_angles(x, k_param)
    c_pp, c_mm = SchmidtState(x).amplitudes
    ua = _eigvecs(angles.theta_a)
    ub = _eigvecs(angles.theta_b)
    amp = c_pp * np.einsum("ai,bj->abij", ua[:, :, 0], ub[:, :, 0]) + c_mm * np.einsum(
        "ai,bj->abij", ua[:, :, 1], ub[:, :, 1]
    )
    return behavior_from_array(amp * amp)


def p_k_qm(x: float, k_param: int) -> float:
    """Hardy fraction ``x^2/(1+x^2) * ((1 - x^(2K)) / (1 + x^(2K+1)))^2``."""
    x = _check_closed(x)
    K = _check_k(k_param)
    ratio = (1.0 - _ipow(x, 2 * K)) / (1.0 + _ipow(x, 2 * K + 1))
    return x * x / (1.0 + x * x) * ratio * ratio


@dataclass(frozen=True)
class ClosedFormProbs:
    """Closed-form ladder probabilities; ``zig[k-1]`` is the rung-``k`` value
    ``P(A_k=-1,B_{k-1}=+1) = P(A_{k-1}=+1,B_k=-1)``."""

    p00_mm: float
    pKK_mm: float
    pKK_pp: float
    zig: tuple[float, ...]

    def cere2_residual(self) -> float:
        return abs(self.pKK_mm - (self.pKK_pp + self.p00_mm + 2.0 * sum(self.zig)))

    def to_json_dict(self) -> dict:
        return {"p00_mm": self.p00_mm, "pKK_mm": self.pKK_mm, "pKK_pp": self.pKK_pp, "zig": list(self.zig)}


def closed_form_probs(x: float, k_param: int) -> ClosedFormProbs:
    x = _check_closed(x)
    K = _check_k(k_param)
    x2 = x * x
    p00_mm = (1.0 - x) ** 2 / (1.0 + x2)
    ratio = (1.0 - _ipow(x, 2 * K + 2)) / (1.0 + _ipow(x, 2 * K + 1))
    pKK_mm = ratio * ratio / (1.0 + x2)
    # x^(2k-1) form: same value as the displayed x^(2k)/x, finite at x = 0
    pref = (1.0 - x2) ** 2 / (1.0 + x2)
    zig = tuple(
        pref * _ipow(x, 2 * k - 1) / ((1.0 + _ipow(x, 2 * k - 1)) * (1.0 + _ipow(x, 2 * k + 1)))
        for k in range(1, K + 1)
    )
    return ClosedFormProbs(p00_mm=p00_mm, pKK_mm=pKK_mm, pKK_pp=p_k_qm(x, K), zig=zig)


def ladder_identity_sides(x: float, k_param: int) -> tuple[float, float]:
    """Both sides of
    ``sum_k x^(2k) / ((1+x^(2k-1))(1+x^(2k+1))) = sum_k x^(2k) / ((1+x)(1+x^(2K+1)))``.
    """
    x = float(x)
    K = _check_k(k_param)
    denom_rhs = (1.0 + x) * (1.0 + _ipow(x, 2 * K + 1))
    if abs(1.0 + x) < POLE_TOL or abs(1.0 + _ipow(x, 2 * K + 1)) < POLE_TOL:
        raise PoleError(f"identity has a pole at x={x!r}")
    lhs = 0.0
    evens = 0.0
    for k in range(1, K + 1):
        d1 = 1.0 + _ipow(x, 2 * k - 1)
        d2 = 1.0 + _ipow(x, 2 * k + 1)
        if abs(d1) < POLE_TOL or abs(d2) < POLE_TOL:
            raise PoleError(f"identity has a pole at x={x!r}")
        x2k = _ipow(x, 2 * k)
        lhs += x2k / (d1 * d2)
        evens += x2k
    return lhs, evens / denom_rhs


def ladder_identity_residual(x: float, k_param: int, relative: bool = False) -> float:
    lhs, rhs = ladder_identity_sides(x, k_param)
    diff = abs(lhs - rhs)
    if relative:
        scale = max(abs(lhs), abs(rhs))
        return diff / scale if scale > 0 else diff
    return diff
