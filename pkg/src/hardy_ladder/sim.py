"""Finite-statistics simulation of a ladder Bell test.

Each setting pair ``(k, k')`` gets its own PCG64 stream seeded from
``SeedSequence([seed, k, k'])``, so pairs are independent of sampling order
and can be drawn in parallel without changing results.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field

import numpy as np

from .behavior import (
    Behavior,
    Scenario,
    behavior_from_array,
    ch_values,
    chsh_k,
    chsh_terms,
    hardy_zero_indices,
    outcome_index,
)
from .errors import DomainError, WrongLength, ZeroShots

RNG_NAME = f"numpy.PCG64+SeedSequence([seed,k,kp]) numpy=={np.__version__}"

# Reported as violation_sigmas when the CHSH standard error is exactly zero
# (every sampled block deterministic) and the estimate exceeds 2K.
VIOLATION_SIGMAS_SENTINEL = sys.float_info.max


@dataclass(frozen=True)
class CountsTable:
    scenario: Scenario
    shots_per_pair: int
    seed: int
    counts: np.ndarray = field(repr=False)
    rng: str = RNG_NAME

    def __post_init__(self) -> None:
        n = self.scenario.n_settings
        c = np.asarray(self.counts)
        if c.shape != (n, n, 2, 2):
            raise WrongLength(f"counts must have shape {(n, n, 2, 2)}, got {c.shape}")
        if np.any(c < 0):
            raise DomainError("counts must be non-negative")
        if np.any(c.sum(axis=(2, 3)) != self.shots_per_pair):
            raise DomainError("every block must sum to shots_per_pair")
        c = c.astype(np.int64, copy=True)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def to_json_dict(self) -> dict:
        return {
            "k": self.scenario.k_param,
            "shots": self.shots_per_pair,
            "seed": self.seed,
            "rng": self.rng,
            "counts": [int(v) for v in self.counts.reshape(-1)],
        }

    @classmethod
    def from_json(cls, data: str | dict) -> "CountsTable":
        if isinstance(data, str):
            data = json.loads(data)
        sc = Scenario(data["k"])
        n = sc.n_settings
        counts = np.asarray(data["counts"], dtype=np.int64)
        if counts.size != 4 * n * n:
            raise WrongLength(f"K={sc.k_param} needs {4 * n * n} counts, got {counts.size}")
        return cls(sc, int(data["shots"]), int(data["seed"]), counts.reshape(n, n, 2, 2), data.get("rng", RNG_NAME))


def _check_seed(seed: int) -> int:
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= seed < 2**64:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def pair_rng(seed: int, k: int, kp: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([_check_seed(seed), k, kp])))


def sample_counts(b: Behavior, shots_per_pair: int, seed: int) -> CountsTable:
    if int(shots_per_pair) != shots_per_pair or shots_per_pair < 1:
        raise ZeroShots(f"shots_per_pair must be a positive integer, got {shots_per_pair!r}")
    shots = int(shots_per_pair)
    seed = _check_seed(seed)
    n = b.scenario.n_settings
    counts = np.empty((n, n, 2, 2), dtype=np.int64)
    for k in range(n):
        for kp in range(n):
            pv = b.table[k, kp].reshape(-1)
            counts[k, kp] = pair_rng(seed, k, kp).multinomial(shots, pv / pv.sum()).reshape(2, 2)
    return CountsTable(b.scenario, shots, seed, counts)


def _linear_se(p_hat: np.ndarray, coeffs: np.ndarray, n: int) -> float:
    # delta method for sum of per-block linear functionals of independent multinomials
    mean = (coeffs * p_hat).sum(axis=(2, 3))
    second = (coeffs**2 * p_hat).sum(axis=(2, 3))
    var = np.clip(second - mean**2, 0.0, None).sum() / n
    return float(np.sqrt(var))


def chsh_coefficients(k_param: int) -> np.ndarray:
    n = k_param + 1
    c = np.zeros((n, n, 2, 2))
    corr = np.array([[1.0, -1.0], [-1.0, 1.0]])
    for k, kp, s in chsh_terms(k_param):
        c[k, kp] += s * corr
    return c


def ch_plus_coefficients(k_param: int) -> np.ndarray:
    n = k_param + 1
    c = np.zeros((n, n, 2, 2))
    c[k_param, k_param, 0, 0] = 1.0
    for z in hardy_zero_indices(k_param):
        c[z.k, z.kp, outcome_index(z.i), outcome_index(z.j)] -= 1.0
    return c


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float


@dataclass(frozen=True)
class EstimateReport:
    behavior_hat: Behavior
    shots_per_pair: int
    p_k_hat: Estimate
    chsh_hat: Estimate
    ch_plus_hat: Estimate
    cere3_gap_hat: Estimate
    violation_sigmas: float
    zero_terms: tuple[tuple[str, Estimate], ...]

    def rows(self) -> list[tuple[str, float, float]]:
        out = [
            ("p_k", self.p_k_hat.value, self.p_k_hat.std_error),
            ("chsh_k", self.chsh_hat.value, self.chsh_hat.std_error),
            ("ch_plus", self.ch_plus_hat.value, self.ch_plus_hat.std_error),
            ("chsh_minus_2k_minus_4ch", self.cere3_gap_hat.value, self.cere3_gap_hat.std_error),
        ]
        out += [(label, e.value, e.std_error) for label, e in self.zero_terms]
        return out

    def to_json_dict(self) -> dict:
        return {
            "k": self.behavior_hat.k_param,
            "shots": self.shots_per_pair,
            "estimates": [{"quantity": q, "estimate": v, "std_error": s} for q, v, s in self.rows()],
            "violation_sigmas": self.violation_sigmas,
        }


def estimate_report(c: CountsTable) -> EstimateReport:
    """Plug-in estimates with delta-method standard errors (blocks independent)."""
    n = c.shots_per_pair
    K = c.scenario.k_param
    p_hat = c.counts / n
    b_hat = behavior_from_array(p_hat)

    def se_single(p: float) -> float:
        return float(np.sqrt(p * (1.0 - p) / n))

    p_k = b_hat.p(K, K, 1, 1)
    chsh = chsh_k(b_hat)
    ch_plus, _ = ch_values(b_hat)
    c_chsh = chsh_coefficients(K)
    c_ch = ch_plus_coefficients(K)
    chsh_se = _linear_se(p_hat, c_chsh, n)
    if chsh_se > 0:
        sigmas = (chsh - 2 * K) / chsh_se
    elif chsh > 2 * K:
        sigmas = VIOLATION_SIGMAS_SENTINEL
    elif chsh < 2 * K:
        sigmas = -VIOLATION_SIGMAS_SENTINEL
    else:
        sigmas = 0.0
    zeros = tuple((z.label(), Estimate(b_hat[z], se_single(b_hat[z]))) for z in hardy_zero_indices(K))
    return EstimateReport(
        behavior_hat=b_hat,
        shots_per_pair=n,
        p_k_hat=Estimate(p_k, se_single(p_k)),
        chsh_hat=Estimate(chsh, chsh_se),
        ch_plus_hat=Estimate(ch_plus, _linear_se(p_hat, c_ch, n)),
        cere3_gap_hat=Estimate(chsh - 2 * K - 4 * ch_plus, _linear_se(p_hat, c_chsh - 4 * c_ch, n)),
        violation_sigmas=float(sigmas),
        zero_terms=zeros,
    )
