"""Bound curves, local-deterministic enumeration and the extremal NS box."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from .behavior import ANALYSIS_TOL, Behavior, Scenario, behavior_from_array, chsh_terms, mix, uniform_behavior
from .errors import BudgetExceeded, DomainError
from .quantum import p_k_qm

LR_ENUM_MAX_K = 12
MEMBERSHIP_MAX_K = 5
FIG1_MAX_K = 10_000
GPT_LIMIT = 0.5
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def tsirelson_bound(k_param: int) -> float:
    """Maximal quantum value of the chained CHSH sum, ``2(K+1) cos(pi / 2(K+1))``."""
    n = Scenario(k_param).n_settings
    return 2.0 * n * math.cos(math.pi / (2.0 * n))


def upper_limit_L(k_param: int) -> float:
    K = Scenario(k_param).k_param
    return (tsirelson_bound(K) - 2.0 * K) / 4.0


def algebraic_bound(k_param: int) -> int:
    return 2 * Scenario(k_param).k_param + 2


def lr_bound(k_param: int) -> int:
    return 2 * Scenario(k_param).k_param


# deterministic strategies ---------------------------------------------------


@dataclass(frozen=True)
class DeterministicStrategy:
    """Fixed outcomes for every setting of both parties.

    Encoded as two ``K+1``-bit masks; bit ``k`` set means outcome +1 for setting ``k``.
    """

    a_bits: tuple[int, ...]
    b_bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.a_bits) != len(self.b_bits) or len(self.a_bits) < 2:
            raise DomainError("need K+1 >= 2 assignments per party")
        if any(v not in (1, -1) for v in self.a_bits + self.b_bits):
            raise DomainError("assignments must be +1 or -1")

    @property
    def k_param(self) -> int:
        return len(self.a_bits) - 1

    @classmethod
    def from_masks(cls, k_param: int, a_mask: int, b_mask: int) -> "DeterministicStrategy":
        n = Scenario(k_param).n_settings
        if not (0 <= a_mask < 1 << n and 0 <= b_mask < 1 << n):
            raise DomainError(f"masks must fit in {n} bits")
        bits = lambda m: tuple(1 if (m >> s) & 1 else -1 for s in range(n))  # noqa: E731
        return cls(bits(a_mask), bits(b_mask))

    @property
    def masks(self) -> tuple[int, int]:
        to_mask = lambda bits: sum(1 << s for s, v in enumerate(bits) if v == 1)  # noqa: E731
        return to_mask(self.a_bits), to_mask(self.b_bits)

    @property
    def encoding(self) -> int:
        a, b = self.masks
        return (a << len(self.a_bits)) | b

    def behavior(self) -> Behavior:
        n = len(self.a_bits)
        t = np.zeros((n, n, 2, 2))
        for k, a in enumerate(self.a_bits):
            for kp, b in enumerate(self.b_bits):
                t[k, kp, 0 if a == 1 else 1, 0 if b == 1 else 1] = 1.0
        return behavior_from_array(t)


def _sign_table(n: int) -> np.ndarray:
    masks = np.arange(1 << n)[:, None]
    return np.where((masks >> np.arange(n)) & 1, 1, -1).astype(np.int64)


def _chsh_weights(k_param: int) -> np.ndarray:
    n = k_param + 1
    w = np.zeros((n, n), dtype=np.int64)
    for k, kp, s in chsh_terms(k_param):
        w[k, kp] += s
    return w


def lr_max_chsh(k_param: int, max_k: int = LR_ENUM_MAX_K) -> tuple[int, DeterministicStrategy]:
    """Exhaustive maximum of the chained CHSH sum over all ``2^(2(K+1))`` strategies.

    A deterministic strategy's CHSH value is ``a^T W b`` for sign vectors
    ``a, b``; values are evaluated block-wise in exact integer arithmetic.
    Ties go to the smallest encoding ``(a_mask << (K+1)) | b_mask``.
    """
    K = Scenario(k_param).k_param
    if K > max_k:
        raise BudgetExceeded(f"K={K} exceeds enumeration budget K <= {max_k}")
    n = K + 1
    signs = _sign_table(n)
    aw = signs @ _chsh_weights(K)
    best, best_a, best_b = None, 0, 0
    chunk = max(1, (1 << 22) >> n)
    for start in range(0, 1 << n, chunk):
        vals = aw[start : start + chunk] @ signs.T
        flat = int(np.argmax(vals))
        v = int(vals.reshape(-1)[flat])
        if best is None or v > best:
            best = v
            best_a, best_b = start + flat // (1 << n), flat % (1 << n)
    return best, DeterministicStrategy.from_masks(K, best_a, best_b)


def deterministic_behaviors(k_param: int) -> list[Behavior]:
    n = Scenario(k_param).n_settings
    return [DeterministicStrategy.from_masks(k_param, a, b).behavior() for a in range(1 << n) for b in range(1 << n)]


def _vertex_matrix(k_param: int) -> np.ndarray:
    # columns: flattened deterministic tables, ordered by encoding
    n = k_param + 1
    onehot = np.zeros((1 << n, n, 2))
    signs = _sign_table(n)
    onehot[..., 0] = signs == 1
    onehot[..., 1] = signs == -1
    v = np.einsum("aki,blj->abklij", onehot, onehot)
    return v.reshape((1 << n) ** 2, -1).T


# extremal box ---------------------------------------------------------------


def extremal_ns_box(k_param: int) -> Behavior:
    """Generalized PR box: perfectly correlated everywhere except anti-correlated at (0, 0)."""
    n = Scenario(k_param).n_settings
    t = np.zeros((n, n, 2, 2))
    t[:, :, 0, 0] = t[:, :, 1, 1] = 0.5
    t[0, 0] = [[0.0, 0.5], [0.5, 0.0]]
    return behavior_from_array(t)


# Hardy fraction maximization ------------------------------------------------


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[a, b]`` until the bracket is narrower than ``tol``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def maximize_hardy(k_param: int, tol: float = 1e-10) -> tuple[float, float]:
    K = Scenario(k_param).k_param
    return golden_section_max(lambda x: p_k_qm(x, K), 0.0, 1.0, tol)


@dataclass(frozen=True)
class BoundsRecord:
    k_param: int
    lr_bound: float
    tsirelson: float
    algebraic: float
    l_k: float
    p_max_qm: float
    x_star: float
    gpt_limit: float = GPT_LIMIT

    def to_json_dict(self) -> dict:
        return asdict(self)


FIG1_COLUMNS = ["K", "L_K", "Pmax_QM", "x_star", "GPT_limit", "LR", "Tsirelson", "Algebraic"]


def bounds_record(k_param: int) -> BoundsRecord:
    K = Scenario(k_param).k_param
    x_star, p_max = maximize_hardy(K)
    return BoundsRecord(
        k_param=K,
        lr_bound=float(lr_bound(K)),
        tsirelson=tsirelson_bound(K),
        algebraic=float(algebraic_bound(K)),
        l_k=upper_limit_L(K),
        p_max_qm=p_max,
        x_star=x_star,
    )


def fig1_dataset(k_max: int, workers: int = 1) -> list[BoundsRecord]:
    """One record per ``K = 1..k_max``, ordered by ``K`` whatever ``workers`` is."""
    if isinstance(k_max, bool) or int(k_max) != k_max or not 1 <= k_max <= FIG1_MAX_K:
        raise DomainError(f"k_max must be an integer in 1..{FIG1_MAX_K}, got {k_max!r}")
    ks = range(1, int(k_max) + 1)
    if workers <= 1:
        return [bounds_record(K) for K in ks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(bounds_record, ks))


def fig1_csv(records: list[BoundsRecord], precision: int = 6) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIG1_COLUMNS)
    fmt = lambda v: f"{v:.{precision}f}"  # noqa: E731
    for r in records:
        w.writerow(
            [r.k_param, fmt(r.l_k), fmt(r.p_max_qm), fmt(r.x_star), fmt(r.gpt_limit),
             int(r.lr_bound), fmt(r.tsirelson), int(r.algebraic)]
        )
    return buf.getvalue()


# local polytope membership --------------------------------------------------


def local_distance(b: Behavior, max_k: int = MEMBERSHIP_MAX_K) -> float:
    """Smallest sup-norm distance from ``b`` to the convex hull of deterministic behaviors."""
    K = b.k_param
    if K > max_k:
        raise BudgetExceeded(f"K={K} exceeds membership budget K <= {max_k}")
    V = _vertex_matrix(K)
    p = b.table.reshape(-1)
    m, nv = V.shape
    # variables: weights (nv), then t; minimize t with |V w - p| <= t
    c = np.zeros(nv + 1)
    c[-1] = 1.0
    ones = np.ones((m, 1))
    A_ub = np.block([[V, -ones], [-V, -ones]])
    b_ub = np.concatenate([p, -p])
    A_eq = np.concatenate([np.ones(nv), [0.0]])[None, :]
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=(0, None), method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"membership LP failed: {res.message}")
    return float(res.fun)


def local_membership(b: Behavior, tol: float = ANALYSIS_TOL, max_k: int = MEMBERSHIP_MAX_K) -> bool:
    return local_distance(b, max_k) <= tol


def ns_mixture(k_param: int, rng: np.random.Generator, n_deterministic: int = 4,
               include_box: bool = True, include_uniform: bool = True) -> Behavior:
    """Random NS behavior: convex mixture of random deterministic points, the
    extremal box and the uniform behavior, with uniformly drawn weights."""
    n = Scenario(k_param).n_settings
    parts = [
        DeterministicStrategy.from_masks(k_param, int(rng.integers(1 << n)), int(rng.integers(1 << n))).behavior()
        for _ in range(n_deterministic)
    ]
    if include_box:
        parts.append(extremal_ns_box(k_param))
    if include_uniform:
        parts.append(uniform_behavior(k_param))
    return mix(parts, rng.uniform(size=len(parts)))
