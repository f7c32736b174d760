"""Bipartite two-outcome behaviors for the Hardy ladder scenario.

A behavior for ladder size ``K`` is the table ``P(A_k = i, B_k' = j)`` for
settings ``k, k' in 0..K`` and outcomes ``i, j in {+1, -1}``.  Internally the
table is a read-only array of shape ``(K+1, K+1, 2, 2)`` where outcome index 0
stands for ``+1`` and index 1 for ``-1``.

The flat wire order is settings row-major in ``(k, k')`` and, inside each
block, outcomes ``(++, +-, -+, --)``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, NegativeEntry, NotNormalized, SettingOutOfRange, WrongLength

NORMALIZATION_TOL = 1e-12
CLAMP_TOL = 1e-15
ANALYSIS_TOL = 1e-9

WIRE_ORDER = "kkp-rowmajor;pp,pm,mp,mm"
OUTCOMES = (+1, -1)


def outcome_index(o: int) -> int:
    if o == +1:
        return 0
    if o == -1:
        return 1
    raise DomainError(f"outcome must be +1 or -1, got {o!r}")


def _sign(o: int) -> str:
    return "+" if o > 0 else "-"


@dataclass(frozen=True)
class Scenario:
    k_param: int

    def __post_init__(self) -> None:
        if isinstance(self.k_param, bool) or int(self.k_param) != self.k_param or self.k_param < 1:
            raise DomainError(f"k_param must be an integer >= 1, got {self.k_param!r}")
        object.__setattr__(self, "k_param", int(self.k_param))

    @property
    def n_settings(self) -> int:
        return self.k_param + 1

    @property
    def n_entries(self) -> int:
        return 4 * self.n_settings**2


class ProbIndex(NamedTuple):
    """One joint probability ``P(A_k = i, B_k' = j)`` with ``i, j`` in {+1, -1}."""

    k: int
    kp: int
    i: int
    j: int

    def label(self) -> str:
        return f"P(A{self.k}={self.i:+d},B{self.kp}={self.j:+d})"

    def short(self) -> str:
        return f"P{self.k},{self.kp}^{_sign(self.i)}{_sign(self.j)}"


def hardy_zero_indices(k_param: int) -> list[ProbIndex]:
    """The ``2K+1`` probabilities that Hardy's ladder requires to vanish.

    Order: ``P(A0=+1,B0=+1)``, then for each rung ``k = 1..K`` the pair
    ``P(A_k=+1,B_{k-1}=-1)``, ``P(A_{k-1}=-1,B_k=+1)``.
    """
    K = Scenario(k_param).k_param
    out = [ProbIndex(0, 0, +1, +1)]
    for k in range(1, K + 1):
        out.append(ProbIndex(k, k - 1, +1, -1))
        out.append(ProbIndex(k - 1, k, -1, +1))
    return out


def chsh_terms(k_param: int) -> list[tuple[int, int, int]]:
    """``(k, k', sign)`` for the ``2K+2`` correlators of the chained CHSH sum."""
    K = Scenario(k_param).k_param
    terms = [(k, k - 1, +1) for k in range(1, K + 1)]
    terms += [(k - 1, k, +1) for k in range(1, K + 1)]
    terms += [(K, K, +1), (0, 0, -1)]
    return terms


@dataclass(frozen=True)
class Behavior:
    scenario: Scenario
    table: np.ndarray = field(repr=False)

    @property
    def k_param(self) -> int:
        return self.scenario.k_param

    def p(self, k: int, kp: int, i: int, j: int) -> float:
        _check_setting(self, k, kp)
        return float(self.table[k, kp, outcome_index(i), outcome_index(j)])

    def __getitem__(self, idx: ProbIndex | tuple[int, int, int, int]) -> float:
        return self.p(*idx)

    def flat(self) -> list[float]:
        return [float(v) for v in self.table.reshape(-1)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Behavior):
            return NotImplemented
        return self.scenario == other.scenario and np.array_equal(self.table, other.table)

    def __hash__(self) -> int:
        return hash((self.scenario, self.table.tobytes()))

    # serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {"k": self.k_param, "order": WIRE_ORDER, "table": self.flat()}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), **kwargs)

    def to_csv(self, precision: int = 17) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "kp", "pp", "pm", "mp", "mm"])
        for k in range(self.scenario.n_settings):
            for kp in range(self.scenario.n_settings):
                w.writerow([k, kp, *(f"{v:.{precision}g}" for v in self.table[k, kp].reshape(-1))])
        return buf.getvalue()


def behavior_from_table(k_param: int, entries: Sequence[float] | np.ndarray) -> Behavior:
    """Validate a flat list of ``4(K+1)^2`` probabilities and wrap it as a Behavior.

    Entries in ``[-1e-15, 0)`` are clamped to zero; anything more negative is
    rejected, as is any setting-pair block whose four entries do not sum to 1
    within ``1e-12``.
    """
    scenario = Scenario(k_param)
    arr = np.array(entries, dtype=float).reshape(-1)
    if arr.size != scenario.n_entries:
        raise WrongLength(f"K={scenario.k_param} needs {scenario.n_entries} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("table contains non-finite entries")
    n = scenario.n_settings
    arr = arr.reshape(n, n, 2, 2)
    if np.any(arr < -CLAMP_TOL):
        k, kp, a, b = np.argwhere(arr < -CLAMP_TOL)[0]
        raise NegativeEntry(
            f"entry {ProbIndex(int(k), int(kp), OUTCOMES[a], OUTCOMES[b]).label()} = {arr[k, kp, a, b]!r} < 0"
        )
    arr = np.where(arr < 0.0, 0.0, arr)
    sums = arr.sum(axis=(2, 3))
    dev = np.abs(sums - 1.0)
    if np.any(dev > NORMALIZATION_TOL):
        k, kp = np.unravel_index(int(np.argmax(dev)), dev.shape)
        raise NotNormalized(f"block (k={k}, k'={kp}) sums to {sums[k, kp]!r}")
    arr.setflags(write=False)
    return Behavior(scenario, arr)


def behavior_from_array(arr: np.ndarray) -> Behavior:
    """Build from an array already shaped ``(K+1, K+1, 2, 2)``."""
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 4 or arr.shape[0] != arr.shape[1] or arr.shape[2:] != (2, 2) or arr.shape[0] < 2:
        raise WrongLength(f"expected shape (K+1, K+1, 2, 2), got {arr.shape}")
    return behavior_from_table(arr.shape[0] - 1, arr.reshape(-1))


def behavior_from_json(data: str | dict) -> Behavior:
    if isinstance(data, str):
        data = json.loads(data)
    order = data.get("order", WIRE_ORDER)
    if order != WIRE_ORDER:
        raise DomainError(f"unsupported entry order {order!r}; expected {WIRE_ORDER!r}")
    return behavior_from_table(data["k"], data["table"])


def uniform_behavior(k_param: int) -> Behavior:
    n = Scenario(k_param).n_settings
    return behavior_from_array(np.full((n, n, 2, 2), 0.25))


def mix(behaviors: Sequence[Behavior], weights: Iterable[float]) -> Behavior:
    """Convex combination; weights are renormalized to sum to one."""
    w = np.asarray(list(weights), dtype=float)
    if len(behaviors) == 0 or w.size != len(behaviors):
        raise WrongLength("need one weight per behavior")
    if np.any(w < 0) or w.sum() <= 0:
        raise DomainError("weights must be non-negative with positive sum")
    K = behaviors[0].k_param
    if any(b.k_param != K for b in behaviors):
        raise DomainError("all behaviors must share the same K")
    w = w / w.sum()
    table = np.tensordot(w, np.stack([b.table for b in behaviors]), axes=1)
    return behavior_from_array(table)


def swap_parties(b: Behavior) -> Behavior:
    """Relabel ``P_{kk'}^{ij} -> P_{k'k}^{ji}`` (exchange the roles of A and B)."""
    return behavior_from_array(np.transpose(b.table, (1, 0, 3, 2)))


def _check_setting(b: Behavior, *settings: int) -> None:
    n = b.scenario.n_settings
    for s in settings:
        if not 0 <= s < n:
            raise SettingOutOfRange(f"setting {s} outside 0..{n - 1}")


# evaluation ---------------------------------------------------------------


def correlation(b: Behavior, k: int, k_prime: int) -> float:
    """``E(A_k, B_k') = P++ + P-- - P+- - P-+``."""
    _check_setting(b, k, k_prime)
    blk = b.table[k, k_prime]
    return float(blk[0, 0] + blk[1, 1] - blk[0, 1] - blk[1, 0])


def chsh_k(b: Behavior) -> float:
    return float(sum(s * correlation(b, k, kp) for k, kp, s in chsh_terms(b.k_param)))


def ch_values(b: Behavior) -> tuple[float, float]:
    """Left-hand sides of the all-plus and all-minus chained CH inequalities."""
    K = b.k_param
    t = b.table
    ch_plus = t[K, K, 0, 0] - t[0, 0, 0, 0]
    ch_minus = t[K, K, 1, 1] - t[0, 0, 1, 1]
    for k in range(1, K + 1):
        ch_plus -= t[k, k - 1, 0, 1] + t[k - 1, k, 1, 0]
        ch_minus -= t[k, k - 1, 1, 0] + t[k - 1, k, 0, 1]
    return float(ch_plus), float(ch_minus)


class NsConstraint(NamedTuple):
    """Marginal equality: ``party``'s setting/outcome marginal, compared across two remote settings."""

    party: str
    setting: int
    outcome: int
    remote: tuple[int, int]

    def label(self) -> str:
        other = "B" if self.party == "A" else "A"
        r0, r1 = self.remote
        return f"P({self.party}{self.setting}={self.outcome:+d}) | {other}{r0} vs {other}{r1}"


@dataclass(frozen=True)
class NsReport:
    max_residual: float
    worst_constraint: NsConstraint

    def holds(self, tol: float = ANALYSIS_TOL) -> bool:
        return self.max_residual <= tol


def _marginal_spread(marg: np.ndarray, party: str) -> tuple[float, NsConstraint]:
    # marg[s, m, o]: marginal of own setting s, outcome o, measured with remote setting m
    spread = marg.max(axis=1) - marg.min(axis=1)
    s, o = np.unravel_index(int(np.argmax(spread)), spread.shape)
    lo, hi = int(np.argmin(marg[s, :, o])), int(np.argmax(marg[s, :, o]))
    if lo == hi:
        lo, hi = 0, 1
    return float(spread[s, o]), NsConstraint(party, int(s), OUTCOMES[o], (min(lo, hi), max(lo, hi)))


def ns_residual(b: Behavior) -> NsReport:
    """Largest violation over every pairwise marginal equality of the NS conditions."""
    alice = b.table.sum(axis=3)  # [k, k', i]
    bob = np.transpose(b.table.sum(axis=2), (1, 0, 2))  # [k', k, j]
    ra, ca = _marginal_spread(alice, "A")
    rb, cb = _marginal_spread(bob, "B")
    return NsReport(ra, ca) if ra >= rb else NsReport(rb, cb)


@dataclass(frozen=True)
class HardyReport:
    p_k: float
    max_zero_violation: float
    zero_terms: tuple[tuple[str, float], ...]

    def holds(self, tol: float = ANALYSIS_TOL) -> bool:
        return self.max_zero_violation <= tol


def hardy_report(b: Behavior) -> HardyReport:
    zeros = tuple((idx.label(), b[idx]) for idx in hardy_zero_indices(b.k_param))
    K = b.k_param
    return HardyReport(
        p_k=b.p(K, K, +1, +1),
        max_zero_violation=max(v for _, v in zeros),
        zero_terms=zeros,
    )


def cere2_sides(b: Behavior) -> tuple[float, float]:
    """Both sides of ``P_KK^{--} = P_K + P_00^{--} + sum_k (P_{k,k-1}^{-+} + P_{k-1,k}^{+-})``."""
    K = b.k_param
    t = b.table
    lhs = t[K, K, 1, 1]
    rhs = t[K, K, 0, 0] + t[0, 0, 1, 1]
    for k in range(1, K + 1):
        rhs += t[k, k - 1, 1, 0] + t[k - 1, k, 0, 1]
    return float(lhs), float(rhs)


def relation_residuals(b: Behavior) -> tuple[float, float]:
    """``(|CHSH_K - 2K - 4 CH_K|, |lhs - rhs| of the Hardy-zero relation)``.

    The first vanishes for every non-signaling behavior.  The second is only
    guaranteed to vanish when the Hardy zeros hold as well; it is reported
    regardless.
    """
    K = b.k_param
    ch_plus, _ = ch_values(b)
    lhs, rhs = cere2_sides(b)
    return abs(chsh_k(b) - 2 * K - 4 * ch_plus), abs(lhs - rhs)


def eq8_residual(b: Behavior) -> float:
    """``|CHSH_K - 2K - 4 P_K|``: zero for NS behaviors satisfying the Hardy zeros."""
    K = b.k_param
    return abs(chsh_k(b) - 2 * K - 4 * b.p(K, K, +1, +1))


def relation_error_constant(k_param: int) -> int:
    """``C`` with ``|CHSH_K - 2K - 4 P_K| <= C * eps`` whenever both the NS
    residual and every Hardy zero are at most ``eps``.

    ``CHSH_K - 2K - 4 CH_K = 2 (CH^- - CH^+)`` telescopes into ``2(K+1)``
    marginal differences (each at most ``eps``), contributing ``4(K+1)``;
    ``P_K - CH_K`` is the sum of the ``2K+1`` zero terms, contributing
    ``4(2K+1)``.  Total ``12K + 8``.
    """
    K = Scenario(k_param).k_param
    return 12 * K + 8
