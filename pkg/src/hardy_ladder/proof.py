"""Exact certificates that the ladder relations follow from non-signaling.

Everything here runs on :class:`fractions.Fraction`; nothing is ever
compared against a floating tolerance.

Two independent routes establish

    P_KK^{--} - P_KK^{++} - P_00^{--} - sum_k (P_{k,k-1}^{-+} + P_{k-1,k}^{+-}) = 0

under the Hardy zeros:

* :func:`ladder_selection` rebuilds the two families of ``2K+2`` reduced
  marginal equalities whose sum (halved) is exactly that expression;
* :func:`span_coefficients` runs sparse rational elimination and proves the
  expression lies in the span of the NS equalities and the zero constraints,
  without knowing the pattern.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple, Sequence

from .behavior import Behavior, ProbIndex, Scenario, chsh_terms, hardy_zero_indices
from .errors import BudgetExceeded, DerivationFailed

PROOF_MAX_K = 64

ZERO = Fraction(0)
ONE = Fraction(1)


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


class LinearExpr:
    """Affine form ``sum_c coeff[c] * P_c + constant`` with exact rational coefficients."""

    __slots__ = ("_coeffs", "_constant")

    def __init__(self, coefficients: Mapping[ProbIndex, Fraction | int] | None = None, constant=0):
        coeffs = {}
        for idx, c in (coefficients or {}).items():
            c = _frac(c)
            if c:
                coeffs[ProbIndex(*idx)] = c
        self._coeffs = coeffs
        self._constant = _frac(constant)

    @classmethod
    def var(cls, k: int, kp: int, i: int, j: int, coeff=1) -> "LinearExpr":
        return cls({ProbIndex(k, kp, i, j): coeff})

    @property
    def coefficients(self) -> Mapping[ProbIndex, Fraction]:
        return MappingProxyType(self._coeffs)

    @property
    def constant(self) -> Fraction:
        return self._constant

    def is_zero(self) -> bool:
        return not self._coeffs and self._constant == 0

    def __add__(self, other: "LinearExpr") -> "LinearExpr":
        out = dict(self._coeffs)
        for idx, c in other._coeffs.items():
            out[idx] = out.get(idx, ZERO) + c
        return LinearExpr(out, self._constant + other._constant)

    def __neg__(self) -> "LinearExpr":
        return self * -1

    def __sub__(self, other: "LinearExpr") -> "LinearExpr":
        return self + (-other)

    def __mul__(self, s) -> "LinearExpr":
        s = _frac(s)
        return LinearExpr({idx: c * s for idx, c in self._coeffs.items()}, self._constant * s)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinearExpr):
            return NotImplemented
        return self._coeffs == other._coeffs and self._constant == other._constant

    def __hash__(self) -> int:
        return hash((frozenset(self._coeffs.items()), self._constant))

    def reduce_zeros(self, zeros: Iterable[ProbIndex]) -> "LinearExpr":
        """Drop every term whose probability is constrained to vanish."""
        zs = set(zeros)
        return LinearExpr({i: c for i, c in self._coeffs.items() if i not in zs}, self._constant)

    def evaluate(self, b: Behavior) -> float:
        return float(self._constant) + sum(float(c) * b[idx] for idx, c in self._coeffs.items())

    def __repr__(self) -> str:
        if self.is_zero():
            return "LinearExpr(0)"
        parts = [f"{c}*{idx.short()}" for idx, c in sorted(self._coeffs.items())]
        if self._constant:
            parts.append(str(self._constant))
        return "LinearExpr(" + " + ".join(parts) + ")"


def _sum_vars(indices: Iterable[tuple[int, int, int, int]]) -> LinearExpr:
    return LinearExpr({ProbIndex(*i): 1 for i in indices})


class EqualityId(NamedTuple):
    """A non-signaling marginal equality ``marginal(lhs_remote) = marginal(rhs_remote)``.

    For ``party == "A"`` the marginal is ``sum_j P(A_setting = outcome, B_remote = j)``;
    for ``party == "B"`` it is ``sum_i P(A_remote = i, B_setting = outcome)``.
    """

    party: str
    setting: int
    outcome: int
    lhs_remote: int
    rhs_remote: int

    def __str__(self) -> str:
        sign = "+" if self.outcome > 0 else "-"
        return f"NS-{self.party}{self.setting}{sign}[{self.lhs_remote}={self.rhs_remote}]"

    def marginal(self, remote: int) -> LinearExpr:
        if self.party == "A":
            return _sum_vars((self.setting, remote, self.outcome, j) for j in (1, -1))
        return _sum_vars((remote, self.setting, i, self.outcome) for i in (1, -1))

    def expr(self) -> LinearExpr:
        return self.marginal(self.lhs_remote) - self.marginal(self.rhs_remote)

    def mirror(self) -> "EqualityId":
        return EqualityId("B" if self.party == "A" else "A", *self[1:])

    def adjacent_decomposition(self) -> list[tuple["EqualityId", int]]:
        """Telescoping expansion into adjacent-remote equalities from :func:`ns_system`."""
        lo, hi = sorted((self.lhs_remote, self.rhs_remote))
        sign = 1 if self.lhs_remote == lo else -1
        return [(EqualityId(self.party, self.setting, self.outcome, m, m + 1), sign) for m in range(lo, hi)]


def ns_equalities(k_param: int) -> list[EqualityId]:
    """All ``4K(K+1)`` adjacent-pair NS equalities.

    Order: Alice rows for outcome +1 (settings 0..K), outcome -1, then Bob's
    rows likewise; inside a row the remote pairs ``(0,1), (1,2), ...``.
    """
    K = Scenario(k_param).k_param
    return [
        EqualityId(party, s, o, m, m + 1)
        for party in ("A", "B")
        for o in (1, -1)
        for s in range(K + 1)
        for m in range(K)
    ]


def ns_system(k_param: int) -> list[LinearExpr]:
    return [e.expr() for e in ns_equalities(k_param)]


def hardy_zero_set(k_param: int) -> list[ProbIndex]:
    return hardy_zero_indices(k_param)


def cere2_target(k_param: int) -> LinearExpr:
    """``lhs - rhs`` of the relation that must follow from NS and the Hardy zeros."""
    K = Scenario(k_param).k_param
    expr = LinearExpr.var(K, K, -1, -1) - LinearExpr.var(K, K, 1, 1) - LinearExpr.var(0, 0, -1, -1)
    for k in range(1, K + 1):
        expr = expr - LinearExpr.var(k, k - 1, -1, 1) - LinearExpr.var(k - 1, k, 1, -1)
    return expr


def cere2_rhs_indices(k_param: int) -> list[ProbIndex]:
    """The ``2K+2`` probabilities on the right-hand side of the target relation."""
    K = Scenario(k_param).k_param
    out = [ProbIndex(K, K, 1, 1), ProbIndex(0, 0, -1, -1)]
    for k in range(1, K + 1):
        out += [ProbIndex(k, k - 1, -1, 1), ProbIndex(k - 1, k, 1, -1)]
    return out


def cere3_target(k_param: int) -> LinearExpr:
    """``CHSH_K - 2K - 4 CH_K`` as an affine form in the probabilities."""
    K = Scenario(k_param).k_param
    expr = LinearExpr(constant=-2 * K)
    for k, kp, s in chsh_terms(K):
        corr = LinearExpr({(k, kp, 1, 1): 1, (k, kp, -1, -1): 1, (k, kp, 1, -1): -1, (k, kp, -1, 1): -1})
        expr = expr + corr * s
    ch = LinearExpr.var(K, K, 1, 1) - LinearExpr.var(0, 0, 1, 1)
    for k in range(1, K + 1):
        ch = ch - LinearExpr.var(k, k - 1, 1, -1) - LinearExpr.var(k - 1, k, -1, 1)
    return expr - ch * 4


def normalization_system(k_param: int) -> list[LinearExpr]:
    n = Scenario(k_param).n_settings
    return [
        LinearExpr({(k, kp, i, j): 1 for i in (1, -1) for j in (1, -1)}, constant=-1)
        for k in range(n)
        for kp in range(n)
    ]


# pattern route --------------------------------------------------------------


def ladder_selection(k_param: int) -> tuple[list[EqualityId], list[EqualityId]]:
    """The two families of ``2K+2`` marginal equalities, in relationship order.

    Alice's family: for each setting ``k``, outcome +1 compares remote
    ``max(k-1, 0)`` with ``min(k+1, K)``; outcome -1 compares ``min(k+1, K)``
    with ``max(k-1, 0)``.  Bob's family is its mirror image.
    """
    K = Scenario(k_param).k_param
    fam_a = [EqualityId("A", k, 1, max(k - 1, 0), min(k + 1, K)) for k in range(K + 1)]
    fam_a += [EqualityId("A", k, -1, min(k + 1, K), max(k - 1, 0)) for k in range(K + 1)]
    return fam_a, [e.mirror() for e in fam_a]


@dataclass(frozen=True)
class EliminationResult:
    in_span: bool
    coefficients: Mapping[int, Fraction] = field(default_factory=dict)
    remainder: LinearExpr = field(default_factory=LinearExpr)


@dataclass(frozen=True)
class ProofCertificate:
    k_param: int
    selected: tuple[tuple[EqualityId, Fraction], ...]
    residual: LinearExpr
    elimination: EliminationResult | None = None

    @property
    def verified(self) -> bool:
        return self.residual.is_zero() and (self.elimination is None or self.elimination.in_span)

    def combination(self) -> LinearExpr:
        total = LinearExpr()
        for eid, m in self.selected:
            total = total + eid.expr() * m
        return total

    def adjacent_terms(self) -> dict[EqualityId, Fraction]:
        """The same combination written over :func:`ns_equalities` only."""
        out: dict[EqualityId, Fraction] = {}
        for eid, m in self.selected:
            for adj, s in eid.adjacent_decomposition():
                out[adj] = out.get(adj, ZERO) + m * s
        return {e: c for e, c in out.items() if c}

    def evaluate(self, b: Behavior) -> float:
        """Value of the certified NS combination on a (possibly noisy) behavior."""
        return self.combination().evaluate(b)

    def to_json_dict(self) -> dict:
        return {
            "k": self.k_param,
            "terms": [
                {"equality": str(eid), "multiplier": f"{m.numerator}/{m.denominator}"} for eid, m in self.selected
            ],
            "verified": self.verified,
            "elimination_verified": None if self.elimination is None else self.elimination.in_span,
        }


# elimination route ----------------------------------------------------------


def _encode(expr: LinearExpr, n: int) -> dict[int, Fraction]:
    # probability -> non-negative column, constant -> -1 (eliminated last)
    row = {((idx.k * n + idx.kp) * 2 + (idx.i < 0)) * 2 + (idx.j < 0): c for idx, c in expr.coefficients.items()}
    if expr.constant:
        row[-1] = expr.constant
    return row


def _decode(row: Mapping[int, Fraction], n: int) -> LinearExpr:
    coeffs = {}
    for col, c in row.items():
        if col < 0:
            continue
        j = -1 if col & 1 else 1
        i = -1 if (col >> 1) & 1 else 1
        k, kp = divmod(col >> 2, n)
        coeffs[ProbIndex(k, kp, i, j)] = c
    return LinearExpr(coeffs, row.get(-1, ZERO))


def _axpy(row: dict, s: Fraction, other: Mapping) -> None:
    # row += s * other, dropping cancellations
    for key, v in other.items():
        new = row.get(key, ZERO) + s * v
        if new:
            row[key] = new
        else:
            row.pop(key, None)


def span_coefficients(rows: Sequence[LinearExpr], target: LinearExpr, n_settings: int) -> EliminationResult:
    """Decide exactly whether ``target = sum_r c_r rows[r]`` and return one such ``c``.

    Rows are reduced into echelon form keyed on their largest column; each
    pivot row carries its provenance so the final coefficients refer to the
    input rows.
    """
    pivots: dict[int, tuple[dict, dict]] = {}

    def reduce(row: dict, prov: dict) -> None:
        while row:
            col = max(row)
            if col not in pivots:
                return
            prow, pprov = pivots[col]
            s = -row[col]
            _axpy(row, s, prow)
            _axpy(prov, s, pprov)

    for r, expr in enumerate(rows):
        row, prov = _encode(expr, n_settings), {r: ONE}
        reduce(row, prov)
        if row:
            col = max(row)
            inv = 1 / row[col]
            pivots[col] = ({c: v * inv for c, v in row.items()}, {c: v * inv for c, v in prov.items()})

    row, prov = _encode(target, n_settings), {}
    reduce(row, prov)
    if row:
        return EliminationResult(False, {}, _decode(row, n_settings))
    # target + sum(prov_r * rows_r) == 0
    return EliminationResult(True, {r: -c for r, c in prov.items() if c}, LinearExpr())


def _check_budget(k_param: int) -> int:
    K = Scenario(k_param).k_param
    if K > PROOF_MAX_K:
        raise BudgetExceeded(f"K={K} exceeds exact-arithmetic budget K <= {PROOF_MAX_K}")
    return K


def verify_cere2_by_elimination(k_param: int) -> EliminationResult:
    """Span membership of the target in NS equalities plus unit zero constraints."""
    K = _check_budget(k_param)
    rows = ns_system(K) + [LinearExpr({z: 1}) for z in hardy_zero_set(K)]
    result = span_coefficients(rows, cere2_target(K), K + 1)
    if result.in_span:
        combo = LinearExpr()
        for r, c in result.coefficients.items():
            combo = combo + rows[r] * c
        if combo != cere2_target(K):
            raise DerivationFailed(f"elimination coefficients do not reproduce the target for K={K}")
    return result


def certify_cere3(k_param: int) -> EliminationResult:
    """``CHSH_K - 2K - 4 CH_K`` as an exact combination of NS equalities and normalization."""
    K = _check_budget(k_param)
    rows = ns_system(K) + normalization_system(K)
    return span_coefficients(rows, cere3_target(K), K + 1)


def derive_cere2(k_param: int, check_span: bool = True) -> ProofCertificate:
    """Certificate: half the sum of both selected families, reduced modulo the
    Hardy zeros, is identically the target relation."""
    K = _check_budget(k_param)
    fam_a, fam_b = ladder_selection(K)
    half = Fraction(1, 2)
    selected = tuple((e, half) for e in fam_a + fam_b)
    zeros = hardy_zero_set(K)
    combo = LinearExpr()
    for eid, m in selected:
        combo = combo + eid.expr().reduce_zeros(zeros) * m
    residual = combo - cere2_target(K)
    if not residual.is_zero():
        raise DerivationFailed(f"pattern certificate leaves residual {residual!r} for K={K}")
    elimination = None
    if check_span:
        elimination = verify_cere2_by_elimination(K)
        if not elimination.in_span:
            raise DerivationFailed(f"target not in NS span for K={K}: remainder {elimination.remainder!r}")
    return ProofCertificate(K, selected, residual, elimination)
