"""Formal powers and truncated spectral-parameter power series.

Given a Polya factorization with factors b_0..b_n and a weight r, the
solutions of L y = lambda r y split, for each k in 1..n, into series

    u_k(x; lambda) = b_0(x) * sum_m P_k^(m)(x) lambda^m / (m n + k - 1)!

whose coefficients, the formal powers, are built by recursive integration.
This module tabulates them (in the secondary indexing X_k^(j), which walks
one integration at a time), evaluates truncated series and their derivatives
through order n-1, and extracts the lambda-independent initial data at the
basepoint.

For the operator D^n with unit weight and basepoint 0, the formal powers are
literally the monomials: X_k^(j) = x^j, so u_k is the truncated expansion of
the usual power-series solution; that special case doubles as the main test
oracle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import TruncationWarning
from .mesh import Mesh, SampledFunction, cumulative_integral, differentiate, ones

if TYPE_CHECKING:  # import only for annotations, the dependency is one-way
    from .factorization import PolyaFactorization

#: Tail ratios above this trigger a TruncationWarning.
TAIL_WARN = 1e-12


def rising_factorial(x: float, n: int) -> float:
    """x (x+1) ... (x+n-1); the empty product for n = 0."""
    out = 1.0
    for t in range(n):
        out *= x + t
    return out


@dataclass(frozen=True)
class DerivativeCoeffs:
    """Triangular table A[ell][alpha] of derivative coefficients.

    Row ell expresses the ell-th derivative of b_0 times an iterated integral
    as a combination of shallower iterated integrals; the table is the same
    for every solution index, so one triangle serves all of u_1..u_n. Built
    through row n-1.

    The diagonal A[ell][ell] is the product b_0 b_1 ... b_ell, nonvanishing
    whenever the factorization exists.
    """

    table: tuple[tuple[SampledFunction, ...], ...]

    @property
    def rows(self) -> int:
        return len(self.table)

    def at(self, ell: int, alpha: int) -> SampledFunction:
        return self.table[ell][alpha]


def compute_A(fac: "PolyaFactorization") -> DerivativeCoeffs:
    """Fill the derivative-coefficient triangle for rows 0..n-1.

    Row 0 is b_0. Each next row: the alpha = 0 column is the derivative of
    the entry above (taken from the directly tabulated derivatives of b_0),
    the diagonal multiplies the previous diagonal by the next factor, and
    interior entries add the finite-difference derivative of the entry above
    to the left neighbor above times its factor. With rows capped at n-1 the
    factor indices stay within b_0..b_{n-1} (the padding convention for
    deeper tables never engages).
    """
    n = fac.n
    b = fac.b
    rows: list[list[SampledFunction]] = [[fac.b_derivs[0][0]]]
    for ell in range(1, n):
        prev = rows[ell - 1]
        row: list[SampledFunction] = [fac.b_derivs[0][ell]]
        for alpha in range(1, ell):
            row.append(differentiate(prev[alpha], 1) + prev[alpha - 1] * b[alpha])
        row.append(prev[ell - 1] * b[ell])
        rows.append(row)
    return DerivativeCoeffs(tuple(tuple(r) for r in rows))


@dataclass(frozen=True)
class FormalPowerTable:
    """All secondary formal powers X_k^(j) for k = 1..n, j = 0..M n + k - 1.

    ``x[k - 1][j]`` holds X_k^(j). The main formal power P_k^(m) is the entry
    at j = m n + k - 1. ``weight`` is the r used to build the table.
    """

    n: int
    truncation: int
    weight: SampledFunction
    x: tuple[tuple[SampledFunction, ...], ...]

    @property
    def mesh(self) -> Mesh:
        return self.weight.mesh

    def secondary(self, k: int, j: int) -> SampledFunction:
        return self.x[k - 1][j]

    def main(self, k: int, m: int) -> SampledFunction:
        return self.x[k - 1][m * self.n + k - 1]


def formal_powers(fac: "PolyaFactorization", r: SampledFunction,
                  truncation: int) -> FormalPowerTable:
    """Tabulate the secondary formal powers by recursive integration.

    X_k^(0) = 1; each X_k^(j) is j times the cumulative integral of a factor
    times X_k^(j-1). The factor cycles through the b's by the offset of j
    from k modulo n, and at the wrap (j congruent to k mod n) it is
    b_n b_0 r, which is where the weight enters.
    """
    n = fac.n
    if truncation < 0:
        raise ValueError("truncation order must be nonnegative")
    if r.mesh != fac.mesh:
        raise ValueError("weight and factorization live on different meshes")
    wrap = fac.b[n] * fac.b[0] * r
    ks: list[tuple[SampledFunction, ...]] = []
    for k in range(1, n + 1):
        xs: list[SampledFunction] = [ones(fac.mesh)]
        for j in range(1, truncation * n + k):
            step = (k - j) % n
            mult = wrap if step == 0 else fac.b[step]
            xs.append(float(j) * cumulative_integral(mult * xs[j - 1]))
        ks.append(tuple(xs))
    return FormalPowerTable(n, truncation, r, tuple(ks))


# -- series evaluation ---------------------------------------------------------

def _kahan_add(s: np.ndarray, comp: np.ndarray, term: np.ndarray) -> None:
    y = term - comp
    t = s + y
    comp[:] = (t - s) - y
    s[:] = t


def _consecutive_product(lo: int, hi: int) -> float:
    """Product of the integers lo..hi inclusive (1.0 when empty)."""
    out = 1.0
    for t in range(lo, hi + 1):
        out *= t
    return out


def tail_ratio(table: FormalPowerTable, k: int, lam: complex) -> float:
    """Max modulus of the last series term relative to the partial sum's."""
    _, ratio = _solution_sum(table, k, lam)
    return ratio


def _solution_sum(table: FormalPowerTable, k: int,
                  lam: complex) -> tuple[np.ndarray, float]:
    n, M = table.n, table.truncation
    mesh = table.mesh
    s = np.zeros(mesh.n, dtype=np.complex128)
    comp = np.zeros(mesh.n, dtype=np.complex128)
    c = 1.0 / math.factorial(k - 1)
    last = 0.0
    for m in range(M + 1):
        term = c * table.x[k - 1][m * n + k - 1].values
        _kahan_add(s, comp, term)
        last = float(np.max(np.abs(term)))
        if m < M:
            c = c * lam / _consecutive_product(m * n + k, (m + 1) * n + k - 1)
    top = float(np.max(np.abs(s)))
    ratio = math.inf if top == 0.0 and last > 0.0 else (last / top if top else 0.0)
    return s, ratio


def evaluate_solution(table: FormalPowerTable, b0: SampledFunction, k: int,
                      lam: complex) -> SampledFunction:
    """Truncated series solution u_k(.; lambda).

    Terms are accumulated in ascending order with compensated summation; the
    per-term coefficients lambda^m / (m n + k - 1)! advance by consecutive-
    factorial ratios, so nothing overflows even when M n is large. At
    lambda = 0 the result reduces to b_0 times the (k-1)-fold iterated
    integral, the k-th element of the homogeneous solution family.

    Warns with TruncationWarning when the last term's max modulus exceeds
    1e-12 of the partial sum's.
    """
    if not 1 <= k <= table.n:
        raise ValueError(f"solution index k={k} outside 1..{table.n}")
    s, ratio = _solution_sum(table, k, lam)
    if ratio > TAIL_WARN:
        warnings.warn(
            f"series tail for k={k}, lambda={lam:g} has relative size "
            f"{ratio:.2e}; increase the truncation order",
            TruncationWarning, stacklevel=2)
    return SampledFunction(b0.mesh, b0.values * s)


def evaluate_derivatives(table: FormalPowerTable, coeffs: DerivativeCoeffs,
                         k: int, lam: complex, ell: int) -> SampledFunction:
    """The ell-th derivative of u_k(.; lambda) for 1 <= ell <= n-1.

    Assembled from the derivative-coefficient triangle and shallower formal
    powers rather than finite differences: each row-ell term pairs
    A[ell][alpha] with X_k at index m n + k - alpha - 1 and the coefficient
    lambda^m / (m n + k - alpha - 1)!, which is the rising-factorial prefactor
    folded into the reciprocal factorial.
    """
    n, M = table.n, table.truncation
    if not 1 <= k <= n:
        raise ValueError(f"solution index k={k} outside 1..{n}")
    if not 1 <= ell <= n - 1:
        raise ValueError(f"derivative order {ell} outside 1..{n - 1}")
    mesh = table.mesh
    s = np.zeros(mesh.n, dtype=np.complex128)
    comp = np.zeros(mesh.n, dtype=np.complex128)
    for alpha in range(ell + 1):
        a_vals = coeffs.at(ell, alpha).values
        if k - alpha - 1 >= 0:
            m0 = 0
            c = complex(1.0 / math.factorial(k - alpha - 1))
        else:
            m0 = 1
            c = lam / math.factorial(n + k - alpha - 1)
        for m in range(m0, M + 1):
            idx = m * n + k - alpha - 1
            _kahan_add(s, comp, c * a_vals * table.x[k - 1][idx].values)
            if m < M:
                c = c * lam / _consecutive_product(
                    m * n + k - alpha, (m + 1) * n + k - alpha - 1)
    return SampledFunction(mesh, s)


def initial_values(coeffs: DerivativeCoeffs, b0: SampledFunction,
                   k: int) -> np.ndarray:
    """Basepoint data (u_k(x0), u_k'(x0), ..., u_k^(n-1)(x0)).

    Independent of lambda: derivatives below order k-1 vanish, and from
    order k-1 on the value is A[ell][k-1] at the basepoint. Stacking these
    vectors over k gives a lower-triangular matrix whose diagonal is the
    running product (b_0 ... b_{k-1})(x0).
    """
    n = coeffs.rows
    if not 1 <= k <= n:
        raise ValueError(f"solution index k={k} outside 1..{n}")
    i0 = b0.mesh.i0
    out = np.zeros(n, dtype=np.complex128)
    if k == 1:
        out[0] = b0.values[i0]
    for ell in range(max(1, k - 1), n):
        out[ell] = coeffs.at(ell, k - 1).values[i0]
    return out


def initial_matrix(coeffs: DerivativeCoeffs, b0: SampledFunction) -> np.ndarray:
    """Lower-triangular matrix T[ell, k-1] = u_k^(ell)(x0) for all k."""
    n = coeffs.rows
    return np.column_stack([initial_values(coeffs, b0, k) for k in range(1, n + 1)])


def series_coefficients_at_node(table: FormalPowerTable, coeffs: DerivativeCoeffs,
                                b0: SampledFunction, k: int, ell: int,
                                node: int) -> np.ndarray:
    """Coefficients in lambda of u_k^(ell) frozen at one mesh node.

    Returns c with u_k^(ell)(x_node; lambda) = sum_m c[m] lambda^m, m <= M.
    Used by the spectral layer to turn boundary data into polynomials in the
    spectral parameter. Reciprocal factorials are accumulated by division so
    large indices underflow to zero instead of overflowing.
    """
    n, M = table.n, table.truncation
    jmax = M * n + k - 1
    rf = np.empty(jmax + 1)
    rf[0] = 1.0
    for j in range(1, jmax + 1):
        rf[j] = rf[j - 1] / j
    out = np.zeros(M + 1, dtype=np.complex128)
    if ell == 0:
        scale = b0.values[node]
        for m in range(M + 1):
            j = m * n + k - 1
            out[m] = scale * rf[j] * table.x[k - 1][j].values[node]
        return out
    for alpha in range(ell + 1):
        a = coeffs.at(ell, alpha).values[node]
        for m in range(M + 1):
            j = m * n + k - alpha - 1
            if j < 0:
                continue
            out[m] += a * rf[j] * table.x[k - 1][j].values[node]
    return out


class SPPSSolution:
    """One series solution u_k with cached evaluations keyed by lambda."""

    def __init__(self, table: FormalPowerTable, coeffs: DerivativeCoeffs,
                 b0: SampledFunction, k: int):
        self.table = table
        self.coeffs = coeffs
        self.b0 = b0
        self.k = k
        self._values: dict[complex, SampledFunction] = {}
        self._derivs: dict[tuple[complex, int], SampledFunction] = {}

    def value(self, lam: complex) -> SampledFunction:
        lam = complex(lam)
        if lam not in self._values:
            self._values[lam] = evaluate_solution(self.table, self.b0, self.k, lam)
        return self._values[lam]

    def derivative(self, lam: complex, ell: int) -> SampledFunction:
        lam = complex(lam)
        key = (lam, ell)
        if key not in self._derivs:
            self._derivs[key] = evaluate_derivatives(
                self.table, self.coeffs, self.k, lam, ell)
        return self._derivs[key]

    def initial_values(self) -> np.ndarray:
        return initial_values(self.coeffs, self.b0, self.k)

    def tail_ratio(self, lam: complex) -> float:
        return tail_ratio(self.table, self.k, complex(lam))


def solution_family(table: FormalPowerTable, coeffs: DerivativeCoeffs,
                    b0: SampledFunction) -> list[SPPSSolution]:
    """The full basis u_1..u_n as cached series solutions."""
    return [SPPSSolution(table, coeffs, b0, k) for k in range(1, table.n + 1)]
