"""Initial-value propagation, boundary conditions, and eigenvalue search.

The solution family attached to a factorized operator turns both problem
classes into small dense linear algebra:

* an initial-value problem is a lower-triangular solve for the combination
  coefficients, because the k-th basis solution has vanishing derivatives
  below order k - 1 at the basepoint;
* a two-point eigenvalue problem reduces to the roots of the determinant of
  an n-by-n matrix whose entries are polynomials in the spectral parameter,
  assembled from the per-node series coefficients of the basis solutions.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    RegionTruncationError,
    TriangularDefectError,
    TruncationWarning,
)
from .factorization import (
    OperatorSpec,
    PolyaFactorization,
    SolutionSystem,
    build_seed_system,
    operator_residual,
    polya_factors,
    wronskians,
)
from .mesh import Mesh, SampledFunction
from .powers import (
    DerivativeCoeffs,
    FormalPowerTable,
    compute_A,
    evaluate_derivatives,
    evaluate_solution,
    formal_powers,
    initial_matrix,
    series_coefficients_at_node,
    tail_ratio,
)

DIAGONAL_FLOOR = 1e-12
COEFF_TRIM = 1e-13


@dataclass(frozen=True)
class Workspace:
    """Everything needed to evaluate solutions of L y = lam r y.

    Bundles the operator, its factorization, the formal power table, and the
    derivative-coefficient triangle. Build one with :func:`build_workspace`.
    """

    op: OperatorSpec
    fac: PolyaFactorization
    table: FormalPowerTable
    coeffs: DerivativeCoeffs
    seed: SolutionSystem

    @property
    def mesh(self) -> Mesh:
        return self.op.mesh

    @property
    def n(self) -> int:
        return self.op.n

    @property
    def b0(self) -> SampledFunction:
        return self.fac.b[0]

    @property
    def truncation(self) -> int:
        return self.table.truncation


def build_workspace(
    op: OperatorSpec,
    seed: SolutionSystem | None = None,
    truncation: int = 30,
    rng_seed: int = 0,
    max_retries: int = 25,
) -> Workspace:
    """Factorize the operator and precompute its formal power table.

    Parameters
    ----------
    op : OperatorSpec
        Operator coefficients and weight on a shared mesh.
    seed : SolutionSystem, optional
        A verified solution system for ``L y = 0``. When omitted, one is
        constructed by random recombination of iterated integrals.
    truncation : int
        Number of series terms in the spectral parameter.
    rng_seed, max_retries :
        Passed through to the seed builder when ``seed`` is omitted.
    """
    if seed is None:
        seed = build_seed_system(
            op, rng_seed=rng_seed, max_retries=max_retries,
            truncation=truncation)
    fac = polya_factors(wronskians(seed))
    table = formal_powers(fac, op.r, truncation)
    coeffs = compute_A(fac)
    return Workspace(op, fac, table, coeffs, seed)


def with_truncation(ws: Workspace, truncation: int) -> Workspace:
    """Same workspace with the power table rebuilt at another truncation."""
    if truncation == ws.truncation:
        return ws
    table = formal_powers(ws.fac, ws.op.r, truncation)
    return replace(ws, table=table)


# ---------------------------------------------------------------------------
# initial-value problems
# ---------------------------------------------------------------------------

def solve_initial_value(ws: Workspace, values, lam: complex) -> SampledFunction:
    """Solution with prescribed derivatives of order 0..n-1 at the basepoint.

    The basis solutions have a lower-triangular matrix of initial values, so
    the combination coefficients come from forward substitution.

    Raises
    ------
    TriangularDefectError
        If a diagonal initial value is numerically zero, which means the
        factorization cannot normalize that basis solution.
    """
    n = ws.n
    vals = np.asarray(values, dtype=complex)
    if vals.shape != (n,):
        raise ValueError(
            f"expected {n} initial values, got shape {vals.shape}")
    mat = initial_matrix(ws.coeffs, ws.b0)
    c = np.zeros(n, dtype=complex)
    for ell in range(n):
        diag = mat[ell, ell]
        if abs(diag) < DIAGONAL_FLOOR:
            raise TriangularDefectError(
                f"initial-value matrix diagonal {ell} is {abs(diag):.3e}; "
                "the factorization is too close to singular at the basepoint")
        c[ell] = (vals[ell] - mat[ell, :ell] @ c[:ell]) / diag
    lam = complex(lam)
    out = None
    for k in range(1, n + 1):
        if c[k - 1] == 0:
            continue
        term = evaluate_solution(ws.table, ws.b0, k, lam) * c[k - 1]
        out = term if out is None else out + term
    if out is None:
        return SampledFunction(ws.mesh, np.zeros(ws.mesh.n, dtype=complex))
    return out


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryConditions:
    """n homogeneous two-point conditions on derivatives of order < n.

    Row i encodes  sum_l left[i, l] y^(l)(x1) + sum_l right[i, l] y^(l)(x2) = 0.
    """

    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        left = np.array(self.left, dtype=complex)
        right = np.array(self.right, dtype=complex)
        if left.ndim != 2 or left.shape != right.shape or \
                left.shape[0] != left.shape[1]:
            raise ValueError(
                "boundary condition arrays must be two square matrices of "
                f"equal size; got {left.shape} and {right.shape}")
        stacked = np.hstack([left, right])
        if np.linalg.matrix_rank(stacked, tol=1e-10) < left.shape[0]:
            raise ValueError("boundary condition rows are linearly dependent")
        left.setflags(write=False)
        right.setflags(write=False)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def n(self) -> int:
        return self.left.shape[0]

    @classmethod
    def separated(cls, n: int, left_orders, right_orders) -> "BoundaryConditions":
        """Conditions fixing single derivatives at each endpoint.

        ``separated(2, [0], [0])`` pins the function value at both ends;
        ``separated(4, [0, 2], [0, 2])`` pins value and second derivative.
        """
        orders = list(left_orders) + list(right_orders)
        if len(orders) != n:
            raise ValueError(
                f"need {n} conditions, got {len(orders)}")
        if any(d < 0 or d >= n for d in orders):
            raise ValueError(f"derivative orders must lie in 0..{n - 1}")
        left = np.zeros((n, n))
        right = np.zeros((n, n))
        for i, d in enumerate(left_orders):
            left[i, d] = 1.0
        for i, d in enumerate(right_orders, start=len(list(left_orders))):
            right[i, d] = 1.0
        return cls(left, right)


def boundary_matrix(ws: Workspace, bc: BoundaryConditions,
                    lam: complex) -> np.ndarray:
    """The n-by-n matrix whose kernel holds eigenfunction coefficients."""
    n = ws.n
    if bc.n != n:
        raise ValueError(f"boundary conditions are {bc.n}-dimensional, "
                         f"operator order is {n}")
    lam = complex(lam)
    first, last = 0, ws.mesh.n - 1
    rows = np.zeros((n, 2 * n), dtype=complex)  # rows[ell] then rows[n+ell]
    for k in range(1, n + 1):
        u = evaluate_solution(ws.table, ws.b0, k, lam)
        rows[0, k - 1] = u.values[first]
        rows[0, n + k - 1] = u.values[last]
        for ell in range(1, n):
            du = evaluate_derivatives(ws.table, ws.coeffs, k, lam, ell)
            rows[ell, k - 1] = du.values[first]
            rows[ell, n + k - 1] = du.values[last]
    mat = bc.left @ rows[:, :n] + bc.right @ rows[:, n:]
    return mat


def eigenfunction(ws: Workspace, bc: BoundaryConditions,
                  lam: complex) -> SampledFunction:
    """Combination of basis solutions closest to satisfying the conditions.

    Takes the right singular vector of the boundary matrix for its smallest
    singular value and normalizes the result so its largest sample is 1.
    """
    mat = boundary_matrix(ws, bc, lam)
    _, _, vh = np.linalg.svd(mat)
    coeff = vh[-1].conj()
    lam = complex(lam)
    acc = np.zeros(ws.mesh.n, dtype=complex)
    for k in range(1, ws.n + 1):
        if coeff[k - 1] == 0:
            continue
        acc += coeff[k - 1] * evaluate_solution(ws.table, ws.b0, k, lam).values
    peak = int(np.argmax(np.abs(acc)))
    if acc[peak] == 0:
        raise TriangularDefectError(
            "candidate eigenfunction is identically zero")
    return SampledFunction(ws.mesh, acc / acc[peak])


# ---------------------------------------------------------------------------
# characteristic function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CharacteristicFunction:
    """Entrywise polynomial form of the boundary matrix.

    ``poly[i, k, m]`` is the coefficient of lam**m in entry (i, k); the
    eigenvalues of the boundary problem are the roots of the determinant.
    """

    poly: np.ndarray

    @property
    def n(self) -> int:
        return self.poly.shape[0]

    @property
    def degree(self) -> int:
        return self.poly.shape[2] - 1

    def matrix(self, lam: complex) -> np.ndarray:
        lams = np.asarray([complex(lam)])
        return self._matrices(lams)[0]

    def _matrices(self, lams: np.ndarray) -> np.ndarray:
        """Stack of boundary matrices, shape (len(lams), n, n)."""
        n = self.n
        out = np.zeros((len(lams), n, n), dtype=complex)
        for i in range(n):
            for k in range(n):
                acc = np.zeros(len(lams), dtype=complex)
                for c in self.poly[i, k][::-1]:
                    acc = acc * lams + c
                out[:, i, k] = acc
        return out

    def det(self, lam: complex) -> complex:
        return complex(np.linalg.det(self.matrix(lam)))

    def det_samples(self, lams) -> np.ndarray:
        lams = np.asarray(lams, dtype=complex)
        return np.linalg.det(self._matrices(lams))

    def det_polynomial(self) -> np.ndarray:
        """Ascending coefficients of det(poly matrix) as one polynomial.

        Expands the determinant over permutations with coefficient
        convolutions for small orders; beyond order 6 the coefficients are
        recovered from samples at roots of unity instead.
        """
        n = self.n
        terms = self.poly.shape[2]
        deg = n * (terms - 1)
        if n <= 6:
            acc = np.zeros(deg + 1, dtype=complex)
            for perm in itertools.permutations(range(n)):
                sign = _permutation_sign(perm)
                prod = np.ones(1, dtype=complex)
                for i, k in enumerate(perm):
                    prod = np.convolve(prod, self.poly[i, k])
                acc[:len(prod)] += sign * prod
            return acc
        count = deg + 1
        sample_points = np.exp(2j * np.pi * np.arange(count) / count)
        vals = self.det_samples(sample_points)
        return np.fft.ifft(vals)[:count]


def _permutation_sign(perm: tuple[int, ...]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def characteristic_polynomials(ws: Workspace,
                               bc: BoundaryConditions) -> CharacteristicFunction:
    """Assemble the boundary matrix as polynomials in the spectral parameter."""
    n = ws.n
    if bc.n != n:
        raise ValueError(f"boundary conditions are {bc.n}-dimensional, "
                         f"operator order is {n}")
    terms = ws.truncation + 1
    first, last = 0, ws.mesh.n - 1
    poly = np.zeros((n, n, terms), dtype=complex)
    for k in range(1, n + 1):
        for ell in range(n):
            cl = series_coefficients_at_node(
                ws.table, ws.coeffs, ws.b0, k, ell, first)
            cr = series_coefficients_at_node(
                ws.table, ws.coeffs, ws.b0, k, ell, last)
            for i in range(n):
                a = bc.left[i, ell]
                c = bc.right[i, ell]
                if a != 0:
                    poly[i, k - 1] += a * cl
                if c != 0:
                    poly[i, k - 1] += c * cr
    return CharacteristicFunction(poly)


# ---------------------------------------------------------------------------
# eigenvalue regions and search options
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """Search region: a real interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)
                and self.lo < self.hi):
            raise ValueError(f"bad interval [{self.lo}, {self.hi}]")

    @property
    def extent(self) -> float:
        return self.hi - self.lo

    def worst_lambda(self) -> complex:
        return complex(self.lo if abs(self.lo) >= abs(self.hi) else self.hi)


@dataclass(frozen=True)
class Disk:
    """Search region: a disk in the complex plane."""

    center: complex
    radius: float

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0
                and np.isfinite(self.center.real)
                and np.isfinite(self.center.imag)):
            raise ValueError(f"bad disk center={self.center} "
                             f"radius={self.radius}")

    @property
    def extent(self) -> float:
        return self.radius

    def worst_lambda(self) -> complex:
        c = complex(self.center)
        if c == 0:
            return complex(self.radius)
        return c * (1.0 + self.radius / abs(c))


@dataclass(frozen=True)
class EigenOptions:
    """Knobs for the eigenvalue search.

    ``boundary_margin`` and ``persistence_tol`` default to scale-aware
    values when left as None. Candidates are accepted only if they survive a
    truncation bump of ``persistence_extra`` terms and if the reconstructed
    eigenfunction drives the equation residual below ``residual_tol``.
    """

    samples: int = 1001
    max_count: int | None = None
    residual_tol: float = 1e-4
    persistence_extra: int = 5
    persistence_tol: float | None = None
    boundary_margin: float | None = None
    imag_noise: float = 1e-10
    tail_error: float = 1e-6
    tail_warn: float = 1e-12

    def margin_for(self, region) -> float:
        if self.boundary_margin is not None:
            return self.boundary_margin
        return 1e-6 * max(1.0, region.extent)

    def persistence_for(self, lam: complex) -> float:
        if self.persistence_tol is not None:
            return self.persistence_tol
        return 1e-7 * max(1.0, abs(lam))


@dataclass(frozen=True)
class Eigenvalue:
    """An accepted eigenvalue with its equation residual."""

    lam: complex
    residual: float


@dataclass(frozen=True)
class EigenResult:
    """Accepted eigenvalues plus rejected candidates with reasons."""

    eigenvalues: tuple[Eigenvalue, ...]
    rejected: tuple[tuple[complex, str], ...]

    @property
    def values(self) -> list[complex]:
        return [e.lam for e in self.eigenvalues]


# ---------------------------------------------------------------------------
# eigenvalue search
# ---------------------------------------------------------------------------

def _check_tail(ws: Workspace, region, options: EigenOptions) -> None:
    lam = region.worst_lambda()
    worst = max(tail_ratio(ws.table, k, lam) for k in range(1, ws.n + 1))
    if worst > options.tail_error:
        raise RegionTruncationError(
            f"series tail ratio {worst:.3e} at lam={lam} exceeds "
            f"{options.tail_error:.1e}; raise the truncation or shrink "
            "the search region")
    if worst > options.tail_warn:
        warnings.warn(
            f"series tail ratio {worst:.3e} at the region boundary; "
            "results there may be inaccurate", TruncationWarning,
            stacklevel=3)


def _bisect_root(fn, lo: float, hi: float, flo: float, fhi: float) -> float:
    """Standard bisection; fn must be real-valued with a sign change."""
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            return mid
        fmid = fn(mid)
        if fmid == 0.0:
            return mid
        if (flo < 0) != (fmid < 0):
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid
        if hi - lo < 1e-15 * max(1.0, abs(lo), abs(hi)):
            return 0.5 * (lo + hi)
    return 0.5 * (lo + hi)


def _real_det(charfn: CharacteristicFunction, imag_noise: float,
              grid: np.ndarray, norm: complex):
    """Samples of the normalized determinant, validated to be real.

    The basis solutions carry an arbitrary (possibly complex) constant change
    of basis from the seed recombination; dividing the determinant by the
    lam-independent determinant of the initial-value matrix removes it, so a
    problem with real data yields a genuinely real function on the line.
    """
    vals = charfn.det_samples(grid) / norm
    scale = np.max(np.abs(vals))
    if scale == 0.0:
        raise ValueError(
            "characteristic determinant vanishes identically on the region; "
            "the boundary conditions do not constrain the problem")
    if np.max(np.abs(vals.imag)) > imag_noise * scale:
        raise ValueError(
            "characteristic determinant is not real on the interval; "
            "search a disk region instead")
    return vals.real


def _interval_candidates(charfn: CharacteristicFunction, region: Interval,
                         options: EigenOptions, norm: complex) -> list[float]:
    margin = options.margin_for(region)
    lo, hi = region.lo + margin, region.hi - margin
    if lo >= hi:
        raise ValueError("interval is narrower than the boundary margin")
    grid = np.linspace(lo, hi, options.samples)
    f = _real_det(charfn, options.imag_noise, grid, norm)

    def fn(x: float) -> float:
        return (charfn.det(x) / norm).real

    roots: list[float] = [float(g) for g, v in zip(grid, f) if v == 0.0]
    for i in range(len(grid) - 1):
        if f[i] == 0.0 or f[i + 1] == 0.0:
            continue
        if (f[i] < 0) != (f[i + 1] < 0):
            roots.append(_bisect_root(fn, float(grid[i]), float(grid[i + 1]),
                                      float(f[i]), float(f[i + 1])))
    return sorted(roots)


def _refine_on(charfn: CharacteristicFunction, lam: float,
               window: float, norm: complex) -> float | None:
    """Root of the refined determinant within +-window, if any."""

    def fn(x: float) -> float:
        return (charfn.det(x) / norm).real

    lo, hi = lam - window, lam + window
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo < 0) == (fhi < 0):
        return None
    return _bisect_root(fn, lo, hi, flo, fhi)


def _disk_candidates(charfn: CharacteristicFunction, region: Disk,
                     options: EigenOptions) -> list[complex]:
    margin = options.margin_for(region)
    scale = max(1.0, abs(region.center) + region.radius)
    coeffs = charfn.det_polynomial()
    scaled = coeffs * scale ** np.arange(len(coeffs))
    top = np.max(np.abs(scaled))
    if top == 0.0:
        raise ValueError(
            "characteristic determinant vanishes identically on the region; "
            "the boundary conditions do not constrain the problem")
    keep = len(scaled)
    while keep > 1 and abs(scaled[keep - 1]) <= COEFF_TRIM * top:
        keep -= 1
    trimmed = scaled[:keep]
    if keep == 1:
        return []
    mu = np.roots(trimmed[::-1])
    out = []
    for root in mu:
        lam = complex(root) * scale
        if abs(lam - region.center) <= region.radius - margin:
            out.append(lam)
    return out


def _nearest(roots: np.ndarray, lam: complex) -> complex | None:
    if len(roots) == 0:
        return None
    idx = int(np.argmin(np.abs(roots - lam)))
    return complex(roots[idx])


def find_eigenvalues(ws: Workspace, bc: BoundaryConditions, region,
                     options: EigenOptions | None = None) -> EigenResult:
    """Eigenvalues of L y = lam r y under the boundary conditions in a region.

    For an :class:`Interval` the real determinant is scanned for sign
    changes and each bracket is bisected; for a :class:`Disk` the
    determinant polynomial is solved directly. Every candidate is then
    (a) re-located with a larger series truncation, and (b) checked by
    reconstructing its eigenfunction and measuring the equation residual.
    Candidates failing either check are reported as rejected.

    Raises
    ------
    RegionTruncationError
        If the series tail at the far edge of the region is too large for
        any answer there to be trustworthy.
    """
    options = options or EigenOptions()
    if bc.n != ws.n:
        raise ValueError(f"boundary conditions are {bc.n}-dimensional, "
                         f"operator order is {ws.n}")
    _check_tail(ws, region, options)
    norm = complex(np.linalg.det(initial_matrix(ws.coeffs, ws.b0)))
    if norm == 0:
        raise TriangularDefectError(
            "initial-value matrix of the basis solutions is singular")
    charfn = characteristic_polynomials(ws, bc)
    fine = with_truncation(ws, ws.truncation + options.persistence_extra)
    charfn_fine = characteristic_polynomials(fine, bc)

    accepted: list[Eigenvalue] = []
    rejected: list[tuple[complex, str]] = []

    if isinstance(region, Interval):
        candidates = _interval_candidates(charfn, region, options, norm)
        refined: list[complex] = []
        for lam in candidates:
            tol = options.persistence_for(lam)
            lam2 = _refine_on(charfn_fine, lam, tol, norm)
            if lam2 is None:
                rejected.append((complex(lam),
                                 "no root nearby at refined truncation"))
                continue
            refined.append(complex(lam2))
    elif isinstance(region, Disk):
        candidates = _disk_candidates(charfn, region, options)
        fine_roots = np.asarray(
            _disk_candidates(charfn_fine, region, options), dtype=complex)
        refined = []
        for lam in candidates:
            tol = options.persistence_for(lam)
            lam2 = _nearest(fine_roots, lam)
            if lam2 is None or abs(lam2 - lam) > tol:
                rejected.append((lam, "no root nearby at refined truncation"))
                continue
            if abs(lam2.imag) <= options.imag_noise * max(1.0, abs(lam2)):
                lam2 = complex(lam2.real, 0.0)
            refined.append(lam2)
    else:
        raise TypeError(f"unsupported region type {type(region).__name__}")

    # dedupe refined candidates (multiple brackets or conjugate collapse)
    unique: list[complex] = []
    for lam in sorted(refined, key=lambda z: (z.real, z.imag)):
        tol = options.persistence_for(lam)
        if unique and abs(lam - unique[-1]) <= 2 * tol:
            continue
        unique.append(lam)

    for lam in unique:
        y = eigenfunction(fine, bc, lam)
        res = operator_residual(ws.op, y, lam=lam)
        if res > options.residual_tol:
            rejected.append((lam, f"equation residual {res:.3e} exceeds "
                             f"{options.residual_tol:.1e}"))
            continue
        accepted.append(Eigenvalue(lam, res))

    accepted.sort(key=lambda e: (e.lam.real, e.lam.imag))
    if options.max_count is not None:
        accepted = accepted[:options.max_count]
    return EigenResult(tuple(accepted), tuple(rejected))
