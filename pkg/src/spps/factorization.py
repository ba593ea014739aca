"""Polya factorization of n-th order linear differential operators.

The operator L y = y^(n) + phi_1 y^(n-1) + ... + phi_n y, given n solutions
y_1..y_n of L y = 0 whose nested Wronskians W_1..W_n never vanish on the
interval, factors into first-order steps

    L = (1/b_n) D (1/b_{n-1}) D ... (1/b_1) D (1/b_0),   D = d/dx,

with b_0 = W_1, b_j = W_{j-1} W_{j+1} / W_j^2 for 0 < j < n, and
b_n = W_{n-1}/W_n. This module computes the Wronskians and factors, applies
operators in both coefficient and factorized form, measures residuals, and
constructs seed solution systems for arbitrary coefficients by an inductive
randomized procedure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ResidualVerificationError,
    SeedConstructionError,
    StencilError,
    WronskianFloorError,
)
from .mesh import (
    Mesh,
    SampledFunction,
    centered_margin,
    constant,
    cumulative_integral,
    differentiate,
    ladder_strides,
    ones,
)

#: Default relative floor below which a Wronskian counts as vanishing.
WRONSKIAN_FLOOR = 1e-6

#: Default relative operator-residual tolerance for verified solution systems.
RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class OperatorSpec:
    """Monic operator y^(n) + phi[0] y^(n-1) + ... + phi[n-1] y with weight r.

    ``phi`` holds phi_1..phi_n in that order (the leading coefficient is
    identically one and never stored). ``r`` is the spectral weight on the
    right-hand side L y = lambda r y.
    """

    n: int
    phi: tuple[SampledFunction, ...]
    r: SampledFunction

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"operator order must be >= 2, got {self.n}")
        if len(self.phi) != self.n:
            raise ValueError(f"expected {self.n} coefficients, got {len(self.phi)}")
        mesh = self.r.mesh
        for f in self.phi:
            if f.mesh != mesh:
                raise ValueError("all coefficients must share one mesh")
        object.__setattr__(self, "phi", tuple(self.phi))

    @property
    def mesh(self) -> Mesh:
        return self.r.mesh


@dataclass(frozen=True)
class SolutionSystem:
    """n solutions of L y = 0 with tabulated derivatives through order n-1.

    ``derivs[k][ell]`` is the ell-th derivative of solution k
    (``derivs[k][0]`` is the solution itself).
    """

    op: OperatorSpec
    derivs: tuple[tuple[SampledFunction, ...], ...]
    retries: int = 0
    wronskian_min: float = float("nan")
    residual_max: float = float("nan")

    def __post_init__(self):
        n = self.op.n
        if len(self.derivs) != n or any(len(row) != n for row in self.derivs):
            raise ValueError(f"need {n} solutions with derivatives through order {n - 1}")
        object.__setattr__(self, "derivs", tuple(tuple(row) for row in self.derivs))

    @property
    def y(self) -> tuple[SampledFunction, ...]:
        return tuple(row[0] for row in self.derivs)

    @classmethod
    def from_functions(cls, op: OperatorSpec, funcs: Sequence[SampledFunction],
                       verify: bool = True,
                       wronskian_floor: float = WRONSKIAN_FLOOR,
                       residual_tol: float = RESIDUAL_TOL) -> "SolutionSystem":
        """Wrap explicitly given solutions, tabulating derivatives by finite
        differences, optionally verifying residuals and Wronskian floors.

        The residual check differentiates n times, so its roundoff floor
        grows like eps / h^n; the default tolerance is calibrated for
        n <= 4 on meshes of a few hundred nodes — pass a larger
        ``residual_tol`` for higher orders.
        """
        n = op.n
        if len(funcs) != n:
            raise ValueError(f"need {n} functions, got {len(funcs)}")
        derivs = tuple(
            (f,) + tuple(differentiate(f, ell) for ell in range(1, n))
            for f in funcs)
        res = float("nan")
        if verify:
            res = max(operator_residual(op, f) for f in funcs)
            if not res <= residual_tol:
                raise ResidualVerificationError(
                    f"seed function residual {res:.3e} exceeds {residual_tol:.1e}",
                    residual=res)
        sys = cls(op, derivs, retries=0, residual_max=res)
        W = wronskians(sys)
        report = check_nonvanishing(W[1:], wronskian_floor)
        if verify and not report.passed:
            e = report.entries[report.worst]
            raise WronskianFloorError(
                f"W_{report.worst + 1} relative min modulus {e.relative:.3e} "
                f"below floor {wronskian_floor:.1e}",
                index=report.worst + 1, node=e.node, x=e.x)
        object.__setattr__(sys, "wronskian_min", report.min_relative)
        return sys


# -- nonvanishing reports -----------------------------------------------------

@dataclass(frozen=True)
class NonvanishingEntry:
    min_modulus: float
    max_modulus: float
    relative: float
    node: int
    x: float
    passed: bool


@dataclass(frozen=True)
class NonvanishingReport:
    entries: tuple[NonvanishingEntry, ...]
    floor: float

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def worst(self) -> int:
        return min(range(len(self.entries)), key=lambda i: self.entries[i].relative)

    @property
    def min_relative(self) -> float:
        return self.entries[self.worst].relative


def check_nonvanishing(fs: Sequence[SampledFunction],
                       floor: float = WRONSKIAN_FLOOR) -> NonvanishingReport:
    """Report min/max moduli of each function against a relative floor.

    A function passes when its minimum modulus exceeds ``floor`` times its
    maximum modulus; the report names the node of the minimum.
    """
    entries = []
    for f in fs:
        mags = np.abs(f.values)
        i = int(np.argmin(mags))
        lo, hi = float(mags[i]), float(np.max(mags))
        rel = lo / hi if hi > 0 else 0.0
        entries.append(NonvanishingEntry(
            lo, hi, rel, i, float(f.mesh.nodes[i]), rel > floor))
    return NonvanishingReport(tuple(entries), floor)


# -- Wronskians and factors ---------------------------------------------------

def wronskians(sys: SolutionSystem) -> list[SampledFunction]:
    """Nested Wronskians [W_0, W_1, ..., W_n] with W_0 = 1.

    W_j is the determinant of the j x j matrix of derivatives of the first j
    solutions, evaluated nodewise (LU with partial pivoting under the hood).
    """
    mesh = sys.op.mesh
    n = sys.op.n
    out = [ones(mesh)]
    for j in range(1, n + 1):
        if j == 1:
            out.append(sys.derivs[0][0])
            continue
        mats = np.empty((mesh.n, j, j), dtype=np.complex128)
        for k in range(j):
            for ell in range(j):
                mats[:, ell, k] = sys.derivs[k][ell].values
        out.append(SampledFunction(mesh, np.linalg.det(mats)))
    return out


@dataclass(frozen=True)
class PolyaFactorization:
    """Factor functions b_0..b_n plus tabulated derivatives of b_0..b_{n-1}.

    ``b_derivs[j][d]`` is the d-th derivative of b_j (d = 0 is b_j itself),
    tabulated through order n-1; consumed by the derivative-coefficient
    triangle.
    """

    b: tuple[SampledFunction, ...]
    b_derivs: tuple[tuple[SampledFunction, ...], ...]

    @property
    def n(self) -> int:
        return len(self.b) - 1

    @property
    def mesh(self) -> Mesh:
        return self.b[0].mesh


def polya_factors(W: Sequence[SampledFunction],
                  floor: float = WRONSKIAN_FLOOR) -> PolyaFactorization:
    """Factor functions from nested Wronskians [W_0..W_n].

    Raises
    ------
    WronskianFloorError
        If some W_j (j >= 1) dips below ``floor`` relative to its max
        modulus; the error names j and the offending node.
    """
    n = len(W) - 1
    if n < 2:
        raise ValueError("need Wronskians W_0..W_n with n >= 2")
    report = check_nonvanishing(W[1:], floor)
    if not report.passed:
        j = report.worst
        e = report.entries[j]
        raise WronskianFloorError(
            f"W_{j + 1} has relative min modulus {e.relative:.3e} below the "
            f"{floor:.1e} floor at node {e.node} (x={e.x:.6g})",
            index=j + 1, node=e.node, x=e.x)
    b = [W[1]]
    for j in range(1, n):
        b.append(W[j - 1] * W[j + 1] / (W[j] * W[j]))
    b.append(W[n - 1] / W[n])
    b_derivs = tuple(
        (bj,) + tuple(differentiate(bj, d) for d in range(1, n))
        for bj in b[:n])
    return PolyaFactorization(tuple(b), b_derivs)


# -- operator application -----------------------------------------------------

def apply_coefficients(op: OperatorSpec, y: SampledFunction) -> SampledFunction:
    """L y via finite differences of y against the coefficient list."""
    out = differentiate(y, op.n)
    for j in range(1, op.n):
        out = out + op.phi[j - 1] * differentiate(y, op.n - j)
    return out + op.phi[op.n - 1] * y


def apply_factorized(fac: PolyaFactorization, y: SampledFunction) -> SampledFunction:
    """L y via the nested first-order factors (divide, differentiate, repeat)."""
    u = SampledFunction(y.mesh, y.values / fac.b[0].values)
    for j in range(1, fac.n + 1):
        u = differentiate(u, 1)
        u = SampledFunction(u.mesh, u.values / fac.b[j].values)
    return u


def polya_system(fac: PolyaFactorization) -> list[SampledFunction]:
    """The n solutions b_0, b_0*I(b_1), b_0*I(b_1 I(b_2)), ... of L y = 0,
    where I g denotes the cumulative integral of g from the basepoint."""
    out = [fac.b[0]]
    for k in range(1, fac.n):
        g = ones(fac.mesh)
        for j in range(k, 0, -1):
            g = cumulative_integral(fac.b[j] * g)
        out.append(fac.b[0] * g)
    return out


# -- residual measurement -----------------------------------------------------

def _decimated_op(op: OperatorSpec, stride: int) -> OperatorSpec:
    return OperatorSpec(
        op.n,
        tuple(f.decimate(stride) for f in op.phi),
        op.r.decimate(stride))


def operator_residual(op: OperatorSpec, y: SampledFunction,
                      lam: complex = 0.0,
                      strides: Sequence[int] | None = None) -> float:
    """Relative residual max|L y - lambda r y| / max|y|.

    High-order finite differences on fine meshes sit on a roundoff floor
    (weights scale like 1/h^n), so the residual is evaluated on a small
    ladder of decimated copies of the mesh and the minimum is returned: fine
    grids certify oscillatory solutions, coarse grids smooth ones. The sup
    runs over nodes with centered stencils; boundary behavior is covered by
    the integrator-oracle tests instead of one-sided stencils whose noise
    would mask the true residual.
    """
    if strides is None:
        strides = ladder_strides(y.mesh)
    margin = centered_margin(op.n)
    scale_y = y.max_abs()
    if scale_y == 0.0:
        return 0.0
    best = math.inf
    for s in strides:
        try:
            ys = y.decimate(s) if s > 1 else y
            ops = _decimated_op(op, s) if s > 1 else op
            res = apply_coefficients(ops, ys)
            if lam != 0:
                res = res - lam * (ops.r * ys)
        except (ValueError, StencilError):
            continue
        vals = np.abs(res.values[margin:res.mesh.n - margin])
        if vals.size:
            best = min(best, float(np.max(vals)) / scale_y)
    return best


# -- seed system construction -------------------------------------------------

def _annulus(rng: np.random.Generator, shape) -> np.ndarray:
    """Complex samples uniform on the annulus 0.5 <= |c| <= 1."""
    radius = np.sqrt(rng.uniform(0.25, 1.0, size=shape))
    phase = rng.uniform(0.0, 2 * np.pi, size=shape)
    return radius * np.exp(1j * phase)


def _combination_matrix(rng: np.random.Generator, m: int, attempt: int) -> np.ndarray:
    """Identity plus random strictly-lower part first, fully random afterwards."""
    if attempt == 0:
        c = np.eye(m, dtype=np.complex128)
        if m > 1:
            low = _annulus(rng, (m, m))
            c += np.tril(low, k=-1)
        return c
    while True:
        c = _annulus(rng, (m, m))
        if abs(np.linalg.det(c)) > 1e-6:
            return c


def _recombine(derivs: list[list[SampledFunction]],
               c: np.ndarray) -> list[list[SampledFunction]]:
    mesh = derivs[0][0].mesh
    m = len(derivs)
    out = []
    for i in range(m):
        row = []
        for ell in range(len(derivs[0])):
            acc = np.zeros(mesh.n, dtype=np.complex128)
            for j in range(m):
                acc += c[i, j] * derivs[j][ell].values
            row.append(SampledFunction(mesh, acc))
        out.append(row)
    return out


def _wronskian_relative_min(derivs: list[list[SampledFunction]]) -> float:
    """min over j of (min|W_j| / max|W_j|) for the leading Wronskians."""
    mesh = derivs[0][0].mesh
    m = len(derivs)
    worst = math.inf
    for j in range(1, m + 1):
        mats = np.empty((mesh.n, j, j), dtype=np.complex128)
        for k in range(j):
            for ell in range(j):
                mats[:, ell, k] = derivs[k][ell].values
        w = np.abs(np.linalg.det(mats))
        hi = float(np.max(w))
        rel = float(np.min(w)) / hi if hi > 0 else 0.0
        worst = min(worst, rel)
    return worst


def build_seed_system(op: OperatorSpec,
                      rng_seed: int = 0,
                      max_retries: int = 25,
                      truncation: int = 30,
                      wronskian_floor: float = WRONSKIAN_FLOOR,
                      residual_tol: float = RESIDUAL_TOL) -> SolutionSystem:
    """Construct a verified solution system of L y = 0 for arbitrary smooth
    coefficients by induction on the order.

    Order 1 is solved in closed form (y = exp of minus the integral of the
    coefficient). Given solutions z_1..z_{m-1} of the order-(m-1) problem
    built from phi_1..phi_{m-1}, the family {1, int z_1, ..., int z_{m-1}}
    solves the order-m operator with no zeroth-order term; random complex
    recombinations of it (coefficients from the annulus 0.5 <= |c| <= 1) are
    drawn until all nested Wronskians clear the floor, the resulting operator
    is factorized, and the power-series machinery with weight phi_m evaluated
    at spectral parameter -1 produces solutions of the full order-m equation,
    which are recombined once more until their Wronskians pass. Derivative
    tables propagate analytically through every level (no finite differences
    on the solutions themselves).

    The retry budget applies per recombination stage; ``retries`` on the
    result counts all draws beyond first attempts. Deterministic for a fixed
    ``rng_seed``.

    Raises
    ------
    SeedConstructionError
        When a recombination stage exhausts ``max_retries`` (reports the best
        relative Wronskian minimum achieved).
    ResidualVerificationError
        When the final system fails its operator-residual verification.
    """
    from .powers import compute_A, evaluate_derivatives, evaluate_solution, formal_powers

    mesh = op.mesh
    n = op.n
    rng = np.random.default_rng(rng_seed)
    retries = 0

    # order-1 base: z' + phi_1 z = 0
    z = SampledFunction(
        mesh, np.exp(-cumulative_integral(op.phi[0]).values))
    level: list[list[SampledFunction]] = [[z]]

    for m in range(2, n + 1):
        # family {1, int z_j}: derivative ell >= 1 of int z_j is z_j^(ell-1)
        family: list[list[SampledFunction]] = [
            [ones(mesh)] + [constant(mesh, 0.0) for _ in range(m - 1)]]
        for zrow in level:
            family.append([cumulative_integral(zrow[0])] + list(zrow[:m - 1]))

        # stage A: recombine until the homogeneous-part factorization exists
        cand = None
        best = -math.inf
        for attempt in range(max_retries + 1):
            trial = _recombine(family, _combination_matrix(rng, m, attempt))
            rel = _wronskian_relative_min(trial)
            best = max(best, rel)
            if rel > wronskian_floor:
                cand = trial
                retries += attempt
                break
        if cand is None:
            retries += max_retries
            raise SeedConstructionError(
                f"order-{m} family recombination exhausted {max_retries} retries",
                best_wronskian_min=best)

        W = [ones(mesh)]
        for j in range(1, m + 1):
            mats = np.empty((mesh.n, j, j), dtype=np.complex128)
            for k in range(j):
                for ell in range(j):
                    mats[:, ell, k] = cand[k][ell].values
            W.append(SampledFunction(mesh, np.linalg.det(mats)))
        fac = polya_factors(W, wronskian_floor)
        coeffs = compute_A(fac)
        table = formal_powers(fac, op.phi[m - 1], truncation)

        # solutions of the full order-m equation at spectral parameter -1
        sols: list[list[SampledFunction]] = []
        for k in range(1, m + 1):
            row = [evaluate_solution(table, fac.b[0], k, -1.0)]
            for ell in range(1, m):
                row.append(evaluate_derivatives(table, coeffs, k, -1.0, ell))
            sols.append(row)

        # stage B: recombine the new solutions until their Wronskians pass
        picked = None
        best = -math.inf
        for attempt in range(max_retries + 1):
            trial = _recombine(sols, _combination_matrix(rng, m, attempt))
            rel = _wronskian_relative_min(trial)
            best = max(best, rel)
            if rel > wronskian_floor:
                picked = trial
                retries += attempt
                break
        if picked is None:
            retries += max_retries
            raise SeedConstructionError(
                f"order-{m} solution recombination exhausted {max_retries} retries",
                best_wronskian_min=best)
        level = picked

    # final verification against the full operator
    final = [row[:n] for row in level]
    sub_op = op
    res = max(operator_residual(sub_op, row[0]) for row in final)
    if not res <= residual_tol:
        raise ResidualVerificationError(
            f"constructed system residual {res:.3e} exceeds {residual_tol:.1e}",
            residual=res)
    wmin = _wronskian_relative_min(final)
    return SolutionSystem(op, tuple(tuple(row) for row in final),
                          retries=retries, wronskian_min=wmin, residual_max=res)
