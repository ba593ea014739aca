"""Uniform meshes and complex-valued functions tabulated on them.

This is the numerical substrate for the whole package: cumulative quadrature
anchored at a basepoint, finite-difference differentiation of arbitrary order,
pointwise algebra, and CSV/JSON emission.

Everything here is pure: meshes and sampled functions are immutable after
construction (the value arrays are write-protected), so they can be shared
freely between threads, and every operation returns a new object.
"""

from __future__ import annotations

import json
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import MeshMismatchError, StencilError, VanishingValueError

#: Polynomial exactness degree of the cumulative quadrature rule.
QUADRATURE_DEGREE = 8

_QUAD_WINDOW = QUADRATURE_DEGREE + 1

#: Finite differences are at least this accurate in h.
FD_ACCURACY = 4


class Mesh:
    """A uniform grid on [x1, x2] with a distinguished basepoint node.

    Parameters
    ----------
    x1, x2 : float
        Interval endpoints, x1 < x2.
    n : int
        Node count, at least 9 and congruent to 1 modulo 4, so the grid
        splits into whole quadrature panels.
    i0 : int, optional
        Basepoint node index. Defaults to the middle node. The basepoint
        x0 = nodes[i0] is where cumulative integrals vanish and where
        initial data is imposed.
    """

    __slots__ = ("x1", "x2", "n", "i0", "h", "nodes")

    def __init__(self, x1: float, x2: float, n: int, i0: int | None = None):
        x1 = float(x1)
        x2 = float(x2)
        if not (x1 < x2):
            raise ValueError(f"need x1 < x2, got [{x1}, {x2}]")
        n = int(n)
        if n < 9:
            raise ValueError(f"mesh needs at least 9 nodes, got {n}")
        if (n - 1) % 4 != 0:
            raise ValueError(f"node count must be 1 (mod 4), got {n}")
        if i0 is None:
            i0 = (n - 1) // 2
        i0 = int(i0)
        if not (0 <= i0 <= n - 1):
            raise ValueError(f"basepoint index {i0} outside 0..{n - 1}")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "i0", i0)
        object.__setattr__(self, "h", (x2 - x1) / (n - 1))
        nodes = np.linspace(x1, x2, n)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    def __setattr__(self, name, value):
        raise AttributeError("Mesh is immutable")

    @property
    def x0(self) -> float:
        """Basepoint coordinate (an exact mesh node)."""
        return float(self.nodes[self.i0])

    @classmethod
    def with_basepoint(cls, x1: float, x2: float, n: int, x0: float) -> "Mesh":
        """Build a mesh whose basepoint is the node nearest to ``x0``."""
        h = (float(x2) - float(x1)) / (int(n) - 1)
        i0 = int(round((float(x0) - float(x1)) / h))
        i0 = min(max(i0, 0), int(n) - 1)
        return cls(x1, x2, n, i0)

    def decimate(self, stride: int) -> "Mesh":
        """Coarsened copy keeping every ``stride``-th node (basepoint preserved)."""
        stride = int(stride)
        if stride < 1 or (self.n - 1) % stride != 0:
            raise ValueError(f"stride {stride} does not divide {self.n - 1} segments")
        if self.i0 % stride != 0:
            raise ValueError(f"stride {stride} drops the basepoint node {self.i0}")
        return Mesh(self.x1, self.x2, (self.n - 1) // stride + 1, self.i0 // stride)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Mesh)
                and self.x1 == other.x1 and self.x2 == other.x2
                and self.n == other.n and self.i0 == other.i0)

    def __hash__(self) -> int:
        return hash((self.x1, self.x2, self.n, self.i0))

    def __repr__(self) -> str:
        return f"Mesh([{self.x1}, {self.x2}], n={self.n}, i0={self.i0})"


class SampledFunction:
    """A complex-valued function tabulated on a mesh.

    Values are validated to be finite and stored read-only. Arithmetic is
    defined between functions on the identical mesh and with scalars.
    """

    __slots__ = ("mesh", "values")

    def __init__(self, mesh: Mesh, values):
        v = np.asarray(values, dtype=np.complex128)
        if v.shape != (mesh.n,):
            raise ValueError(f"expected {mesh.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v.real) & np.isfinite(v.imag)):
            bad = int(np.flatnonzero(~(np.isfinite(v.real) & np.isfinite(v.imag)))[0])
            raise VanishingValueError(
                f"non-finite value at node {bad} (x={mesh.nodes[bad]:.6g})",
                node=bad, x=float(mesh.nodes[bad]))
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "mesh", mesh)
        object.__setattr__(self, "values", v)

    def __setattr__(self, name, value):
        raise AttributeError("SampledFunction is immutable")

    # -- basic queries ----------------------------------------------------

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def min_abs(self) -> float:
        return float(np.min(np.abs(self.values)))

    def at_basepoint(self) -> complex:
        return complex(self.values[self.mesh.i0])

    def decimate(self, stride: int) -> "SampledFunction":
        return SampledFunction(self.mesh.decimate(stride), self.values[::stride])

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other) -> "SampledFunction":
        if isinstance(other, SampledFunction):
            if other.mesh != self.mesh:
                raise MeshMismatchError(
                    f"cannot combine functions on {self.mesh} and {other.mesh}")
            return other
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            return SampledFunction(self.mesh, self.values + other)
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return SampledFunction(self.mesh, self.values + other.values)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float, complex)):
            return SampledFunction(self.mesh, self.values - other)
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return SampledFunction(self.mesh, self.values - other.values)

    def __rsub__(self, other):
        if isinstance(other, (int, float, complex)):
            return SampledFunction(self.mesh, other - self.values)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return SampledFunction(self.mesh, self.values * other)
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return SampledFunction(self.mesh, self.values * other.values)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, complex)):
            if other == 0:
                raise ZeroDivisionError("division of a sampled function by zero")
            return SampledFunction(self.mesh, self.values / other)
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * reciprocal(other)

    def __neg__(self):
        return SampledFunction(self.mesh, -self.values)

    def conj(self) -> "SampledFunction":
        return SampledFunction(self.mesh, np.conj(self.values))

    def __repr__(self) -> str:
        return f"SampledFunction(n={self.mesh.n}, max|f|={self.max_abs():.3g})"


# -- constructors ----------------------------------------------------------

def constant(mesh: Mesh, value: complex) -> SampledFunction:
    return SampledFunction(mesh, np.full(mesh.n, value, dtype=np.complex128))


def zeros(mesh: Mesh) -> SampledFunction:
    return constant(mesh, 0.0)


def ones(mesh: Mesh) -> SampledFunction:
    return constant(mesh, 1.0)


def coordinate(mesh: Mesh) -> SampledFunction:
    """The identity function x tabulated on the mesh."""
    return SampledFunction(mesh, mesh.nodes.astype(np.complex128))


def tabulate(mesh: Mesh, fn: Callable) -> SampledFunction:
    """Tabulate a vectorized callable of x on the mesh."""
    return SampledFunction(mesh, np.asarray(fn(mesh.nodes), dtype=np.complex128))


# -- pointwise operations ---------------------------------------------------

def add(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    return f + g


def sub(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    return f - g


def mul(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    return f * g


def scale(f: SampledFunction, c: complex) -> SampledFunction:
    return f * c


def reciprocal(f: SampledFunction, floor: float = 1e-14) -> SampledFunction:
    """Pointwise 1/f.

    Refuses when some |f(node)| drops below ``floor`` relative to max|f|,
    naming the node: a zero here usually signals a vanishing Wronskian
    further down the pipeline.
    """
    mags = np.abs(f.values)
    top = float(np.max(mags))
    i = int(np.argmin(mags))
    if top == 0.0 or mags[i] <= floor * top:
        raise VanishingValueError(
            f"reciprocal of a (near-)vanishing function: |f|={mags[i]:.3e} "
            f"at node {i} (x={f.mesh.nodes[i]:.6g})",
            node=i, x=float(f.mesh.nodes[i]))
    return SampledFunction(f.mesh, 1.0 / f.values)


# -- exact weight tables -----------------------------------------------------

@lru_cache(maxsize=None)
def _lagrange_basis(window: int) -> tuple[tuple[Fraction, ...], ...]:
    """Coefficients (ascending powers of t) of the Lagrange basis on nodes 0..window-1."""
    basis = []
    for k in range(window):
        num = [Fraction(1)]
        den = Fraction(1)
        for m in range(window):
            if m == k:
                continue
            # multiply num by (t - m)
            nxt = [Fraction(0)] * (len(num) + 1)
            for p, c in enumerate(num):
                nxt[p] -= c * m
                nxt[p + 1] += c
            num = nxt
            den *= Fraction(k - m)
        basis.append(tuple(c / den for c in num))
    return tuple(basis)


@lru_cache(maxsize=None)
def _segment_weights(a: int) -> np.ndarray:
    """Weights integrating the 9-point interpolant over the unit segment [a, a+1]."""
    row = []
    for coeffs in _lagrange_basis(_QUAD_WINDOW):
        total = Fraction(0)
        for p, c in enumerate(coeffs):
            total += c * (Fraction(a + 1) ** (p + 1) - Fraction(a) ** (p + 1)) / (p + 1)
        row.append(float(total))
    return np.array(row)


@lru_cache(maxsize=None)
def _diff_weights(window: int, order: int, at: int) -> np.ndarray:
    """Weights of the ``order``-th derivative of the interpolant at node offset ``at``."""
    row = []
    for coeffs in _lagrange_basis(window):
        val = Fraction(0)
        for p in range(order, len(coeffs)):
            fall = 1
            for t in range(p, p - order, -1):
                fall *= t
            val += coeffs[p] * fall * (Fraction(at) ** (p - order))
        row.append(float(val))
    return np.array(row)


# -- quadrature --------------------------------------------------------------

def cumulative_integral(f: SampledFunction) -> SampledFunction:
    """Antiderivative of ``f`` anchored at the basepoint.

    Each inter-node segment integral is the exact integral of the degree-8
    interpolant through the 9-node window containing the segment (windows
    clamp at the boundary, overlap in the interior); the per-node prefix sums
    are then shifted so the value at the basepoint node is exactly zero.
    Exact on polynomials up to degree ``QUADRATURE_DEGREE`` aside from
    rounding.

    Returns
    -------
    SampledFunction
        F with F(x0) = 0 and F' = f up to the rule's accuracy.
    """
    mesh = f.mesh
    n, h, v = mesh.n, mesh.h, f.values
    seg = np.zeros(n, dtype=np.complex128)
    w = _QUAD_WINDOW
    # interior segments: window centered, offset 4 inside it
    row = _segment_weights(4)
    m = n - w + 1  # number of interior segments, i in [5, n-4]
    for k in range(w):
        seg[5:5 + m] += row[k] * v[k:k + m]
    # clamped boundary windows
    for i in range(1, 5):
        seg[i] = np.dot(_segment_weights(i - 1), v[:w])
    for i in range(n - 3, n):
        seg[i] = np.dot(_segment_weights(i - n + w - 1), v[n - w:])
    prefix = np.cumsum(seg) * h
    prefix -= prefix[mesh.i0]
    prefix[mesh.i0] = 0.0
    return SampledFunction(mesh, prefix)


# -- differentiation ----------------------------------------------------------

def _diff_window(order: int) -> int:
    w = order + FD_ACCURACY
    return w if w % 2 == 1 else w + 1


def differentiate(f: SampledFunction, order: int = 1) -> SampledFunction:
    """Finite-difference derivative of the given order.

    Centered stencils in the interior, same-width one-sided stencils at the
    boundary; accuracy order at least ``FD_ACCURACY`` everywhere. The window
    holds ``order + 4`` nodes rounded up to odd.

    Raises
    ------
    StencilError
        If the mesh has fewer nodes than the stencil window.
    """
    order = int(order)
    if order < 1:
        raise ValueError(f"derivative order must be >= 1, got {order}")
    mesh = f.mesh
    n, v = mesh.n, f.values
    w = _diff_window(order)
    if n < w:
        raise StencilError(
            f"mesh with {n} nodes is too small for an order-{order} stencil ({w} nodes)")
    half = w // 2
    out = np.zeros(n, dtype=np.complex128)
    row = _diff_weights(w, order, half)
    m = n - w + 1
    for k in range(w):
        out[half:half + m] += row[k] * v[k:k + m]
    for i in range(half):
        out[i] = np.dot(_diff_weights(w, order, i), v[:w])
    for i in range(n - half, n):
        out[i] = np.dot(_diff_weights(w, order, i - n + w), v[n - w:])
    return SampledFunction(mesh, out / mesh.h ** order)


def centered_margin(order: int) -> int:
    """Number of boundary nodes per side whose stencils are one-sided."""
    return _diff_window(order) // 2


# -- emission -----------------------------------------------------------------

def format_csv(f: SampledFunction) -> str:
    """CSV text with header ``x,re,im`` and 17-significant-digit rows."""
    lines = ["x,re,im"]
    for x, val in zip(f.mesh.nodes, f.values):
        lines.append(f"{x:.17g},{val.real:.17g},{val.imag:.17g}")
    return "\n".join(lines) + "\n"


def write_csv(f: SampledFunction, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_csv(f))


def format_json(f: SampledFunction) -> str:
    """JSON object with x/re/im arrays at full double precision."""
    payload = {
        "x": [float(f"{x:.17g}") for x in f.mesh.nodes],
        "re": [float(f"{v.real:.17g}") for v in f.values],
        "im": [float(f"{v.imag:.17g}") for v in f.values],
    }
    return json.dumps(payload, sort_keys=True)


def write_json(f: SampledFunction, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_json(f))
        fh.write("\n")


def ladder_strides(mesh: Mesh, low: int = 65, high: int = 161) -> list[int]:
    """Strides for residual measurement: 1 plus coarsenings with node counts
    in [low, high], basepoint preserved, panel structure intact."""
    out = [1]
    segs = mesh.n - 1
    for s in range(2, segs + 1):
        if segs % s:
            continue
        sub = segs // s + 1
        if sub < low or sub > high:
            continue
        if (sub - 1) % 4 or mesh.i0 % s:
            continue
        out.append(s)
    return out
