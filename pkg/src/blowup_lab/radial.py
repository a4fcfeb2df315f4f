"""Radial grids, fields and the discrete operators shared by every module.

A radial function in R^N is stored by its samples on nodes ``r[0] < ... <
r[n-1]``.  All differencing is done in the *index* coordinate, where the nodes
are treated as a smooth map ``i -> r(i)``; the metric factors ``r'`` and
``r''`` are themselves obtained by differencing the node array.  With the
default mapped grid (geometric near the origin, uniform further out) this
gives high-order derivatives everywhere while resolving the singular weights
``|y|^{-2 sigma}`` and ``log|y|`` near ``r = 0``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

STENCIL = 9          # 8th-order central differences in the interior
GREGORY_NODES = 8    # end-corrected trapezoid, exact for degree < 8 at each end
CORE_STRIDE = 8      # node spacing of the singular core fit

_BERNOULLI = {2: 1 / 6, 4: -1 / 30, 6: 1 / 42, 8: -1 / 30}


class GridError(ValueError):
    pass


def angular_constant(dim: int) -> float:
    """Measure of the unit sphere S^{N-1}; 2 for N = 1 (two half-lines)."""
    if dim == 1:
        return 2.0
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for derivatives 0..m at ``z`` on nodes ``x``.

    Fornberg's recursion; returns an array of shape (m + 1, len(x)).
    """
    n = len(x)
    c = np.zeros((m + 1, n))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _index_difference_matrices(n: int) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    width = min(STENCIL, n)
    half = width // 2
    rows, cols, v1, v2 = [], [], [], []
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        idx = np.arange(lo, lo + width)
        w = fornberg_weights(float(i), idx.astype(float), 2)
        rows.extend([i] * width)
        cols.extend(idx)
        v1.extend(w[1])
        v2.extend(w[2])
    d1 = sparse.csr_matrix((v1, (rows, cols)), shape=(n, n))
    d2 = sparse.csr_matrix((v2, (rows, cols)), shape=(n, n))
    return d1, d2


def _gregory_corrections(m: int) -> np.ndarray:
    # Corrections c_i (i < m) to unit-spacing trapezoid weights so the left end
    # is exact on polynomials of degree < m (Euler-Maclaurin endpoint terms).
    vander = np.vander(np.arange(m, dtype=float), m, increasing=True).T
    rhs = np.zeros(m)
    for k in range(1, m, 2):
        rhs[k] = _BERNOULLI.get(k + 1, 0.0) / (k + 1)
    return np.linalg.solve(vander, rhs)


def core_moment(a: float, m: float, k: int) -> float:
    """Closed form of ``int_0^a r^m (log r)^k dr`` for ``m > -1``."""
    if m <= -1:
        raise GridError("non-integrable core moment")
    out = a ** (m + 1) / (m + 1)
    la = math.log(a)
    for j in range(1, k + 1):
        out = a ** (m + 1) * la**j / (m + 1) - j / (m + 1) * out
    return out


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing positive nodes for radial functions in R^dim."""

    dim: int
    r: np.ndarray
    # extra core basis terms r^e (log r)^k beyond a + c r^2
    core_terms: tuple = ()

    def __post_init__(self):
        r = np.array(self.r, dtype=float)
        object.__setattr__(self, "core_terms", tuple((float(e), int(k)) for e, k in self.core_terms))
        if self.dim < 1:
            raise GridError("dimension must be a positive integer")
        if r.ndim != 1 or r.size < 4:
            raise GridError("grid too small")
        if r[0] <= 0 or np.any(np.diff(r) <= 0) or not np.all(np.isfinite(r)):
            raise GridError("nodes must be positive and strictly increasing")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @classmethod
    def mapped(cls, dim: int, r_min: float = 1e-3, r_max: float = 40.0,
               step: float = 0.05, scale: float = 0.25,
               core_terms: tuple = ()) -> "RadialGrid":
        """Softplus-mapped grid ``r = scale * log(1 + exp(xi))`` on uniform xi.

        Spacing is geometric (ratio ``exp(step)``) for ``r << scale`` and
        uniform (``scale * step``) for ``r >> scale``.
        """
        xi0 = math.log(math.expm1(r_min / scale))
        xi1 = r_max / scale + math.log(-math.expm1(-r_max / scale))
        n = int(math.ceil((xi1 - xi0) / step)) + 1
        xi = np.linspace(xi0, xi1, n)
        r = scale * np.logaddexp(0.0, xi)
        r[0], r[-1] = r_min, r_max
        return cls(dim, r, core_terms)

    @classmethod
    def default(cls, dim: int, resolution: float = 1.0,
                sigma: float | None = None) -> "RadialGrid":
        """Grid used for ground state / operator work; ``resolution`` > 1 refines.

        With ``sigma`` the core model also carries ``r^(2-2 sigma)`` and
        ``r^(2-2 sigma) log r``, the leading singular terms of fields driven
        by ``|x|^(-2 sigma) (log|x|)^k``.
        """
        terms = () if sigma is None else ((2.0 - 2.0 * sigma, 0), (2.0 - 2.0 * sigma, 1))
        return cls.mapped(dim, r_min=1e-3, r_max=40.0, step=0.05 / resolution, core_terms=terms)

    @property
    def n(self) -> int:
        return self.r.size

    @property
    def r_min(self) -> float:
        return float(self.r[0])

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @cached_property
    def angular(self) -> float:
        return angular_constant(self.dim)

    @cached_property
    def _d(self):
        return _index_difference_matrices(self.n)

    @cached_property
    def dr(self) -> np.ndarray:
        """Metric factor dr/di."""
        return self._d[0] @ self.r

    @cached_property
    def d2r(self) -> np.ndarray:
        return self._d[1] @ self.r

    @cached_property
    def index_weights(self) -> np.ndarray:
        m = min(GREGORY_NODES, self.n // 2)
        w = np.ones(self.n)
        w[0] = w[-1] = 0.5
        c = _gregory_corrections(m)
        w[:m] += c
        w[-m:] += c[::-1]
        return w

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights for ``r^{N-1} dr`` on [r_min, r_max] (no angular factor)."""
        return self.index_weights * self.r ** (self.dim - 1) * self.dr

    @cached_property
    def quadrature(self) -> np.ndarray:
        """Node weights reproducing :meth:`integrate` (angular factor and core included)."""
        w = self.weights.copy()
        idx, cw = self.core_weights()
        w[idx] += cw
        return self.angular * w

    def derivative_matrix(self) -> sparse.csr_matrix:
        return sparse.diags(1.0 / self.dr) @ self._d[0]

    def laplacian_matrix(self, dim: int | None = None) -> sparse.csr_matrix:
        """Radial Laplacian ``f'' + (dim-1)/r f'``; ``dim`` defaults to the grid's."""
        if dim is None or dim == self.dim:
            return self._laplacian
        return self._build_laplacian(dim)

    @cached_property
    def _laplacian(self) -> sparse.csr_matrix:
        return self._build_laplacian(self.dim)

    def _build_laplacian(self, dim: int) -> sparse.csr_matrix:
        d1, d2 = self._d
        a = 1.0 / self.dr**2
        b = -self.d2r / self.dr**3 + (dim - 1) / (self.r * self.dr)
        return (sparse.diags(a) @ d2 + sparse.diags(b) @ d1).tocsr()

    @cached_property
    def cell_weights(self) -> np.ndarray:
        """Cell measures ``int r^{N-1} dr`` between midpoints; the first cell reaches the origin."""
        r = self.r
        edges = np.empty(self.n + 1)
        edges[1:-1] = 0.5 * (r[1:] + r[:-1])
        edges[0], edges[-1] = 0.0, r[-1]
        return np.diff(edges**self.dim) / self.dim

    def stiffness_matrix(self) -> sparse.csr_matrix:
        """Symmetric flux-form matrix K with ``u^H K u ~ int |u'|^2 r^{N-1} dr``.

        ``-diag(1/cell_weights) K`` is a second-order Laplacian, self-adjoint in
        the cell measure.  Zero flux at the origin, homogeneous Dirichlet one
        spacing beyond r_max.
        """
        r = self.r
        mid = 0.5 * (r[1:] + r[:-1])
        flux = mid ** (self.dim - 1) / np.diff(r)
        main = np.zeros(self.n)
        main[:-1] += flux
        main[1:] += flux
        h = r[-1] - r[-2]
        main[-1] += (r[-1] + 0.5 * h) ** (self.dim - 1) / h
        return sparse.diags([-flux, main, -flux], [-1, 0, 1], format="csr")

    @cached_property
    def _node_splines(self):
        from scipy.interpolate import make_interp_spline

        idx = np.arange(self.n, dtype=float)
        node = make_interp_spline(idx, self.r, k=7)
        return make_interp_spline(self.r, idx, k=3), node, node.derivative()

    def locate(self, r: np.ndarray) -> np.ndarray:
        """Fractional index of radii inside [r_min, r_max]."""
        inverse, node, dnode = self._node_splines
        s = np.clip(inverse(r), 0.0, self.n - 1.0)
        for _ in range(4):
            s = np.clip(s - (node(s) - r) / dnode(s), 0.0, self.n - 1.0)
        return s

    @cached_property
    def core_nodes(self) -> np.ndarray:
        m = 2 + len(self.core_terms)
        # spread the fit nodes when singular terms must be told apart
        stride = 1 if m == 2 else CORE_STRIDE
        idx = np.arange(m) * stride
        if idx[-1] >= self.n:
            raise GridError("grid too small")
        return idx

    def core_weights(self, power: float = 0.0, log_power: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Node indices and weights for ``int_0^r_min f r^{N-1+power} (log r)^k dr``.

        Exact when ``f = a + c r^2`` plus any :attr:`core_terms`.
        """
        idx = self.core_nodes
        basis = ((0.0, 0), (2.0, 0)) + self.core_terms
        r0 = self.r[0]
        m = self.dim - 1 + power
        x = self.r[idx]
        M = np.array([[xi**e * math.log(xi) ** k for xi in x] for e, k in basis])
        mom = np.array([core_moment(r0, m + e, k + log_power) for e, k in basis])
        # weights w solve M w = moments, so w . f integrates the fitted model
        return idx, np.linalg.solve(M, mom)

    def integrate(self, values: np.ndarray, power: float = 0.0,
                  log_power: int = 0) -> complex | float:
        """``int f(r) r^power (log r)^log_power dx`` over R^N.

        The core ``[0, r_min]`` is added in closed form after fitting
        ``f ~ a + c r^2`` on the two innermost nodes.
        """
        v = np.asarray(values)
        if v.shape != self.r.shape:
            raise GridError("grid mismatch")
        wt = self.weights
        if power or log_power:
            wt = wt * self.r**power * np.log(self.r) ** log_power
        body = np.dot(wt, v)
        idx, cw = self.core_weights(power, log_power)
        return self.angular * (body + np.dot(cw, v[idx]))


@dataclass(frozen=True, eq=False)
class RadialField:
    """Immutable samples of a radial function on a :class:`RadialGrid`."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values)
        if v.shape != self.grid.r.shape:
            raise GridError("grid mismatch")
        if not np.all(np.isfinite(v)):
            raise GridError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: RadialGrid, fn) -> "RadialField":
        return cls(grid, fn(grid.r))

    def _other(self, other):
        if isinstance(other, RadialField):
            if other.grid is not self.grid:
                raise GridError("grid mismatch")
            return other.values
        return other

    def __add__(self, other):
        return RadialField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return RadialField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return RadialField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return RadialField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return RadialField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return RadialField(self.grid, -self.values)

    @property
    def real(self) -> "RadialField":
        return RadialField(self.grid, self.values.real)

    @property
    def imag(self) -> "RadialField":
        return RadialField(self.grid, self.values.imag)

    def conj(self) -> "RadialField":
        return RadialField(self.grid, np.conj(self.values))

    def interpolate(self, r_new: np.ndarray) -> np.ndarray:
        """Evaluate at arbitrary radii; see :func:`interpolate_values`."""
        return interpolate_values(self.grid, self.values, r_new)

    # --- serialization -------------------------------------------------
    def to_json(self) -> str:
        v = np.asarray(self.values, dtype=complex)
        return json.dumps({
            "grid": {"N": self.grid.dim, "r": [float(x) for x in self.grid.r],
                     "core": [list(t) for t in self.grid.core_terms]},
            "values": [[float(z.real), float(z.imag)] for z in v],
        })

    @classmethod
    def from_json(cls, text: str) -> "RadialField":
        rec = json.loads(text)
        g = rec["grid"]
        grid = RadialGrid(int(g["N"]), np.array(g["r"], dtype=float),
                          tuple(tuple(t) for t in g.get("core", ())))
        vals = np.array([complex(a, b) for a, b in rec["values"]])
        return cls(grid, vals)

    def to_csv(self, path, dim_comment: bool = True) -> None:
        v = np.asarray(self.values, dtype=complex)
        with open(path, "w", newline="") as fh:
            if dim_comment:
                fh.write(f"# N={self.grid.dim}\n")
            w = csv.writer(fh)
            w.writerow(["r", "re", "im"])
            for x, z in zip(self.grid.r, v):
                w.writerow([repr(float(x)), repr(float(z.real)), repr(float(z.imag))])

    @classmethod
    def from_csv(cls, path, dim: int | None = None) -> "RadialField":
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
        if lines and lines[0].startswith("#"):
            head = lines.pop(0)
            if dim is None and "N=" in head:
                dim = int(head.split("N=")[1])
        if dim is None:
            raise GridError("dimension missing from CSV header; pass dim")
        rows = list(csv.reader(lines[1:]))
        r = np.array([float(a) for a, _, _ in rows])
        vals = np.array([complex(float(b), float(c)) for _, b, c in rows])
        return cls(RadialGrid(dim, r), vals)


def interpolator(grid: RadialGrid, values: np.ndarray):
    """Reusable form of :func:`interpolate_values`; the spline is built once."""
    from scipy.interpolate import make_interp_spline

    values = np.asarray(values)
    spline = make_interp_spline(np.arange(grid.n, dtype=float), values, k=7)
    basis = ((0.0, 0), (2.0, 0)) + grid.core_terms
    idx = grid.core_nodes
    M = np.array([[x**e * math.log(x) ** k for e, k in basis] for x in grid.r[idx]])
    coef = np.linalg.solve(M, values[idx])
    dtype = np.result_type(values, float)

    def evaluate(r_new) -> np.ndarray:
        r_new = np.asarray(r_new, dtype=float)
        out = np.zeros(r_new.shape, dtype=dtype)
        inside = (r_new >= grid.r[0]) & (r_new <= grid.r[-1])
        if np.any(inside):
            out[inside] = spline(grid.locate(r_new[inside]))
        below = (r_new < grid.r[0]) & (r_new > 0)
        if np.any(below):
            x = r_new[below]
            out[below] = sum(c * x**e * np.log(x) ** k for c, (e, k) in zip(coef, basis))
        if np.any(r_new == 0):
            out[r_new == 0] = coef[0]
        return out

    return evaluate


def interpolate_values(grid: RadialGrid, values: np.ndarray, r_new) -> np.ndarray:
    """Degree-7 spline in the index coordinate.

    Below ``r_min`` the core model (``a + c r^2`` plus the grid's core
    terms, fitted on :attr:`RadialGrid.core_nodes`) is used; above ``r_max``
    the result is zero (fields are assumed to have decayed there).
    """
    return interpolator(grid, values)(r_new)


# --- field-level operations -------------------------------------------------

def _check(f) -> RadialField:
    if not isinstance(f, RadialField):
        raise TypeError("expected a RadialField")
    return f


def integrate(f: RadialField) -> complex | float:
    """``int f dx`` over R^N for a radial field."""
    f = _check(f)
    return f.grid.integrate(f.values)


def inner(f: RadialField, g: RadialField) -> float:
    """Real L^2 pairing ``(f, g)_2 = Re int f conj(g)``."""
    if f.grid is not g.grid:
        raise GridError("grid mismatch")
    return float(np.real(f.grid.integrate(f.values * np.conj(g.values))))


def residual_norm(f: RadialField) -> float:
    """L^2 norm over [r_min, r_max] only.

    Residual fields carry roundoff at the innermost nodes, which the core
    extrapolation in :func:`integrate` would amplify.
    """
    f = _check(f)
    g = f.grid
    return math.sqrt(g.angular * float(np.dot(g.weights, np.abs(f.values) ** 2)))


def derivative(f: RadialField) -> RadialField:
    f = _check(f)
    return RadialField(f.grid, f.grid.derivative_matrix() @ f.values)


def laplacian(f: RadialField) -> RadialField:
    f = _check(f)
    if f.grid.n < 4:
        raise GridError("grid too small")
    return RadialField(f.grid, f.grid.laplacian_matrix() @ f.values)


def scaling_generator(f: RadialField) -> RadialField:
    """``Lambda f = (N/2) f + r f'``, the generator of L^2 scaling."""
    f = _check(f)
    g = f.grid
    return RadialField(g, 0.5 * g.dim * f.values + g.r * (g.derivative_matrix() @ f.values))


def elliptic_matrix(grid: RadialGrid, potential: np.ndarray,
                    dim: int | None = None) -> sparse.csc_matrix:
    """Square system for ``-Delta f + V f = g`` with regular origin and decay.

    Row 0 is the integrated equation on the core ball ``|x| < r_min``,
    the last row pins ``f(r_max) = 0``; pair with :func:`elliptic_rhs`.
    ``dim`` selects the radial Laplacian of another dimension (``N + 2``
    is the sector of ``x_j h(|x|)``).
    """
    dim = grid.dim if dim is None else dim
    V = np.asarray(potential)
    op = (-grid.laplacian_matrix(dim) + sparse.diags(V)).tolil()
    idx, cw = grid.core_weights(dim - grid.dim)
    scale = grid.r[0] ** (1 - dim)
    row = grid.derivative_matrix().getrow(0).toarray().ravel()
    row[idx] -= scale * cw * V[idx]
    op[0, :] = row
    op[grid.n - 1, :] = 0.0
    op[grid.n - 1, grid.n - 1] = 1.0
    return op.tocsc()


def elliptic_rhs(grid: RadialGrid, values: np.ndarray, power: float = 0.0,
                 log_power: int = 0, dim: int | None = None) -> np.ndarray:
    """Right-hand side matching :func:`elliptic_matrix`.

    The source is ``values * r^power * (log r)^log_power`` with ``values``
    smooth at the origin, so singular sources keep an exact core flux.
    """
    dim = grid.dim if dim is None else dim
    v = np.asarray(values)
    b = v * grid.r**power * np.log(grid.r) ** log_power
    b = b.astype(np.result_type(b, float))
    idx, cw = grid.core_weights(power + dim - grid.dim, log_power)
    b[0] = -grid.r[0] ** (1 - dim) * np.dot(cw, v[idx])
    b[-1] = 0.0
    return b


def check_sigma(sigma: float, dim: int) -> None:
    # The closed upper end admits N = 1, sigma = 1/4 (all integrals still finite).
    upper = min(dim / 4.0, 1.0)
    if not (0.0 < sigma <= upper):
        raise ValueError(f"sigma out of range: need 0 < sigma <= {upper}")


@dataclass(frozen=True)
class Norms:
    L2: float
    H1: float
    weighted_y: float
    weighted_sigma: float


def norms(f: RadialField, sigma: float) -> Norms:
    f = _check(f)
    g = f.grid
    check_sigma(sigma, g.dim)
    a2 = np.abs(f.values) ** 2
    df = g.derivative_matrix() @ f.values
    l2 = float(np.real(g.integrate(a2)))
    grad = float(np.real(g.integrate(np.abs(df) ** 2)))
    wy = float(np.real(g.integrate(a2 * g.r**2)))
    ws = float(np.real(g.integrate(a2, power=-2 * sigma)))
    return Norms(
        L2=math.sqrt(max(l2, 0.0)),
        H1=math.sqrt(max(l2 + grad, 0.0)),
        weighted_y=math.sqrt(max(wy, 0.0)),
        weighted_sigma=math.sqrt(max(ws, 0.0)),
    )
