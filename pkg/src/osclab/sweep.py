"""Sweep families phi(x,t) = x + sum_j t^j v_j(x), swept volume, the
t-polynomial coefficients of the volume element, growth exponents, and the
flow-based containment check.

The volume of a sweep restricted to box x (-t, t) is the tensor-product
Gauss-Legendre integral of the norm of the wedge of the frame
(d1 phi ... dm phi, dt phi). For polynomial families the frame is a
polynomial in t with x-dependent vector coefficients, so chart-node data is
evaluated once per quadrature mesh and shared across every t sample.

Coefficient extraction runs through exact jet arithmetic; an independent
Vandermonde sampling route is kept alongside as a cross-check oracle.

A family may also be given as a general smooth map (component expressions
in the chart variables and t). That mode exists for families of embeddings
that are not polynomial in t, e.g. a rigid rotation of a circle, where the
flow-based containment check still applies; the polynomial degree bound is
enforced only through the guard assertion, which such families satisfy
whenever their volume element vanishes identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .config import QuadConfig, Tolerances, geometric_grid
from .contact import ExprCurve, PolyCurve
from .exterior import frame_norm, index_combinations, wedge_ring
from .jets import Jet, jet_eval_expr
from .manifold import OutOfDomain, Submanifold

_TOL = Tolerances()


class SweepError(Exception):
    pass


class CoefficientDegreeError(SweepError):
    """A coefficient above the critical degree failed to vanish: this
    signals an implementation bug, not a user error."""


class FlowRankError(SweepError):
    """Least-squares residual of D(phi_t) Y = dt(phi_t) too large; the
    differential has rank m+1 somewhere, contradicting a VANISHES verdict."""


class FlowExitError(SweepError):
    pass


class DegenerateReparam(SweepError):
    pass


# ---------------------------------------------------------------------------
# cutoff


@dataclass(frozen=True)
class Cutoff:
    """Smooth bump in the radial chart coordinate: 1 inside `inner`,
    exp(1 - 1/(1-s^2)) across the band, 0 outside `outer`."""

    inner: float
    outer: float
    center: np.ndarray

    def __post_init__(self):
        if not (0.0 < self.inner < self.outer):
            raise ValueError("cutoff radii must satisfy 0 < inner < outer")

    def value_and_grad(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        R = X - self.center
        rho = np.linalg.norm(R, axis=-1)
        chi = np.ones_like(rho)
        grad = np.zeros_like(R)
        chi[rho >= self.outer] = 0.0
        band = (rho > self.inner) & (rho < self.outer)
        if np.any(band):
            width = self.outer - self.inner
            s = (rho[band] - self.inner) / width
            with np.errstate(under="ignore"):
                bump = np.exp(1.0 - 1.0 / (1.0 - s * s))
            chi[band] = bump
            dbds = bump * (-2.0 * s / (1.0 - s * s) ** 2)
            grad[band] = (dbds / (width * rho[band]))[:, None] * R[band]
        return chi, grad


# ---------------------------------------------------------------------------
# sweep family


@dataclass
class _FrameData:
    dalpha: np.ndarray  # (N, n, m)
    V: np.ndarray       # (k, N, n)   cutoff-scaled fields
    W: np.ndarray       # (k, N, n, m) chart partials of the scaled fields


class SweepFamily:
    """Base manifold plus either k polynomial vector fields (with optional
    cutoff) or a general map given by component expressions in chart + t."""

    def __init__(self, M: Submanifold, k: int, fields=None, map_exprs=None,
                 cutoff: Cutoff | None = None):
        if (fields is None) == (map_exprs is None):
            raise ValueError("provide exactly one of fields / map_exprs")
        if k < 1:
            raise ValueError("family degree k must be >= 1")
        self.M = M
        self.k = int(k)
        self.cutoff = cutoff
        allowed = set(M.chart_vars)
        if fields is not None:
            if len(fields) != k:
                raise ValueError("field count must equal k")
            self.fields = [[ex.parse(c) if isinstance(c, str) else c for c in f]
                           for f in fields]
            for f in self.fields:
                if len(f) != M.n:
                    raise ValueError("each field needs one expression per "
                                     "ambient coordinate")
                for c in f:
                    extra = ex.variables(c) - allowed
                    if extra:
                        raise ValueError(f"undeclared variables {sorted(extra)}"
                                         " in sweep field")
            self.field_jac = [[[ex.diff(c, v) for v in M.chart_vars] for c in f]
                              for f in self.fields]
            self.map_exprs = None
        else:
            if cutoff is not None:
                raise ValueError("cutoff applies to polynomial field families")
            self.map_exprs = [ex.parse(c) if isinstance(c, str) else c
                              for c in map_exprs]
            if len(self.map_exprs) != M.n:
                raise ValueError("map needs one expression per ambient coordinate")
            for c in self.map_exprs:
                extra = ex.variables(c) - allowed - {ex.TIME_VAR}
                if extra:
                    raise ValueError(f"undeclared variables {sorted(extra)}"
                                     " in sweep map")
            self.fields = None
            self.map_chart_jac = [[ex.diff(c, v) for v in M.chart_vars]
                                  for c in self.map_exprs]
            self.map_t = [ex.diff(c, ex.TIME_VAR) for c in self.map_exprs]
            self._check_identity_at_zero()
        self._cache: dict = {}

    @property
    def polynomial(self) -> bool:
        return self.fields is not None

    def _check_identity_at_zero(self, per_axis: int = 5, tol: float = 1e-9):
        X = self.M.grid(per_axis)
        gap = np.max(np.linalg.norm(
            self.point_many(X, np.zeros(X.shape[0])) - self.M.embed_many(X), axis=1))
        if gap > tol:
            raise ValueError(f"map family must satisfy phi(x,0)=x; gap {gap:.3e}")

    # -- point evaluation --------------------------------------------------

    def _map_env(self, X: np.ndarray, T: np.ndarray) -> dict:
        env = {name: X[..., i] for i, name in enumerate(self.M.chart_vars)}
        env[ex.TIME_VAR] = T
        return env

    def _eval_stack(self, exprs, env, shape) -> np.ndarray:
        cols = []
        for e in exprs:
            v = np.asarray(ex.evaluate(e, env), dtype=float)
            if v.shape != shape:
                v = np.broadcast_to(v, shape)
            cols.append(v)
        return np.stack(cols, axis=-1)

    def point_many(self, X, T) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        T = np.asarray(T, dtype=float)
        if self.polynomial:
            pts = self.M.embed_many(X)
            chi = self._chi(X)[0]
            for j, f in enumerate(self.fields, start=1):
                vj = self._eval_stack(f, self.M._env(X), X.shape[:-1])
                pts = pts + (T**j * chi)[:, None] * vj
            return pts
        env = self._map_env(X, T)
        return self._eval_stack(self.map_exprs, env, X.shape[:-1])

    def point(self, x, t) -> np.ndarray:
        return self.point_many(np.asarray(x, float)[None, :], np.asarray([t], float))[0]

    def eval(self, x, t) -> np.ndarray:
        """Chart-checked sweep evaluation phi(x, t)."""
        if not self.M.in_box(x):
            raise OutOfDomain(f"chart coordinates {x} outside the domain box")
        return self.point(x, t)

    def _chi(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.cutoff is None:
            q = X.shape[0]
            return np.ones(q), np.zeros((q, self.M.m))
        return self.cutoff.value_and_grad(X)

    def curve_at(self, x):
        """The curve Gamma_x: t -> phi(x, t) through the chart point x."""
        x = np.asarray(x, dtype=float)
        if self.polynomial:
            chi = self._chi(x[None, :])[0][0]
            rows = [self.M.embed(x)]
            env = {name: x[i] for i, name in enumerate(self.M.chart_vars)}
            for f in self.fields:
                rows.append(chi * np.array([ex.evaluate(c, env) for c in f]))
            return PolyCurve(np.stack(rows))
        bindings = {name: float(x[i]) for i, name in enumerate(self.M.chart_vars)}
        return ExprCurve(self.map_exprs, bindings)

    # -- frame evaluation ---------------------------------------------------

    def _poly_frame_data(self, X: np.ndarray) -> _FrameData:
        M = self.M
        dalpha = M.jacobian_many(X)
        chi, dchi = self._chi(X)
        V, W = [], []
        for j, f in enumerate(self.fields):
            vj = self._eval_stack(f, M._env(X), X.shape[:-1])       # (N, n)
            jac = np.stack(
                [self._eval_stack([row[i] for row in self.field_jac[j]],
                                  M._env(X), X.shape[:-1])
                 for i in range(M.m)], axis=-1)                     # (N, n, m)
            V.append(chi[:, None] * vj)
            W.append(chi[:, None, None] * jac + vj[:, :, None] * dchi[:, None, :])
        return _FrameData(dalpha=dalpha, V=np.stack(V), W=np.stack(W))

    def _assemble_frame(self, data: _FrameData, t: float) -> np.ndarray:
        cols = data.dalpha.copy()
        tcol = np.zeros(data.V.shape[1:])
        for j in range(1, self.k + 1):
            cols += t**j * data.W[j - 1]
            tcol += j * t ** (j - 1) * data.V[j - 1]
        return np.concatenate([cols, tcol[:, :, None]], axis=2)

    def frame_many(self, X, T) -> np.ndarray:
        """Frame (d1 phi .. dm phi, dt phi) at paired nodes; (q, n, m+1)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        T = np.asarray(T, dtype=float)
        if self.polynomial:
            data = self._poly_frame_data(X)
            cols = data.dalpha.copy()
            tcol = np.zeros(data.V.shape[1:])
            for j in range(1, self.k + 1):
                cols += (T**j)[:, None, None] * data.W[j - 1]
                tcol += (j * T ** (j - 1))[:, None] * data.V[j - 1]
            return np.concatenate([cols, tcol[:, :, None]], axis=2)
        env = self._map_env(X, T)
        shape = X.shape[:-1]
        cols = [self._eval_stack([row[i] for row in self.map_chart_jac], env, shape)
                for i in range(self.M.m)]
        cols.append(self._eval_stack(self.map_t, env, shape))
        return np.stack(cols, axis=-1)

    def frame_jets(self, x, degree: int) -> list[list[Jet]]:
        """Frame columns as jets in t at a fixed chart point."""
        x = np.asarray(x, dtype=float)
        m, n = self.M.m, self.M.n
        if self.polynomial:
            data = self._poly_frame_data(x[None, :])
            cols = []
            for i in range(m):
                col = []
                for c in range(n):
                    coeffs = np.zeros(degree + 1)
                    coeffs[0] = data.dalpha[0, c, i]
                    for j in range(1, min(self.k, degree) + 1):
                        coeffs[j] = data.W[j - 1][0, c, i]
                    col.append(Jet(coeffs))
                cols.append(col)
            tcol = []
            for c in range(n):
                coeffs = np.zeros(degree + 1)
                for j in range(1, self.k + 1):
                    if j - 1 <= degree:
                        coeffs[j - 1] = j * data.V[j - 1][0, c]
                tcol.append(Jet(coeffs))
            cols.append(tcol)
            return cols
        env = {name: Jet.constant(x[i], degree)
               for i, name in enumerate(self.M.chart_vars)}
        env[ex.TIME_VAR] = Jet.variable(degree)
        cols = [[jet_eval_expr(row[i], env, degree) for row in self.map_chart_jac]
                for i in range(m)]
        cols.append([jet_eval_expr(c, env, degree) for c in self.map_t])
        return cols


def sweep_eval(family: SweepFamily, x, t) -> np.ndarray:
    return family.eval(x, t)


# ---------------------------------------------------------------------------
# quadrature


def _composite_gauss(a: float, b: float, cells: int, order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, cells + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    ts = (mid[:, None] + half * nodes[None, :]).ravel()
    ws = np.tile(half * weights, cells)
    return ts, ws


def _chart_mesh(M: Submanifold, quad: QuadConfig):
    axes = [_composite_gauss(a, b, quad.cells, quad.order) for a, b in M.box]
    grids = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*[ax[1] for ax in axes], indexing="ij")
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=0), axis=0)
    return X, w


def _volume_element(frame: np.ndarray) -> np.ndarray:
    n, cols = frame.shape[-2], frame.shape[-1]
    acc = np.zeros(frame.shape[0])
    for rows in index_combinations(n, cols):
        d = np.linalg.det(frame[:, list(rows), :])
        acc += d * d
    return np.sqrt(acc)


@dataclass(frozen=True)
class VolumeSample:
    t: float
    value: float
    error: float


def _integrate(family: SweepFamily, t: float, quad: QuadConfig) -> float:
    key = ("mesh", quad.order, quad.cells)
    if key not in family._cache:
        family._cache[key] = _chart_mesh(family.M, quad)
    X, wx = family._cache[key]
    tn, wt = _composite_gauss(-t, t, quad.t_cells, quad.order)
    total = 0.0
    if family.polynomial:
        dkey = ("framedata", quad.order, quad.cells)
        if dkey not in family._cache:
            family._cache[dkey] = family._poly_frame_data(X)
        data = family._cache[dkey]
        for s, w in zip(tn, wt):
            total += w * float(np.dot(wx, _volume_element(
                family._assemble_frame(data, float(s)))))
    else:
        for s, w in zip(tn, wt):
            frame = family.frame_many(X, np.full(X.shape[0], s))
            total += w * float(np.dot(wx, _volume_element(frame)))
    return total


def swept_volume(family: SweepFamily, t: float,
                 quad: QuadConfig | None = None) -> VolumeSample:
    """Vol(phi | box x (-t,t)) with a halved-order error estimate."""
    if t <= 0:
        raise ValueError("swept_volume needs t > 0")
    quad = quad or QuadConfig()
    value = _integrate(family, t, quad)
    err = abs(value - _integrate(family, t, quad.halved()))
    return VolumeSample(t=float(t), value=value, error=err)


def volume_series(family: SweepFamily, t_grid=None,
                  quad: QuadConfig | None = None) -> list[VolumeSample]:
    ts = geometric_grid() if t_grid is None else t_grid
    return [swept_volume(family, float(t), quad) for t in ts]


# ---------------------------------------------------------------------------
# reparametrization invariance


@dataclass(frozen=True)
class ReparamResult:
    vol: float
    vol_composed: float
    gap: float


def random_reparam(M: Submanifold, t_extent: float, rng,
                   flip_axis: int | None = None) -> list[ex.Expr]:
    """Random separable diffeomorphism of box x (-T, T) onto itself,
    as one expression per output coordinate."""

    def axis_warp(name: str, a: float, b: float, lam: float, flip: bool) -> ex.Expr:
        u = ex.var(name)
        s = ex.div(ex.sub(u, ex.const(a)), ex.const(b - a))
        if flip:
            s = ex.sub(ex.const(1.0), s)
        smooth = ex.sub(ex.mul(ex.const(3.0), ex.power(s, 2)),
                        ex.mul(ex.const(2.0), ex.power(s, 3)))
        g = ex.add(ex.mul(ex.const(1.0 - lam), s), ex.mul(ex.const(lam), smooth))
        return ex.add(ex.const(a), ex.mul(ex.const(b - a), g))

    out = []
    for i, name in enumerate(M.chart_vars):
        a, b = M.box[i]
        out.append(axis_warp(name, a, b, float(rng.uniform(0.2, 0.8)),
                             flip_axis == i))
    out.append(axis_warp(ex.TIME_VAR, -t_extent, t_extent,
                         float(rng.uniform(0.2, 0.8)),
                         flip_axis == M.m))
    return out


def reparam_invariance_test(family: SweepFamily, psi_exprs, t_extent: float,
                            quad: QuadConfig | None = None,
                            tol=_TOL) -> ReparamResult:
    quad = quad or QuadConfig()
    M = family.M
    psi = [ex.parse(p) if isinstance(p, str) else p for p in psi_exprs]
    if len(psi) != M.m + 1:
        raise ValueError("reparametrization needs m+1 component expressions")
    dpsi = [[ex.diff(c, v) for v in (*M.chart_vars, ex.TIME_VAR)] for c in psi]

    # nonvanishing Jacobian determinant, checked by sampling
    Xs = M.grid(5)
    for s in np.linspace(-t_extent, t_extent, 9):
        env = {name: Xs[:, i] for i, name in enumerate(M.chart_vars)}
        env[ex.TIME_VAR] = np.full(Xs.shape[0], s)
        Dv = np.stack(
            [np.stack([np.broadcast_to(np.asarray(ex.evaluate(d, env), float),
                                       (Xs.shape[0],)) for d in row], axis=-1)
             for row in dpsi], axis=1)
        if np.min(np.abs(np.linalg.det(Dv))) < 1e-10:
            raise DegenerateReparam("Jacobian determinant vanishes on a sample")

    vol = _integrate(family, t_extent, quad)

    X, wx = _chart_mesh(M, quad)
    tn, wt = _composite_gauss(-t_extent, t_extent, quad.t_cells, quad.order)
    total = 0.0
    q = X.shape[0]
    for s, w in zip(tn, wt):
        env = {name: X[:, i] for i, name in enumerate(M.chart_vars)}
        env[ex.TIME_VAR] = np.full(q, s)
        vals = np.stack(
            [np.broadcast_to(np.asarray(ex.evaluate(p, env), float), (q,))
             for p in psi], axis=-1)
        Dpsi = np.stack(
            [np.stack([np.broadcast_to(np.asarray(ex.evaluate(d, env), float), (q,))
                       for d in row], axis=-1)
             for row in dpsi], axis=1)                       # (q, m+1, m+1)
        frame = family.frame_many(vals[:, : M.m], vals[:, M.m])
        composed = frame @ Dpsi
        total += w * float(np.dot(wx, _volume_element(composed)))

    big = max(abs(vol), abs(total))
    gap = 0.0 if big < 1e-13 else abs(vol - total) / big
    return ReparamResult(vol=vol, vol_composed=total, gap=gap)


# ---------------------------------------------------------------------------
# t-polynomial coefficients of the volume-element components


@dataclass(frozen=True)
class CoefficientTable:
    x: np.ndarray
    degree: int
    coeffs: np.ndarray  # (C(n, m+1), degree+1)
    guard_max: float


def critical_degree(family: SweepFamily) -> int:
    return family.k * (family.M.m + 1) - 1


def extract_t_polynomials(family: SweepFamily, x, degree: int | None = None,
                          tol=_TOL) -> CoefficientTable:
    """Exact coefficients in t of every wedge component, by jet arithmetic.

    Coefficients above the critical degree d = k(m+1)-1 must vanish; a
    violation raises CoefficientDegreeError.
    """
    d = critical_degree(family)
    D = degree if degree is not None else family.k * (family.M.m + 1) + 2
    if D < d:
        raise ValueError("jet degree bound must reach the critical degree")
    cols = family.frame_jets(x, D)
    comps = wedge_ring(cols)
    coeffs = np.stack([c.coeffs for c in comps])
    guard = float(np.max(np.abs(coeffs[:, d + 1:]))) if D > d else 0.0
    if guard > tol.degree_guard:
        raise CoefficientDegreeError(
            f"coefficient of degree > {d} reached {guard:.3e} at x={np.asarray(x).tolist()}"
        )
    return CoefficientTable(x=np.asarray(x, dtype=float), degree=d,
                            coeffs=coeffs[:, : d + 1], guard_max=guard)


def extract_t_polynomials_sampled(family: SweepFamily, x,
                                  degree: int | None = None) -> CoefficientTable:
    """Independent cross-check: sample the wedge components at t nodes and
    solve the Vandermonde least-squares system for the coefficients."""
    d = critical_degree(family)
    dfit = d + 2
    count = 2 * (dfit + 1)
    tau = np.linspace(-0.5, 0.5, count)
    x = np.asarray(x, dtype=float)
    frames = family.frame_many(np.tile(x, (count, 1)), tau)
    n, cols = frames.shape[-2], frames.shape[-1]
    samples = np.stack(
        [np.linalg.det(frames[:, list(rows), :])
         for rows in index_combinations(n, cols)], axis=-1)  # (count, ell)
    V = np.vander(tau, N=dfit + 1, increasing=True)
    fit, *_ = np.linalg.lstsq(V, samples, rcond=None)
    fit = fit.T  # (ell, dfit+1)
    guard = float(np.max(np.abs(fit[:, d + 1:])))
    return CoefficientTable(x=x, degree=d, coeffs=fit[:, : d + 1], guard_max=guard)


# ---------------------------------------------------------------------------
# growth exponent


@dataclass(frozen=True)
class GrowthFit:
    slope: float | None
    intercept: float | None
    residual: float | None
    identically_zero: bool


def growth_exponent(samples: list[VolumeSample], tol=_TOL) -> GrowthFit:
    if len(samples) < 5:
        raise ValueError("growth fit needs at least 5 volume samples")
    ts = np.array([s.t for s in samples])
    vols = np.array([s.value for s in samples])
    if np.any(vols <= tol.vol_zero):
        return GrowthFit(None, None, None, True)
    slope, intercept = np.polyfit(np.log(ts), np.log(vols), 1)
    resid = np.log(vols) - (slope * np.log(ts) + intercept)
    return GrowthFit(float(slope), float(intercept),
                     float(np.sqrt(np.mean(resid**2))), False)


# ---------------------------------------------------------------------------
# vanishing verdict


@dataclass(frozen=True)
class VanishingWitness:
    x: np.ndarray
    component: int  # 1-based lexicographic index
    index: int
    value: float


@dataclass(frozen=True)
class VanishingVerdict:
    vanishes: bool
    scale: float
    max_coeff: float
    min_index: int | None  # smallest surviving coefficient index b
    witness: VanishingWitness | None
    tables: list[CoefficientTable]

    @property
    def label(self) -> str:
        return "VANISHES" if self.vanishes else "NONZERO"


def vanishing_verdict(family: SweepFamily, samples_per_axis: int = 3,
                      margin: float = 0.15, tol=_TOL) -> VanishingVerdict:
    """VANISHES iff every coefficient of every component is below
    tol.vanish relative to the transverse degree-0 normalization (the
    largest tangent-frame blade norm over the sample grid)."""
    M = family.M
    X = M.grid(samples_per_axis, margin=margin)
    J = M.jacobian_many(X)
    scale = max(float(np.max([frame_norm(list(J[i].T)) for i in range(X.shape[0])])),
                np.finfo(float).tiny)
    tables = [extract_t_polynomials(family, x, tol=tol) for x in X]
    threshold = tol.vanish * scale
    max_coeff, witness, min_index = 0.0, None, None
    for table in tables:
        mags = np.abs(table.coeffs)
        local = float(np.max(mags))
        if local > max_coeff:
            comp, idx = np.unravel_index(int(np.argmax(mags)), mags.shape)
            max_coeff = local
            witness = VanishingWitness(
                x=table.x, component=int(comp) + 1, index=int(idx),
                value=float(table.coeffs[comp, idx]))
        alive = np.nonzero(np.any(mags > threshold, axis=0))[0]
        if alive.size:
            b = int(alive[0])
            min_index = b if min_index is None else min(min_index, b)
    vanishes = max_coeff <= threshold
    return VanishingVerdict(
        vanishes=vanishes, scale=scale, max_coeff=max_coeff,
        min_index=None if vanishes else min_index,
        witness=None if vanishes else witness, tables=tables)


# ---------------------------------------------------------------------------
# flow-based containment (tangency transport)


@dataclass(frozen=True)
class FlowReport:
    start: np.ndarray
    t_span: float
    steps: int
    max_drift: float
    max_residual: float
    passed: bool


def _solve_field(family: SweepFamily, u: np.ndarray, t: float, tol):
    frame = family.frame_many(u[None, :], np.array([t]))[0]
    J, rhs = frame[:, : family.M.m], frame[:, family.M.m]
    Y, *_ = np.linalg.lstsq(J, rhs, rcond=None)
    resid = float(np.linalg.norm(J @ Y - rhs))
    if resid > tol.flow_residual:
        raise FlowRankError(
            f"rank certificate failed: lstsq residual {resid:.3e} at t={t:.4g}")
    return Y, resid


def tangency_flow_check(family: SweepFamily, y, t_span: float,
                        steps: int = 256, verdict: VanishingVerdict | None = None,
                        tol=_TOL) -> FlowReport:
    """Integrate the flow of -Y_t (D(phi_t) Y_t = dt(phi_t)) with classic
    RK4 in both time directions and track the drift of phi_t along it."""
    if verdict is not None and not verdict.vanishes:
        raise FlowRankError("precondition failed: volume-element verdict is NONZERO")
    M = family.M
    y = np.asarray(y, dtype=float)
    if not M.in_box(y):
        raise OutOfDomain(f"flow start {y.tolist()} outside the chart box")

    # embedding precondition: chart-frame minors bounded below on a grid
    Xg = M.grid(5, margin=0.05)
    for s in np.linspace(-t_span, t_span, 9):
        frames = family.frame_many(Xg, np.full(Xg.shape[0], s))[:, :, : M.m]
        gram = np.einsum("qni,qnj->qij", frames, frames)
        if np.min(np.linalg.det(gram)) < 1e-16:
            raise FlowRankError(f"phi_t is not an embedding at t={s:.4g}")

    anchor = family.point(y, 0.0)
    h = t_span / steps
    max_drift, max_resid = 0.0, 0.0

    for sign in (1.0, -1.0):
        u, t = y.copy(), 0.0
        for _ in range(steps):
            dt = sign * h

            def rhs(uu, tt):
                Y, r = _solve_field(family, uu, tt, tol)
                return -Y, r

            k1, r1 = rhs(u, t)
            k2, r2 = rhs(u + 0.5 * dt * k1, t + 0.5 * dt)
            k3, r3 = rhs(u + 0.5 * dt * k2, t + 0.5 * dt)
            k4, r4 = rhs(u + dt * k3, t + dt)
            u = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
            max_resid = max(max_resid, r1, r2, r3, r4)
            if not M.in_box(u, tol=1e-9):
                raise FlowExitError(f"flow left the chart box at t={t:.4g}")
            max_drift = max(max_drift, float(np.linalg.norm(
                family.point(u, t) - anchor)))

    return FlowReport(start=y, t_span=float(t_span), steps=steps,
                      max_drift=max_drift, max_residual=max_resid,
                      passed=max_drift <= tol.flow_drift)


# ---------------------------------------------------------------------------
# CSV emission (17 significant digits, '.' decimal separator, '\n' endings)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def volume_csv(samples: list[VolumeSample]) -> str:
    lines = ["t,vol,err"]
    for s in samples:
        lines.append(f"{_fmt(s.t)},{_fmt(s.value)},{_fmt(s.error)}")
    return "\n".join(lines) + "\n"


def coefficients_csv(tables: list[CoefficientTable], m: int) -> str:
    header = ",".join([f"x{i+1}" for i in range(m)] + ["component", "i", "a_i"])
    lines = [header]
    for table in tables:
        xs = ",".join(_fmt(v) for v in table.x)
        for comp in range(table.coeffs.shape[0]):
            for i in range(table.coeffs.shape[1]):
                lines.append(f"{xs},{comp+1},{i},{_fmt(table.coeffs[comp, i])}")
    return "\n".join(lines) + "\n"
