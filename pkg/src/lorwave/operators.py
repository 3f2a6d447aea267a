"""Wave operators P = box + Z0*dt + Z1*dx + C on rank-m trivialized bundles.

The principal part is structurally pinned to the metric d'Alembertian

    box w = (1/beta) dtt w + gamma dt w - (1/(sqrt(beta) a)) dx((sqrt(beta)/a) dx w),
    gamma = (1/(sqrt(beta) a)) dt(a/sqrt(beta)),

so user coefficients can only add lower-order terms.  Coefficients are
expression ASTs (real and imaginary parts separately), which makes the
formally dual operator exact: its divergence correction is built
symbolically, not by differencing.
"""

from __future__ import annotations

import numpy as np

from .errors import GridTooCoarseInTime
from .expressions import Expression, constant, parse_expression
from .sobolev import GridFunction
from .stencils import time_derivative

_ZERO = constant(0.0)


def _as_entry(v):
    """Normalize a matrix entry to (re: Expression, im: Expression)."""
    if isinstance(v, tuple):
        return parse_expression(v[0]), parse_expression(v[1])
    if isinstance(v, complex):
        return constant(v.real), constant(v.imag)
    return parse_expression(v), _ZERO


class MatrixField:
    """m x m coefficient field of (t, x) with expression-valued entries."""

    def __init__(self, re, im):
        self.m = len(re)
        self.re = tuple(tuple(row) for row in re)
        self.im = tuple(tuple(row) for row in im)

    @classmethod
    def from_entries(cls, entries):
        m = len(entries)
        re = [[None] * m for _ in range(m)]
        im = [[None] * m for _ in range(m)]
        for i in range(m):
            if len(entries[i]) != m:
                raise ValueError("coefficient matrix must be square")
            for j in range(m):
                re[i][j], im[i][j] = _as_entry(entries[i][j])
        return cls(re, im)

    @classmethod
    def zeros(cls, m):
        return cls([[_ZERO] * m] * m, [[_ZERO] * m] * m)

    @classmethod
    def scalar_matrix(cls, m, value):
        re = [[constant(value.real if j == i else 0.0) for j in range(m)]
              for i in range(m)]
        im = [[constant(getattr(value, "imag", 0.0) if j == i else 0.0)
               for j in range(m)] for i in range(m)]
        return cls(re, im)

    def is_zero(self):
        def zero(e):
            return e.is_constant() and e.constant_value() == 0.0
        return all(zero(e) for row in self.re + self.im for e in row)

    def is_static(self):
        return not any(e.depends_on("t") for row in self.re + self.im for e in row)

    def evaluate(self, t, x):
        """Entries at (t, x); returns broadcast shape + (m, m), complex."""
        shape = np.broadcast(np.asarray(t), np.asarray(x)).shape
        out = np.zeros(shape + (self.m, self.m), dtype=complex)
        for i in range(self.m):
            for j in range(self.m):
                out[..., i, j] = (
                    np.broadcast_to(np.asarray(self.re[i][j](t, x)), shape)
                    + 1j * np.broadcast_to(np.asarray(self.im[i][j](t, x)), shape))
        return out

    def map_entries(self, fn):
        """New field with fn applied to every (re, im) Expression entry."""
        return MatrixField([[fn(self.re[i][j]) for j in range(self.m)]
                            for i in range(self.m)],
                           [[fn(self.im[i][j]) for j in range(self.m)]
                            for i in range(self.m)])

    def transpose(self):
        idx = range(self.m)
        return MatrixField([[self.re[j][i] for j in idx] for i in idx],
                           [[self.im[j][i] for j in idx] for i in idx])


class WaveOperatorSpec:
    """Lower-order coefficients riding on the metric d'Alembertian."""

    def __init__(self, m, Z0, Z1, C, tag="custom"):
        self.m = int(m)
        self.Z0 = Z0
        self.Z1 = Z1
        self.C = C
        for name, f in (("Z0", Z0), ("Z1", Z1), ("C", C)):
            if f.m != self.m:
                raise ValueError(f"{name} has rank {f.m}, expected {self.m}")
        self.tag = tag

    @classmethod
    def dalembert(cls):
        z = MatrixField.zeros(1)
        return cls(1, z, z, MatrixField.zeros(1), tag="dalembert")

    @classmethod
    def klein_gordon(cls, mass):
        z = MatrixField.zeros(1)
        return cls(1, z, z, MatrixField.scalar_matrix(1, float(mass) ** 2),
                   tag=f"klein_gordon({mass:g})")

    @classmethod
    def custom(cls, m, Z0=None, Z1=None, C=None, tag="custom"):
        def build(entries):
            if entries is None:
                return MatrixField.zeros(m)
            return MatrixField.from_entries(entries)
        return cls(m, build(Z0), build(Z1), build(C), tag=tag)

    def is_static(self):
        return (self.Z0.is_static() and self.Z1.is_static()
                and self.C.is_static())

    def __repr__(self):
        return f"WaveOperatorSpec(m={self.m}, tag={self.tag!r})"


# --- derived metric coefficient expressions ---------------------------------

def box_coefficients(st):
    """Expressions (beta, gamma, p, q) of the d'Alembertian expansion."""
    beta = st.beta
    a = st.a
    sqrtb = beta.sqrt()
    p = sqrtb / a                      # flux weight sqrt(beta)/a
    q = constant(1.0) / (sqrtb * a)    # 1/(sqrt(beta) a)
    gamma = q * (a / sqrtb).diff("t")
    return beta, gamma, p, q


def volume_weight(st):
    """sqrt|g| = sqrt(beta) * a as an Expression."""
    return st.beta.sqrt() * st.a


def dual_operator(op, st):
    """Formal dual P^t: transposed-negated first-order terms plus the
    divergence correction on the zeroth-order coefficient."""
    w = volume_weight(st)

    z0t, z1t, ct = op.Z0.transpose(), op.Z1.transpose(), op.C.transpose()
    Z0d = z0t.map_entries(lambda e: -e)
    Z1d = z1t.map_entries(lambda e: -e)

    def corrected(i, j, part):
        c = getattr(ct, part)[i][j]
        e0 = getattr(z0t, part)[i][j]
        e1 = getattr(z1t, part)[i][j]
        return c - ((w * e0).diff("t") + (w * e1).diff("x")) / w

    m = op.m
    Cd = MatrixField([[corrected(i, j, "re") for j in range(m)]
                      for i in range(m)],
                     [[corrected(i, j, "im") for j in range(m)]
                      for i in range(m)])
    return WaveOperatorSpec(m, Z0d, Z1d, Cd, tag=f"dual({op.tag})")


# --- space-time sample fields ------------------------------------------------

def _trig_eval(values, L_ref, x_min, xq):
    """Trigonometric interpolation of periodic nodal values at points xq.

    values: (N, m) complex; xq: scalar or (P,).  The Nyquist mode is
    evaluated as a cosine so real data interpolate to real values.
    """
    values = np.asarray(values)
    N = values.shape[0]
    coef = np.fft.fft(values, axis=0) / N
    xi = 2 * np.pi * np.fft.fftfreq(N, d=L_ref / N)
    dxq = np.atleast_1d(np.asarray(xq, dtype=float) - x_min)
    phases = np.exp(1j * np.outer(dxq, xi))
    if N % 2 == 0:
        phases[:, N // 2] = np.cos(xi[N // 2] * dxq)
    out = phases @ coef
    if np.isscalar(xq) or np.asarray(xq).ndim == 0:
        return out[0]
    return out


class SpacetimeFunction:
    """Samples on a uniform time grid times the spatial nodes.

    Interpolation: cubic Lagrange in t (snapping to rows when t is a node)
    and trigonometric in x.
    """

    def __init__(self, values, t0, dt, spacetime):
        v = np.asarray(values, dtype=complex)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3:
            raise ValueError(f"expected (N_t, N[, m]) samples, got {v.shape}")
        if v.shape[1] != spacetime.N:
            raise ValueError("node count mismatch with the spacetime grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("spacetime function contains non-finite entries")
        self.values = v
        self.t0 = float(t0)
        self.dt = float(dt)
        self.spacetime = spacetime

    @classmethod
    def from_callable(cls, st, fn, nt, t_range=None, m=1):
        ta, tb = t_range if t_range is not None else st.t_range
        ts = np.linspace(ta, tb, nt)
        tt, xx = np.meshgrid(ts, st.x, indexing="ij")
        vals = np.asarray(fn(tt, xx), dtype=complex)
        if vals.ndim == 2:
            vals = vals[:, :, None]
        return cls(vals, ts[0], ts[1] - ts[0], st)

    @classmethod
    def zeros(cls, st, nt, t_range=None, m=1):
        ta, tb = t_range if t_range is not None else st.t_range
        return cls(np.zeros((nt, st.N, m), dtype=complex), ta,
                   (tb - ta) / (nt - 1), st)

    @property
    def nt(self):
        return self.values.shape[0]

    @property
    def m(self):
        return self.values.shape[2]

    @property
    def t1(self):
        return self.t0 + self.dt * (self.nt - 1)

    def times(self):
        return self.t0 + self.dt * np.arange(self.nt)

    def slice_at(self, i):
        return GridFunction(self.values[i], self.spacetime.L_ref)

    def eval_slice(self, t):
        """(N, m) values at time t: exact at rows, cubic Lagrange between."""
        r = (t - self.t0) / self.dt
        if r < -1e-9 or r > self.nt - 1 + 1e-9:
            raise ValueError(f"time {t} outside sampled range "
                             f"[{self.t0}, {self.t1}]")
        nearest = int(round(r))
        if abs(r - nearest) < 1e-9 and 0 <= nearest < self.nt:
            return self.values[nearest]
        base = int(np.floor(r)) - 1
        base = min(max(base, 0), self.nt - 4)
        offs = np.arange(4)
        s = r - base
        w = np.ones(4)
        for k in range(4):
            for l in range(4):
                if l != k:
                    w[k] *= (s - offs[l]) / (offs[k] - offs[l])
        return np.tensordot(w, self.values[base:base + 4], axes=(0, 0))

    def eval_at(self, t, x):
        """Values at time t and arbitrary spatial points x."""
        sl = self.eval_slice(t)
        return _trig_eval(sl, self.spacetime.L_ref,
                          self.spacetime.topology.x_min, x)

    def restricted(self, t_lo, t_hi):
        """Row range covering [t_lo, t_hi] (bounds snapped outward)."""
        i0 = max(int(np.floor((t_lo - self.t0) / self.dt - 1e-9)), 0)
        i1 = min(int(np.ceil((t_hi - self.t0) / self.dt + 1e-9)), self.nt - 1)
        return SpacetimeFunction(self.values[i0:i1 + 1],
                                 self.t0 + i0 * self.dt, self.dt,
                                 self.spacetime)

    def __repr__(self):
        return (f"SpacetimeFunction(nt={self.nt}, N={self.values.shape[1]}, "
                f"m={self.m}, t=[{self.t0:g}, {self.t1:g}])")


def spectral_dx(values, L_ref, axis):
    """Spectral d/dx along the node axis of a sample array."""
    N = values.shape[axis]
    xi = 2 * np.pi * np.fft.fftfreq(N, d=L_ref / N)
    shape = [1] * values.ndim
    shape[axis] = N
    return np.fft.ifft(np.fft.fft(values, axis=axis) * (1j * xi).reshape(shape),
                       axis=axis)


def _matvec(M, V):
    """(..., m, m) @ (..., m) with broadcasting over leading axes."""
    return np.einsum("...ij,...j->...i", M, V)


def apply_P(op, st, w):
    """Apply the wave operator to a sampled space-time function.

    Time derivatives are 4th-order differences on w's own uniform grid
    (one-sided at the ends); spatial derivatives are spectral.
    """
    if w.nt < 5:
        raise GridTooCoarseInTime(
            f"apply_P needs at least 5 time levels, got {w.nt}")
    V = w.values
    L = st.L_ref
    ts = w.times()
    tt = ts[:, None]
    xx = st.x[None, :]

    beta_e, gamma_e, p_e, q_e = box_coefficients(st)
    beta = _mesh(beta_e, tt, xx)
    gamma = _mesh(gamma_e, tt, xx)
    p = _mesh(p_e, tt, xx)
    q = _mesh(q_e, tt, xx)

    dt_w = time_derivative(V, w.dt, 1)
    dtt_w = time_derivative(V, w.dt, 2)
    dx_w = spectral_dx(V, L, axis=1)
    lap = q[..., None] * spectral_dx(p[..., None] * dx_w, L, axis=1)

    out = (1.0 / beta)[..., None] * dtt_w + gamma[..., None] * dt_w - lap
    if not op.Z0.is_zero():
        out = out + _matvec(op.Z0.evaluate(tt, xx), dt_w)
    if not op.Z1.is_zero():
        out = out + _matvec(op.Z1.evaluate(tt, xx), dx_w)
    if not op.C.is_zero():
        out = out + _matvec(op.C.evaluate(tt, xx), V)
    return SpacetimeFunction(out, w.t0, w.dt, st)


def _mesh(expr, tt, xx):
    shape = np.broadcast(tt, xx).shape
    return np.broadcast_to(np.asarray(expr(tt, xx), dtype=float), shape)


# --- first-order reduction ---------------------------------------------------

class RhsEvaluator:
    """Vectorized right-hand side of the first-order system.

        du = v
        dv = beta * [ f - gamma v - Z0 v - Z1 dx(u) - C u + Lap u ]

    Static (t-independent) coefficients are sampled once; time-dependent
    ones are memoized per stage time.
    """

    def __init__(self, op, st):
        self.op = op
        self.st = st
        self.x = st.x
        N = st.N
        self.xi = 2 * np.pi * np.fft.fftfreq(N, d=st.L_ref / N)
        beta_e, gamma_e, p_e, q_e = box_coefficients(st)
        self._exprs = (beta_e, gamma_e, p_e, q_e)
        self._static_metric = not any(e.depends_on("t") for e in self._exprs)
        self._static_op = op.is_static()
        self._zero = (op.Z0.is_zero(), op.Z1.is_zero(), op.C.is_zero())
        self._cache = {}
        if self._static_metric:
            self._metric0 = self._eval_metric(0.0)
        if self._static_op:
            self._op0 = self._eval_op(0.0)

    def _eval_metric(self, s):
        beta_e, gamma_e, p_e, q_e = self._exprs
        N = self.st.N
        def arr(e):
            return np.broadcast_to(np.asarray(e(s, self.x), dtype=float), (N,))
        return arr(beta_e), arr(gamma_e), arr(p_e), arr(q_e)

    def _eval_op(self, s):
        z0 = None if self._zero[0] else self.op.Z0.evaluate(s, self.x)
        z1 = None if self._zero[1] else self.op.Z1.evaluate(s, self.x)
        c = None if self._zero[2] else self.op.C.evaluate(s, self.x)
        return z0, z1, c

    def coefficients(self, s):
        if self._static_metric and self._static_op:
            return self._metric0, self._op0
        key = float(s)
        hit = self._cache.get(key)
        if hit is None:
            metric = self._metric0 if self._static_metric else self._eval_metric(s)
            opc = self._op0 if self._static_op else self._eval_op(s)
            if len(self._cache) > 8:
                self._cache.clear()
            hit = self._cache[key] = (metric, opc)
        return hit

    def __call__(self, s, U, V, F=None):
        """U, V: (N, m) complex arrays; F: source samples or None."""
        (beta, gamma, p, q), (z0, z1, c) = self.coefficients(s)
        dx_u = np.fft.ifft(np.fft.fft(U, axis=0) * (1j * self.xi)[:, None], axis=0)
        lap = q[:, None] * np.fft.ifft(
            np.fft.fft(p[:, None] * dx_u, axis=0) * (1j * self.xi)[:, None], axis=0)
        acc = lap - gamma[:, None] * V
        if F is not None:
            acc = acc + F
        if z0 is not None:
            acc = acc - _matvec(z0, V)
        if z1 is not None:
            acc = acc - _matvec(z1, dx_u)
        if c is not None:
            acc = acc - _matvec(c, U)
        return V, beta[:, None] * acc


def first_order_rhs(op, st, s, u, v, f_s=None):
    """Exact algebraic inversion of Pu = f for the second time derivative."""
    rhs = RhsEvaluator(op, st)
    F = None if f_s is None else f_s.values
    du, dv = rhs(s, u.values, v.values, F)
    return (GridFunction(du, u.L_ref), GridFunction(dv, u.L_ref))


# --- weak pairing and principal symbol ---------------------------------------

def pairing_integral(st, psi, w):
    """Space-time integral of psi^T w against dV = sqrt(beta)*a dt dx.

    psi, w: SpacetimeFunctions on the same grid.  Trapezoid in t, full
    periodic trapezoid (uniform weights) in x.
    """
    if psi.values.shape != w.values.shape:
        raise ValueError("pairing needs identical sample grids")
    ts = psi.times()
    dens = _mesh(volume_weight(st), ts[:, None], st.x[None, :])
    integrand = np.sum(psi.values * w.values, axis=2) * dens
    col = np.sum(integrand, axis=1) * st.dx
    weights = np.full(psi.nt, psi.dt)
    weights[0] = weights[-1] = psi.dt / 2
    return complex(np.sum(col * weights))


def principal_symbol_check(op, st, covector, lambdas=(8, 16, 32, 64)):
    """High-frequency limit lambda^-2 e^{-i lambda phi} P(e^{i lambda phi} u0).

    Reports the observed values per lambda, a Richardson limit (the error
    is O(1/lambda)), and the symbol prediction (-omega^2/beta + xi^2/a^2)
    at the sample point.
    """
    omega, xi_cov = covector
    if omega == 0 and xi_cov == 0:
        raise ValueError("covector must be nonzero")

    probe_n = 512
    from .geometry import Spacetime1D
    probe_st = Spacetime1D(st.topology, st.t_range, st.beta, st.a, probe_n,
                           guard_travel_check=False)
    t_mid = 0.5 * (st.t_range[0] + st.t_range[1])
    half_window = min(0.25, 0.45 * (st.t_range[1] - st.t_range[0]))
    x_mid = probe_st.topology.x_min + probe_st.L_ref / 2
    width = probe_st.L_ref / 8

    def window(xx):
        z = (xx - x_mid) / width
        return np.where(np.abs(z) < 1.0, np.cos(np.pi * z / 2) ** 8, 0.0)

    nt = 129
    observed = []
    for lam in lambdas:
        def field(tt, xx, lam=lam):
            return np.exp(1j * lam * (omega * tt + xi_cov * xx)) * window(xx)
        w = SpacetimeFunction.from_callable(
            probe_st, field, nt, t_range=(t_mid - half_window, t_mid + half_window),
            m=op.m)
        pw = apply_P(op, probe_st, w)
        i_t = nt // 2
        i_x = probe_n // 2
        t_s = pw.t0 + pw.dt * i_t
        phase = np.exp(-1j * lam * (omega * t_s + xi_cov * probe_st.x[i_x]))
        observed.append(complex(pw.values[i_t, i_x, 0] * phase / lam**2))

    # the window peaks at the sample point (du0 = 0 there), so the leading
    # deviation is O(1/lambda^2); Richardson accordingly
    limit = (4 * observed[-1] - observed[-2]) / 3
    beta_s = float(probe_st.beta_at(t_s, probe_st.x[i_x]))
    a_s = float(probe_st.a_at(t_s, probe_st.x[i_x]))
    expected = (-(omega**2) / beta_s + xi_cov**2 / a_s**2)
    return {
        "lambdas": list(lambdas),
        "observed": observed,
        "limit": limit,
        "expected": complex(expected),
        "error": abs(limit - expected),
    }
