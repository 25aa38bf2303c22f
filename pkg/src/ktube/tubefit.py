"""Kullback-Leibler tube fits around a parametric multinomial model.

For a Lagrange weight ``pi`` the null estimator is ``p = pi*d + (1-pi)*m``
where ``m`` is the family element found by the reweighted pseudo-data
algorithm; the tube radius it reaches is ``c = K2(p, m)`` and the LRT is
``2n*L2(d, p)``.  Radius and weight are in one-to-one correspondence, so
fits at a fixed radius are obtained by root-finding in ``pi``.

The ``_rows`` helpers are vectorized over a leading replicate axis and are
shared with the bootstrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distances import _k2, _l2, _tube_weight, tube_path_distance
from .errors import ConvergenceError, DomainError
from .models import ModelSpec, _fit, _min_k2
from .tables import ContingencyTable, ProbVector, as_array

PI_MAX = 0.999
OUTER_TOL = 1e-10
OUTER_MAX_ITER = 500
DEFAULT_PI_GRID = tuple(round(0.01 * i, 2) for i in range(100)) + (PI_MAX,)
# how far past PI_MAX the radius search may push pi before giving up
_PI_EXTENSIONS = (0.9999, 0.99999, 0.999999, 1 - 1e-7, 1 - 1e-8, 1 - 1e-9)


def _observed(data, n=None):
    """Split ``data`` into (proportions array, sample size)."""
    if isinstance(data, ContingencyTable):
        return data.counts / data.n, float(data.n if n is None else n)
    d = as_array(data)
    if n is None:
        raise TypeError("sample size n is required when data are given as proportions")
    return d / d.sum(), float(n)


def _bshape(a, nd):
    return np.asarray(a, dtype=float).reshape((-1,) + (1,) * nd)


def _flat(a):
    return a.reshape(a.shape[0], -1)


@dataclass(frozen=True)
class TubeSolution:
    """One converged tube fit at Lagrange weight ``pi``."""

    pi: float
    m_hat: ProbVector
    p_hat: ProbVector
    c: float
    lrt: float
    iterations: int
    converged: bool
    n: float = float("nan")

    @property
    def sqrt_c(self) -> float:
        return math.sqrt(self.c)


@dataclass(frozen=True)
class TubeProfile:
    points: list[TubeSolution]
    n: float
    rho_star: float
    model: ModelSpec = field(repr=False)

    def rows(self):
        """``(pi, sqrt_c, c, lrt)`` per grid point."""
        return [(s.pi, s.sqrt_c, s.c, s.lrt) for s in self.points]


# ------------------------------------------------------------------ #
# Batched kernels
# ------------------------------------------------------------------ #


def _solve_rows(d, spec: ModelSpec, pi, start=None, tol=OUTER_TOL, cap=OUTER_MAX_ITER):
    """Reweighted fit of every row of ``d`` at its own weight ``pi``.

    Returns ``(m, iterations, last_change)``; a row has converged when its
    last sup-norm change is below ``tol``.
    """
    B, nd = d.shape[0], d.ndim - 1
    pi = np.broadcast_to(np.asarray(pi, dtype=float), (B,))
    if start is None:
        m = _fit(spec, d)[0]
    else:
        m = np.array(start, dtype=float)
        classical = np.flatnonzero(pi == 0)
        if classical.size:
            m[classical] = _fit(spec, d[classical])[0]
    iters = np.zeros(B, dtype=int)
    change = np.zeros(B)
    active = np.flatnonzero(pi > 0)
    for it in range(1, cap + 1):
        if active.size == 0:
            break
        ma, da = m[active], d[active]
        with np.errstate(divide="ignore", invalid="ignore"):
            delta = np.where(ma > 0, da / ma - 1.0, -1.0)
        w = _tube_weight(delta, _bshape(pi[active], nd)) * da
        new = _fit(spec, w, start=ma)[0]
        ch = np.abs(_flat(new - ma)).max(axis=1)
        m[active] = new
        iters[active] = it
        change[active] = ch
        active = active[ch >= tol]
    return m, iters, change


def _stats_rows(d, m, pi, n):
    nd = d.ndim - 1
    p = _bshape(pi, nd) * d + (1.0 - _bshape(pi, nd)) * m
    return p, _k2(_flat(p), _flat(m)), 2.0 * n * _l2(_flat(d), _flat(p))


def _rho_rows(d, spec: ModelSpec, start=None):
    """Fit index ``min_m K2(d, m)`` per row, with the minimizing element.

    The reweighted fit at ``PI_MAX`` supplies the start for a direct
    coordinate-descent polish.  Rows with empty cells cannot be polished
    (the minimizer sits on the boundary of the family), so they report the
    radius reached at ``PI_MAX``.
    """
    m, _, _ = _solve_rows(d, spec, PI_MAX, start)
    _, c_path, _ = _stats_rows(d, m, PI_MAX, 1.0)
    polished, value = _min_k2(spec, d, m)
    ok = np.isfinite(value)
    rho = np.where(ok, value, c_path)
    m_out = np.where(_bshape(ok, d.ndim - 1) > 0, polished, m)
    return np.maximum(rho, 0.0), m_out


def _illinois(evaluate, idx, lo, hi, f_lo, f_hi, accept, max_iter=200):
    """Vectorized Illinois regula falsi on brackets ``f(lo) < 0 < f(hi)``.

    ``evaluate(rows, x)`` returns ``f`` at ``x`` for those rows (and may
    stash per-row state); ``accept(rows, f)`` says which rows are done.
    Returns the final abscissa per row and a converged flag.
    """
    lo, hi = lo.astype(float).copy(), hi.astype(float).copy()
    f_lo, f_hi = f_lo.astype(float).copy(), f_hi.astype(float).copy()
    side = np.zeros(idx.size, dtype=int)
    x_out = np.full(idx.size, np.nan)
    done = np.zeros(idx.size, dtype=bool)
    act = np.arange(idx.size)
    for _ in range(max_iter):
        if act.size == 0:
            break
        a, b, fa, fb = lo[act], hi[act], f_lo[act], f_hi[act]
        x = (a * fb - b * fa) / (fb - fa)
        bad = ~((x > a) & (x < b))
        x = np.where(bad, 0.5 * (a + b), x)
        fx = evaluate(idx[act], x)
        ok = accept(idx[act], fx) | ((b - a) < 1e-15)
        x_out[act] = x
        done[act[ok]] = True
        upper = fx > 0
        new_lo, new_hi = np.where(upper, a, x), np.where(upper, x, b)
        new_flo, new_fhi = np.where(upper, fa, fx), np.where(upper, fx, fb)
        # Illinois step: halve the retained end's value when the same end moves twice
        new_flo = np.where(upper & (side[act] == 1), 0.5 * new_flo, new_flo)
        new_fhi = np.where(~upper & (side[act] == -1), 0.5 * new_fhi, new_fhi)
        lo[act], hi[act], f_lo[act], f_hi[act] = new_lo, new_hi, new_flo, new_fhi
        side[act] = np.where(upper, 1, -1)
        act = act[~ok]
    return x_out, done


def _radius_tol(c):
    return np.maximum(1e-10, 1e-6 * c)


def _invert_rows(d, spec: ModelSpec, c, n, start=None):
    """Tube fit of every row at radius ``c`` (a scalar shared by all rows).

    Returns a dict of arrays: ``pi``, ``m``, ``c``, ``lrt``, ``interior``
    (data already inside the tube), ``converged``.
    """
    B, nd = d.shape[0], d.ndim - 1
    c = float(c)
    if c < 0:
        raise DomainError("tube radius must be nonnegative")
    m0, it0, ch0 = _solve_rows(d, spec, np.zeros(B), start)
    out = {
        "pi": np.zeros(B),
        "m": m0,
        "interior": np.zeros(B, dtype=bool),
        "converged": ch0 < OUTER_TOL,
    }
    if c == 0:
        _, out["c"], out["lrt"] = _stats_rows(d, m0, 0.0, n)
        out["c"] = np.zeros(B)
        return out

    warm = m0.copy()
    m_top, _, ch_top = _solve_rows(d, spec, np.full(B, PI_MAX), m0)
    _, c_top, _ = _stats_rows(d, m_top, PI_MAX, n)
    lo = np.zeros(B)
    hi = np.full(B, PI_MAX)
    c_hi = c_top.copy()
    warm_hi = m_top.copy()

    # rows whose whole pi-path stays below c: either interior or beyond PI_MAX
    beyond = np.flatnonzero(c_top < c)
    if beyond.size:
        rho, m_rho = _rho_rows(d[beyond], spec, m_top[beyond])
        inside = rho <= c
        out["interior"][beyond[inside]] = True
        out["pi"][beyond[inside]] = 1.0
        out["m"][beyond[inside]] = m_rho[inside]
        pending = beyond[~inside]
        for pi_ext in _PI_EXTENSIONS:
            if pending.size == 0:
                break
            m_e, _, _ = _solve_rows(d[pending], spec, np.full(pending.size, pi_ext), warm_hi[pending])
            _, c_e, _ = _stats_rows(d[pending], m_e, pi_ext, n)
            lo[pending] = hi[pending]
            warm[pending] = warm_hi[pending]
            hi[pending] = pi_ext
            c_hi[pending] = c_e
            warm_hi[pending] = m_e
            pending = pending[c_e < c]
        # still short of c at the last extension: the LRT there is negligible; report it
        if pending.size:
            out["pi"][pending] = hi[pending]
            out["m"][pending] = warm_hi[pending]

    todo = np.flatnonzero(~out["interior"] & (c_hi >= c))
    target = math.sqrt(c)
    state = {"m": warm, "conv": out["converged"].copy()}

    def evaluate(rows, x):
        m_x, _, ch = _solve_rows(d[rows], spec, x, state["m"][rows])
        _, c_x, _ = _stats_rows(d[rows], m_x, x, n)
        state["m"][rows] = m_x
        state["conv"][rows] = ch < OUTER_TOL
        state["c"] = c_x
        return np.sqrt(c_x) - target

    def accept(rows, f):
        c_x = state["c"]
        return np.abs(c_x - c) < _radius_tol(c)

    if todo.size:
        state["m"][todo] = warm_hi[todo]
        f_lo = np.full(todo.size, -target)
        lo_c = np.zeros(todo.size)
        has_lo = lo[todo] > 0
        if has_lo.any():
            _, lo_c_vals, _ = _stats_rows(d[todo][has_lo], warm[todo][has_lo], lo[todo][has_lo], n)
            lo_c[has_lo] = lo_c_vals
            f_lo[has_lo] = np.sqrt(lo_c_vals) - target
        f_hi = np.sqrt(c_hi[todo]) - target
        exact = f_hi == 0
        pis, ok = _illinois(evaluate, todo, lo[todo], hi[todo], f_lo, np.where(exact, 1e-300, f_hi), accept)
        pis = np.where(exact, hi[todo], pis)
        out["pi"][todo] = pis
        out["m"][todo] = np.where(_bshape(exact, nd) > 0, warm_hi[todo], state["m"][todo])
        out["converged"][todo] = (ok | exact) & state["conv"][todo]

    pi_b = out["pi"]
    p, cvals, lrt = _stats_rows(d, out["m"], np.where(out["interior"], 1.0, pi_b), n)
    lrt = np.where(out["interior"], 0.0, lrt)
    out["c"], out["lrt"] = cvals, lrt
    return out


# ------------------------------------------------------------------ #
# Public API
# ------------------------------------------------------------------ #


def _solution(d, m, pi, n, iters, converged) -> TubeSolution:
    dims = d.shape
    p, c, lrt = _stats_rows(d[None], m[None], pi, n)
    return TubeSolution(
        pi=float(pi),
        m_hat=ProbVector(m, dims),
        p_hat=ProbVector(p[0], dims),
        c=max(float(c[0]), 0.0),
        lrt=max(float(lrt[0]), 0.0),
        iterations=int(iters),
        converged=bool(converged),
        n=n,
    )


def _check_spec(d, spec):
    if d.shape != spec.dims:
        raise DomainError(f"data of shape {d.shape} do not conform to model dims {spec.dims}")


def solve_single_element(data, m0, c: float, n=None) -> TubeSolution:
    """Closed-form tube fit for the one-element family ``{m0}`` at radius ``c``.

    The solution lies on the segment between ``m0`` and ``d``; its position
    is found by bisection on the radius equation.
    """
    d, n = _observed(data, n)
    m0 = as_array(m0, d.shape)
    m0 = m0 / m0.sum()
    if c < 0:
        raise DomainError("tube radius must be nonnegative")

    def radius(pi):
        return float(_k2((pi * d + (1 - pi) * m0).ravel(), m0.ravel()))

    if c == 0:
        return _solution(d, m0, 0.0, n, 0, True)
    if c >= radius(1.0):
        return _solution(d, m0, 1.0, n, 0, True)
    lo, hi, it = 0.0, 1.0, 0
    pi = 0.0
    while it < 200:
        it += 1
        pi = 0.5 * (lo + hi)
        r = radius(pi)
        if abs(r - c) < 1e-12 or hi - lo < 1e-16:
            break
        if r < c:
            lo = pi
        else:
            hi = pi
    return _solution(d, m0, pi, n, it, True)


def solve_at_pi(data, spec: ModelSpec, pi: float, n=None, start=None) -> TubeSolution:
    """Minimize ``pi*L2(d, p) + (1-pi)*K2(p, M)`` for a fixed Lagrange weight."""
    d, n = _observed(data, n)
    _check_spec(d, spec)
    pi = float(pi)
    if not 0.0 <= pi < 1.0:
        raise DomainError(f"pi must lie in [0, 1), got {pi}")
    start = None if start is None else as_array(start, d.shape)[None]
    m, iters, change = _solve_rows(d[None], spec, np.array([pi]), start)
    if change[0] >= OUTER_TOL:
        raise ConvergenceError(f"reweighted fit at pi={pi} did not converge", float(change[0]))
    return _solution(d, m[0], pi, n, iters[0], True)


def rho_star(data, spec: ModelSpec) -> float:
    """Plug-in fit index ``min over the family of K2(d, m)``."""
    d, _ = _observed(data, 1.0)
    _check_spec(d, spec)
    rho, _ = _rho_rows(d[None], spec)
    return float(rho[0])


def rho_star_element(data, spec: ModelSpec) -> tuple[float, ProbVector]:
    d, _ = _observed(data, 1.0)
    _check_spec(d, spec)
    rho, m = _rho_rows(d[None], spec)
    return float(rho[0]), ProbVector(m[0], d.shape)


def profile(data, spec: ModelSpec, pi_grid=DEFAULT_PI_GRID, n=None) -> TubeProfile:
    """Tube fits along an increasing grid of Lagrange weights, warm-started."""
    d, n = _observed(data, n)
    _check_spec(d, spec)
    grid = [float(x) for x in pi_grid]
    if not grid or grid[0] != 0.0:
        raise DomainError("the pi grid must start at 0")
    if any(b <= a for a, b in zip(grid, grid[1:])) or grid[-1] >= 1.0:
        raise DomainError("the pi grid must be strictly increasing inside [0, 1)")
    points, m = [], None
    for pi in grid:
        sol = solve_at_pi(d, spec, pi, n=n, start=m)
        points.append(sol)
        m = sol.m_hat.probs
    return TubeProfile(points, n, rho_star(d, spec), spec)


def invert_for_c(data, spec: ModelSpec, c: float, n=None) -> TubeSolution:
    """Tube fit at radius ``c``; ``pi = 1`` and ``lrt = 0`` when ``d`` is inside the tube."""
    d, n = _observed(data, n)
    _check_spec(d, spec)
    if c < 0:
        raise DomainError("tube radius must be nonnegative")
    out = _invert_rows(d[None], spec, c, n)
    if not out["converged"][0]:
        raise ConvergenceError(f"tube fit at radius {c} did not converge")
    pi = float(out["pi"][0])
    return _solution(d, out["m"][0], pi, n, 0, True) if not out["interior"][0] else _interior(d, out["m"][0], n)


def _interior(d, m, n):
    return _solution(d, m, 1.0, n, 0, True)


def lower_confidence_limit(data, spec: ModelSpec, critical_value: float, n=None) -> float:
    """Radius at which the tube LRT falls to ``critical_value``.

    Returns 0 when the classical test (radius 0) already accepts.
    """
    return lower_limit_solution(data, spec, critical_value, n).c


def lower_limit_solution(data, spec: ModelSpec, critical_value: float, n=None) -> TubeSolution:
    d, n = _observed(data, n)
    _check_spec(d, spec)
    if critical_value <= 0:
        raise DomainError("critical value must be positive")
    base = solve_at_pi(d, spec, 0.0, n=n)
    if base.lrt <= critical_value:
        return base
    top = solve_at_pi(d, spec, PI_MAX, n=n, start=base.m_hat.probs)
    if top.lrt >= critical_value:
        return top
    target = math.sqrt(critical_value)
    state = {"m": top.m_hat.probs[None].copy(), "lrt": None}

    # decreasing in pi, so negate to get f(lo) < 0 < f(hi)
    def evaluate(rows, x):
        m, _, _ = _solve_rows(d[None], spec, x, state["m"])
        _, _, lrt = _stats_rows(d[None], m, x, n)
        state["m"], state["lrt"] = m, lrt
        return target - np.sqrt(lrt)

    def accept(rows, f):
        return np.abs(state["lrt"] - critical_value) < 1e-6

    pis, ok = _illinois(
        evaluate,
        np.array([0]),
        np.array([0.0]),
        np.array([PI_MAX]),
        np.array([target - math.sqrt(base.lrt)]),
        np.array([target - math.sqrt(top.lrt)]),
        accept,
    )
    if not ok[0]:
        raise ConvergenceError("lower confidence limit search did not converge")
    return _solution(d, state["m"][0], float(pis[0]), n, 0, True)


def penalized_objective(data, p, spec: ModelSpec, gamma: float) -> float:
    """Penalized log-likelihood ``sum d*log p - gamma*K2(p, M)``."""
    d, _ = _observed(data, 1.0)
    p = as_array(p, d.shape)
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    if np.any((d > 0) & (p <= 0)):
        raise DomainError("p must be positive wherever d is")
    p = p / p.sum()
    loglik = float(np.sum(np.where(d > 0, d * np.log(np.where(p > 0, p, 1.0)), 0.0)))
    return loglik - gamma * rho_star(p, spec)


def mid_tube_distance(data, spec: ModelSpec) -> float:
    """Minimum over the family of the mid-tube distance ``T2_1/2(d, m)``."""
    d, _ = _observed(data, 1.0)
    sol = solve_at_pi(d, spec, 0.5, n=1.0)
    return tube_path_distance(d, sol.m_hat, 0.5)
