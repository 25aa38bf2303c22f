"""Parametric multinomial model families and their (weighted) maximum likelihood fits.

Three families are supported:

* two-way row/column independence (closed-form fit),
* hierarchical loglinear models given by generator sets (iterative
  proportional fitting),
* a fixed single element ``{m0}``, used for the closed-form tube and for
  one-dimensional checks.

The batched kernels (``_fit``, ``_ipf``, ``_min_k2``) take arrays of shape
``(B, *dims)`` and treat every row independently: a row stops updating as
soon as it meets its own tolerance, so its result never depends on which
other rows share the batch.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distances import _k2
from .errors import ConvergenceError, DimensionMismatchError, ModelSpecError
from .tables import ProbVector, as_array

IPF_TOL = 1e-10
IPF_MAX_SWEEPS = 10_000


def _closure(generators):
    terms = set()
    for g in generators:
        for r in range(1, len(g) + 1):
            terms.update(itertools.combinations(sorted(g), r))
    return sorted(terms, key=lambda t: (len(t), t))


def _maximal(generators):
    gens = sorted({tuple(sorted(set(g))) for g in generators}, key=lambda t: (len(t), t))
    return tuple(g for g in gens if not any(set(g) < set(h) for h in gens))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A parametric family ``M`` over tables of shape ``dims``.

    ``generators`` is stored without redundancy: hierarchical closure is
    implied, so only maximal terms are kept.
    """

    kind: str
    dims: tuple[int, ...]
    generators: tuple[tuple[int, ...], ...] = ()
    element: np.ndarray | None = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        dims = tuple(int(s) for s in self.dims)
        object.__setattr__(self, "dims", dims)
        if self.kind == "independence":
            if len(dims) != 2:
                raise ModelSpecError(f"independence needs a two-way table, got {len(dims)} axes")
            object.__setattr__(self, "generators", ((0,), (1,)))
        elif self.kind == "loglinear":
            gens = [tuple(int(a) for a in g) for g in self.generators]
            if not gens:
                raise ModelSpecError("a loglinear model needs at least one generator")
            for g in gens:
                if not g:
                    raise ModelSpecError("empty generator")
                if len(set(g)) != len(g) or any(not 0 <= a < len(dims) for a in g):
                    raise ModelSpecError(f"generator {g} is not a subset of axes 0..{len(dims) - 1}")
            object.__setattr__(self, "generators", _maximal(gens))
        elif self.kind == "fixed":
            m0 = np.asarray(self.element, dtype=float)
            if m0.shape != dims:
                raise ModelSpecError(f"fixed element shape {m0.shape} differs from dims {dims}")
            m0 = ProbVector(m0, dims).probs
            object.__setattr__(self, "element", m0)
            object.__setattr__(self, "generators", ())
        else:
            raise ModelSpecError(f"unknown model kind {self.kind!r}")

    @classmethod
    def independence(cls, dims, label="independence"):
        return cls("independence", tuple(dims), label=label)

    @classmethod
    def loglinear(cls, dims, generators, label=""):
        return cls("loglinear", tuple(dims), tuple(tuple(g) for g in generators), label=label)

    @classmethod
    def fixed(cls, m0, label="fixed"):
        m0 = as_array(m0)
        return cls("fixed", m0.shape, element=m0, label=label)

    @property
    def terms(self) -> list[tuple[int, ...]]:
        """All interaction terms implied by hierarchical closure, lowest order first."""
        return _closure(self.generators)

    @property
    def n_cells(self) -> int:
        return math.prod(self.dims)

    def __repr__(self):
        if self.kind == "loglinear":
            return f"ModelSpec(loglinear, dims={self.dims}, generators={self.generators})"
        return f"ModelSpec({self.kind}, dims={self.dims})"


@dataclass(frozen=True)
class ModelFit:
    m: ProbVector
    k: int
    converged: bool
    iterations: int
    discrepancy: float = 0.0


def model_dimension(spec: ModelSpec) -> int:
    """Number of free parameters, excluding the normalizing constant."""
    return sum(math.prod(spec.dims[a] - 1 for a in term) for term in spec.terms)


def degrees_of_freedom(spec: ModelSpec) -> int:
    return spec.n_cells - model_dimension(spec) - 1


def design_matrix(spec: ModelSpec) -> np.ndarray:
    """Corner-point (dummy) coding of the hierarchical term set, one row per cell.

    ``m_theta = softmax(X @ theta)`` sweeps out the interior of the family.
    The matrix has ``model_dimension(spec)`` full-rank columns.
    """
    cells = list(np.ndindex(*spec.dims))
    cols = []
    for term in spec.terms:
        for lv in itertools.product(*(range(1, spec.dims[a]) for a in term)):
            cols.append([all(c[a] == v for a, v in zip(term, lv)) for c in cells])
    if not cols:
        return np.zeros((len(cells), 0))
    return np.array(cols, dtype=float).T


# ------------------------------------------------------------------ #
# Model text syntax
# ------------------------------------------------------------------ #


def _resolve_generator(token: str, axis_names: Sequence[str]) -> tuple[int, ...]:
    lowered = [a.lower() for a in axis_names]
    if re.search(r"[*:+]", token):
        parts = [p.strip().lower() for p in re.split(r"[*:+]", token) if p.strip()]
        try:
            return tuple(lowered.index(p) for p in parts)
        except ValueError:
            raise ModelSpecError(f"unknown axis in generator {token!r}; axes are {list(axis_names)}") from None
    if token.lower() in lowered:
        return (lowered.index(token.lower()),)
    initials = [a[:1].upper() for a in axis_names]
    if len(set(initials)) != len(initials):
        raise ModelSpecError("axis initials are ambiguous; name generators with full axis names joined by '*'")
    try:
        return tuple(initials.index(ch.upper()) for ch in token)
    except ValueError:
        raise ModelSpecError(f"cannot resolve generator {token!r} against axes {list(axis_names)}") from None


def parse_model(text: str, axis_names: Sequence[str], dims: Sequence[int]) -> ModelSpec:
    """Parse ``independence``, ``saturated`` or ``loglinear:CR,CL,...``."""
    text = text.strip()
    if text.lower() == "independence":
        return ModelSpec.independence(dims, label=text)
    if text.lower() == "saturated":
        return ModelSpec.loglinear(dims, [tuple(range(len(dims)))], label=text)
    head, sep, body = text.partition(":")
    if head.strip().lower() != "loglinear" or not sep:
        raise ModelSpecError(f"unrecognised model spec {text!r}")
    tokens = [t.strip() for t in body.split(",") if t.strip()]
    if not tokens:
        raise ModelSpecError("loglinear spec lists no generators")
    gens = [_resolve_generator(t, axis_names) for t in tokens]
    return ModelSpec.loglinear(dims, gens, label=text)


# ------------------------------------------------------------------ #
# Batched fitting kernels
# ------------------------------------------------------------------ #


def _rows(a):
    return a.reshape(a.shape[0], -1)


def _drop_axes(gen, nd):
    return tuple(a + 1 for a in range(nd) if a not in gen)


def _normalize_rows(w):
    tot = w.reshape(w.shape[0], -1).sum(axis=1)
    return w / tot.reshape((-1,) + (1,) * (w.ndim - 1)), tot


def _ipf(w, generators, start=None, tol=IPF_TOL, cap=IPF_MAX_SWEEPS):
    """Batched iterative proportional fitting of normalized ``w`` to ``generators``.

    Returns the fitted tables, the sweep count per row and the final
    maximal margin discrepancy per row.
    """
    B, nd = w.shape[0], w.ndim - 1
    w, _ = _normalize_rows(w)
    axes = [_drop_axes(g, nd) for g in generators]
    targets = [w.sum(axis=ax, keepdims=True) for ax in axes]
    m = np.full(w.shape, 1.0 / math.prod(w.shape[1:])) if start is None else np.array(start, dtype=float)
    sweeps = np.zeros(B, dtype=int)
    disc = np.full(B, np.inf)
    active = np.arange(B)
    for sweep in range(1, cap + 1):
        ma = m[active]
        for ax, tg in zip(axes, targets):
            mm = ma.sum(axis=ax, keepdims=True)
            with np.errstate(divide="ignore", invalid="ignore"):
                ma = ma * np.where(mm > 0, tg[active] / mm, 0.0)
        err = np.zeros(active.size)
        for ax, tg in zip(axes, targets):
            diff = np.abs(ma.sum(axis=ax, keepdims=True) - tg[active])
            err = np.maximum(err, diff.reshape(active.size, -1).max(axis=1))
        m[active] = ma
        disc[active] = err
        sweeps[active] = sweep
        active = active[err >= tol]
        if active.size == 0:
            break
    return m, sweeps, disc


def _fit(spec: ModelSpec, w, start=None):
    """Weighted MLE for every row of ``w`` (shape ``(B, *dims)``)."""
    w = np.asarray(w, dtype=float)
    B = w.shape[0]
    if spec.kind == "fixed":
        return np.broadcast_to(spec.element, w.shape).copy(), np.zeros(B, int), np.zeros(B)
    if spec.kind == "independence":
        w, _ = _normalize_rows(w)
        m = w.sum(axis=2, keepdims=True) * w.sum(axis=1, keepdims=True)
        return m, np.ones(B, int), np.zeros(B)
    return _ipf(w, spec.generators, start=start)


def fit_weighted(spec: ModelSpec, w) -> ModelFit:
    """Family element maximizing ``sum w(t) log m(t)`` for nonnegative weights ``w``."""
    w = as_array(w)
    if w.shape != spec.dims:
        if w.size != spec.n_cells:
            raise DimensionMismatchError(f"weights of shape {w.shape} do not conform to {spec.dims}")
        w = w.reshape(spec.dims)
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    if w.sum() <= 0:
        raise ValueError("weights have zero total")
    m, sweeps, disc = _fit(spec, w[None])
    if disc[0] >= IPF_TOL:
        raise ConvergenceError(f"IPF did not converge in {IPF_MAX_SWEEPS} sweeps", float(disc[0]))
    return ModelFit(ProbVector(m[0], spec.dims), model_dimension(spec), True, int(sweeps[0]), float(disc[0]))


def _min_k2(spec: ModelSpec, d, start, rtol=1e-10, cap=IPF_MAX_SWEEPS):
    """Minimize ``K2(d, m)`` over the family by exact block-coordinate descent.

    Each block rescales the current table by an arbitrary function of one
    generator's cells; the optimal rescaling has the closed form
    ``M(i) ~ exp(E_q[log d - log q])`` with ``q`` the within-slice
    conditional of the current table.  Rows of ``d`` with empty cells are
    returned unchanged from ``start``.
    """
    d = np.asarray(d, dtype=float)
    m = np.array(start, dtype=float)
    nd = d.ndim - 1
    if spec.kind == "fixed":
        return m, _k2(_rows(d), _rows(m))
    positive = _rows(d).min(axis=1) > 0
    value = _k2(_rows(d), _rows(m))
    active = np.flatnonzero(positive)
    logd = np.log(np.where(d > 0, d, 1.0))
    axes = [_drop_axes(g, nd) for g in spec.generators]
    for _ in range(cap):
        if active.size == 0:
            break
        ma, ld = m[active], logd[active]
        for ax in axes:
            M = ma.sum(axis=ax, keepdims=True)
            q = ma / M
            with np.errstate(divide="ignore", invalid="ignore"):
                g = np.where(q > 0, q * (ld - np.log(q)), 0.0).sum(axis=ax, keepdims=True)
            g = np.exp(g - g.reshape(g.shape[0], -1).max(axis=1).reshape((-1,) + (1,) * nd))
            g /= g.reshape(g.shape[0], -1).sum(axis=1).reshape((-1,) + (1,) * nd)
            ma = g * q
        new = _k2(_rows(d[active]), _rows(ma))
        old = value[active]
        better = new <= old
        # a non-improving sweep means we are at numerical precision; keep the old table
        upd = active[better]
        m[upd] = ma[better]
        value[upd] = new[better]
        gain = np.where(better, old - new, 0.0)
        keep = better & (gain > rtol * np.maximum(old, 1e-300))
        active = active[keep]
    return m, value
