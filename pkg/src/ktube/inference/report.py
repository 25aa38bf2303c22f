"""Aggregated fit report with a versioned JSON form and a plain-text rendering."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

from ..errors import InvariantError
from ..models import ModelSpec, degrees_of_freedom, model_dimension
from ..tables import ContingencyTable
from ..tubefit import lower_confidence_limit, mid_tube_distance, rho_star, solve_at_pi
from .bootstrap import bootstrap_lower_limit
from .indices import aic_bic, n_star, pi_star
from .reference import ReferenceDistribution, critical_value

SCHEMA_VERSION = 1
# slack for comparing two radii computed by different solvers
_RADIUS_SLACK = 1e-9


def _sqrt(x):
    return None if x is None else math.sqrt(max(x, 0.0))


@dataclass(frozen=True)
class InferenceReport:
    """Classical and tubular summaries of one model fitted to one table.

    ``n_star`` is an integer or the string ``"> n"`` form produced when the
    classical test has power below one half even at the cap.
    """

    classical_lrt: float
    df: int
    rho_star: float
    rho_star_lower_asymptotic: float
    aic: float
    bic: float
    k: int
    n: float
    model: str = ""
    alpha: float = 0.05
    mid_tube: float | None = None
    rho_star_lower_bootstrap: float | None = None
    pi_star: float | None = None
    n_star: int | str | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        for name in ("rho_star_lower_asymptotic", "rho_star_lower_bootstrap"):
            v = getattr(self, name)
            if v is not None and v > self.rho_star + _RADIUS_SLACK:
                raise InvariantError(f"{name} = {v} exceeds rho_star = {self.rho_star}")

    @property
    def sqrt_rho_star(self) -> float:
        return _sqrt(self.rho_star)

    @property
    def sqrt_rho_star_lower_asymptotic(self) -> float:
        return _sqrt(self.rho_star_lower_asymptotic)

    @property
    def sqrt_rho_star_lower_bootstrap(self) -> float | None:
        return _sqrt(self.rho_star_lower_bootstrap)

    @property
    def sqrt_4_mid_tube(self) -> float | None:
        return None if self.mid_tube is None else _sqrt(4.0 * self.mid_tube)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, payload: dict) -> "InferenceReport":
        version = payload.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {version!r}")
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown report fields: {sorted(unknown)}")
        return cls(**payload)

    @classmethod
    def from_json(cls, text: str) -> "InferenceReport":
        return cls.from_dict(json.loads(text))

    def render(self) -> str:
        rows = [
            ("model", self.model or "-"),
            ("n", _fmt(self.n)),
            ("k", str(self.k)),
            ("df", str(self.df)),
            ("2nL2 (classical)", _fmt(self.classical_lrt)),
            ("AIC", _fmt(self.aic)),
            ("BIC", _fmt(self.bic)),
            ("rho*", _fmt(self.rho_star)),
            ("sqrt rho*", _fmt(self.sqrt_rho_star)),
            (f"sqrt rho*_L (asymptotic, alpha={self.alpha:g})", _fmt(self.sqrt_rho_star_lower_asymptotic)),
        ]
        if self.rho_star_lower_bootstrap is not None:
            rows.append((f"sqrt rho*_L (bootstrap, alpha={self.alpha:g})", _fmt(self.sqrt_rho_star_lower_bootstrap)))
        if self.mid_tube is not None:
            rows.append(("sqrt(4 T2_1/2)", _fmt(self.sqrt_4_mid_tube)))
        if self.pi_star is not None:
            rows.append(("pi* (best effort)", _fmt(self.pi_star)))
        if self.n_star is not None:
            rows.append(("N*", str(self.n_star)))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows) + "\n"


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float) and x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return f"{x:.6g}" if isinstance(x, float) else str(x)


def asymptotic_lower_limit(data, spec: ModelSpec, alpha: float = 0.05, n=None) -> float:
    return lower_confidence_limit(data, spec, critical_value(ReferenceDistribution.half_mixture(), alpha), n=n)


def build_report(
    table: ContingencyTable,
    spec: ModelSpec,
    alpha: float = 0.05,
    bootstrap_B: int | None = None,
    seed: int | None = None,
    with_pi_star: bool = False,
    with_n_star: bool = False,
    n_star_reps: int = 1000,
    n_cap: int | None = None,
    workers: int = 1,
) -> InferenceReport:
    """Fit ``spec`` to ``table`` and collect the indices requested."""
    if (bootstrap_B is not None or with_n_star) and seed is None:
        raise ValueError("bootstrap and N* require an explicit seed")
    n = float(table.n)
    df = degrees_of_freedom(spec)
    k = model_dimension(spec)
    lrt = solve_at_pi(table, spec, 0.0).lrt
    rho = rho_star(table, spec)
    aic, bic = aic_bic(lrt, k, n)
    lower = 0.0 if df == 0 else asymptotic_lower_limit(table, spec, alpha)
    boot = None
    if bootstrap_B is not None and df > 0:
        boot = bootstrap_lower_limit(table, spec, B=bootstrap_B, alpha=alpha, seed=seed, workers=workers).limit
    elif bootstrap_B is not None:
        boot = 0.0
    pi = pi_star(table, spec).value if with_pi_star else None
    ns = None
    if with_n_star and df > 0:
        res = n_star(table, spec, alpha=alpha, reps=n_star_reps, seed=seed, n_cap=n_cap)
        ns = str(res) if res.exceeds_cap else res.value
    return InferenceReport(
        classical_lrt=lrt,
        df=df,
        rho_star=rho,
        rho_star_lower_asymptotic=lower,
        aic=aic,
        bic=bic,
        k=k,
        n=n,
        model=spec.label or spec.kind,
        alpha=alpha,
        mid_tube=mid_tube_distance(table, spec),
        rho_star_lower_bootstrap=boot,
        pi_star=pi,
        n_star=ns,
    )
