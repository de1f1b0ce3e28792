"""Balanced-panel containers and the three residual estimators.

The estimators cover the model classes used by the dependence tests:

- per-unit OLS for heterogeneous-coefficient panels,
- the within (demeaning) estimator for fixed-effects panels with a
  common slope vector,
- per-unit OLS with an auto-built lag column for dynamic panels.

All fitting is done through thin QR factorizations of the unit designs
rather than normal equations; the orthonormal bases are retained on
request because the moment-adjusted LM test needs them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

# Singular-value ratio below which a design is declared rank deficient.
RANK_TOL = 1e-10


class PanelError(Exception):
    """Base class for panel construction and fitting errors."""


class RankDeficientError(PanelError):
    """A unit design (or the pooled demeaned design) is numerically singular."""

    def __init__(self, scope: str, detail: str = ""):
        self.scope = scope
        msg = f"rank-deficient design: {scope}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NearUnitRootWarning(UserWarning):
    """A dynamic fit produced a lag coefficient with |alpha| > 0.999."""


class ModelKind(str, Enum):
    HETEROGENEOUS = "heterogeneous"
    FIXED_EFFECTS = "fixed_effects"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class ModelSpec:
    """Which estimator to use for a panel.

    ``include_intercept`` only matters for dynamic fits: when True and the
    panel itself carries no intercept column, a constant column is appended
    to the augmented (lag-extended) design.
    """

    kind: ModelKind
    include_intercept: bool = True


@dataclass(frozen=True)
class PanelDataset:
    """A balanced panel: ``n`` units observed over ``T`` periods.

    Parameters
    ----------
    y : ndarray, shape (n, T)
        Response grid.
    x : ndarray, shape (n, T, k)
        Regressor grid; ``k`` counts the intercept column when present.
        ``k == 0`` is allowed (pure dynamic panels).
    unit_ids, time_ids : sequences of str
        Labels, lengths n and T.
    has_intercept : bool
        When True, column 0 of ``x`` is the intercept and must be
        identically 1.
    """

    y: np.ndarray
    x: np.ndarray
    unit_ids: tuple
    time_ids: tuple
    has_intercept: bool = True

    def __post_init__(self):
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.float64))
        x = np.ascontiguousarray(np.asarray(self.x, dtype=np.float64))
        if y.ndim != 2:
            raise PanelError(f"y must be 2-d (n, T), got shape {y.shape}")
        if x.ndim != 3 or x.shape[:2] != y.shape:
            raise PanelError(
                f"x must have shape (n, T, k) matching y {y.shape}, got {x.shape}"
            )
        if len(self.unit_ids) != y.shape[0]:
            raise PanelError("unit_ids length must equal n")
        if len(self.time_ids) != y.shape[1]:
            raise PanelError("time_ids length must equal T")
        if self.has_intercept and x.shape[2] == 0:
            raise PanelError("has_intercept=True requires at least one x column")
        y.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids))
        object.__setattr__(self, "time_ids", tuple(self.time_ids))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def t(self) -> int:
        return self.y.shape[1]

    @property
    def k(self) -> int:
        return self.x.shape[2]


@dataclass(frozen=True)
class ResidualMatrix:
    """Fitted residuals plus the provenance needed by downstream tests.

    ``ortho_bases`` holds per-unit orthonormal design bases (n, T_eff, k_eff)
    when they were retained; the moment-adjusted LM test requires them.
    ``coef`` is (n, k_eff) for per-unit estimators and (k_eff,) for the
    pooled within estimator; it is diagnostic only.
    """

    resid: np.ndarray
    t_eff: int
    k_eff: int
    estimator: ModelSpec
    ortho_bases: Optional[np.ndarray] = None
    coef: Optional[np.ndarray] = None

    def __post_init__(self):
        r = np.ascontiguousarray(np.asarray(self.resid, dtype=np.float64))
        r.flags.writeable = False
        object.__setattr__(self, "resid", r)

    @property
    def n(self) -> int:
        return self.resid.shape[0]


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_dataset(data: PanelDataset, spec: ModelSpec) -> ValidationReport:
    """Check a panel against the requirements of the chosen estimator.

    Report-only: returns the list of violations instead of raising, so a
    front end can show all problems at once.
    """
    v = []
    if data.n < 3:
        v.append(f"n < 3 (got n={data.n})")
    min_t = data.k + 3 if spec.kind is ModelKind.DYNAMIC else data.k + 2
    if data.t < min_t:
        rule = "T < k+3 (dynamic)" if spec.kind is ModelKind.DYNAMIC else "T < k+2"
        v.append(f"{rule}: T={data.t}, k={data.k}")
    if data.has_intercept and data.k > 0:
        if not np.all(data.x[:, :, 0] == 1.0):
            v.append("intercept column (x column 0) is not identically 1")

    for i in range(data.n):
        yi = data.y[i]
        if np.all(yi == yi[0]):
            v.append(f"constant response for unit {data.unit_ids[i]}")

    if spec.kind is ModelKind.FIXED_EFFECTS:
        xd, _ = _demeaned_regressors(data)
        if xd.shape[2] > 0 and _pooled_sv_ratio(xd) < RANK_TOL:
            v.append("rank-deficient pooled demeaned design")
    else:
        if spec.kind is ModelKind.DYNAMIC:
            if data.t >= 2:
                designs = _dynamic_designs(data, spec)
            else:
                designs = None
        else:
            designs = data.x
        if designs is not None and designs.shape[2] > 0:
            ratios = _min_sv_ratio(designs)
            for i in np.nonzero(ratios < RANK_TOL)[0]:
                v.append(f"rank-deficient design for unit {data.unit_ids[i]}")

    return ValidationReport(tuple(v))


def _equilibrate(designs: np.ndarray):
    """Scale every design column to unit norm so the rank test measures
    collinearity rather than column scale (feedback designs mix columns
    whose magnitudes differ by many orders).

    Returns (scaled designs, column norms); zero columns keep norm 1 so
    they surface through the singular-value ratio instead of dividing by 0.
    """
    norms = np.linalg.norm(designs, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return designs / safe[:, None, :], norms


def _min_sv_ratio(designs: np.ndarray) -> np.ndarray:
    """Smallest/largest singular value per column-equilibrated design."""
    scaled, norms = _equilibrate(designs)
    sv = np.linalg.svd(scaled, compute_uv=False)
    largest = sv[:, 0]
    out = np.zeros(designs.shape[0])
    ok = largest > 0
    out[ok] = sv[ok, -1] / largest[ok]
    out[np.any(norms == 0, axis=1)] = 0.0
    return out


def _pooled_sv_ratio(xd: np.ndarray) -> float:
    """Singular-value ratio of the column-equilibrated pooled demeaned stack."""
    stack = xd.reshape(-1, xd.shape[2])
    return float(_min_sv_ratio(stack[None, :, :])[0])


def _per_unit_ols(y: np.ndarray, designs: np.ndarray, unit_ids, keep_bases: bool):
    """QR-based least squares for every unit of a stacked design.

    Works on column-equilibrated designs (same column space, so identical
    residuals and bases) and unscales the coefficients at the end. Returns
    (residuals, coefficients, bases-or-None); raises RankDeficientError
    naming the first offending unit.
    """
    scaled, norms = _equilibrate(designs)
    sv = np.linalg.svd(scaled, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(sv[:, 0] > 0, sv[:, -1] / sv[:, 0], 0.0)
    bad = np.nonzero((ratios < RANK_TOL) | np.any(norms == 0, axis=1))[0]
    if bad.size:
        raise RankDeficientError(f"unit {unit_ids[bad[0]]}")
    q, r = np.linalg.qr(scaled)
    qty = np.einsum("ntk,nt->nk", q, y)
    resid = y - np.einsum("ntk,nk->nt", q, qty)
    coef = np.linalg.solve(r, qty[:, :, None])[:, :, 0] / norms
    return resid, coef, (q if keep_bases else None)


def fit_heterogeneous(data: PanelDataset, keep_bases: bool = True) -> ResidualMatrix:
    """Per-unit OLS residuals for the heterogeneous-coefficient model.

    Each unit's response is regressed on that unit's own design, so the
    residual vector is orthogonal to every regressor column of the unit.

    Parameters
    ----------
    data : PanelDataset
    keep_bases : bool
        Retain the per-unit orthonormal design bases (needed later by the
        moment-adjusted LM test).

    Raises
    ------
    RankDeficientError
        If some unit's design has smallest/largest singular value below
        ``RANK_TOL``.
    """
    if data.t < data.k + 2:
        raise PanelError(f"need T >= k+2, got T={data.t}, k={data.k}")
    if data.k == 0:
        raise PanelError("heterogeneous fit needs at least one regressor column")
    resid, coef, bases = _per_unit_ols(data.y, data.x, data.unit_ids, keep_bases)
    return ResidualMatrix(
        resid=resid,
        t_eff=data.t,
        k_eff=data.k,
        estimator=ModelSpec(ModelKind.HETEROGENEOUS),
        ortho_bases=bases,
        coef=coef,
    )


def _demeaned_regressors(data: PanelDataset):
    """Within-transformed regressors with the intercept column dropped.

    The intercept demeans to zero, so it is removed before the pooled
    regression; returns (x_demeaned, y_demeaned).
    """
    x = data.x[:, :, 1:] if data.has_intercept else data.x
    xd = x - x.mean(axis=1, keepdims=True)
    yd = data.y - data.y.mean(axis=1, keepdims=True)
    return xd, yd


def fit_fixed_effects(data: PanelDataset) -> ResidualMatrix:
    """Within-estimator residuals for the common-slope fixed-effects model.

    Unit means are removed from response and regressors, a single slope
    vector is estimated from the pooled demeaned stacks, and residuals are
    the demeaned response minus its fitted part. Residuals therefore sum
    to zero within each unit.
    """
    if data.t < data.k + 2:
        raise PanelError(f"need T >= k+2, got T={data.t}, k={data.k}")
    xd, yd = _demeaned_regressors(data)
    k_eff = xd.shape[2]
    if k_eff == 0:
        resid = yd
        coef = np.zeros(0)
    else:
        if _pooled_sv_ratio(xd) < RANK_TOL:
            raise RankDeficientError("pooled", "demeaned Gram matrix singular")
        gram = np.einsum("ntk,ntl->kl", xd, xd)
        rhs = np.einsum("ntk,nt->k", xd, yd)
        coef = np.linalg.solve(gram, rhs)
        resid = yd - xd @ coef
    return ResidualMatrix(
        resid=resid,
        t_eff=data.t,
        k_eff=k_eff,
        estimator=ModelSpec(ModelKind.FIXED_EFFECTS),
        ortho_bases=None,
        coef=coef,
    )


def _dynamic_designs(data: PanelDataset, spec: ModelSpec) -> np.ndarray:
    """Augmented designs (n, T-1, k_eff): lag column, panel columns, intercept.

    Period 1 of each unit is consumed as the presample lag. The lag comes
    first; an intercept column is appended only when requested and the
    panel does not already carry one.
    """
    lag = data.y[:, :-1, None]
    cols = [lag, data.x[:, 1:, :]]
    if spec.include_intercept and not data.has_intercept:
        cols.append(np.ones((data.n, data.t - 1, 1)))
    return np.concatenate(cols, axis=2)


def fit_dynamic(data: PanelDataset, spec: ModelSpec, keep_bases: bool = True) -> ResidualMatrix:
    """Per-unit OLS residuals for the dynamic model with a lagged response.

    The design for unit i at time t is (y_{i,t-1}, x_it', [1]); the first
    period supplies the presample lag, so T_eff = T - 1.

    Warns with :class:`NearUnitRootWarning` (non-fatal) when any estimated
    lag coefficient exceeds 0.999 in absolute value.
    """
    if spec.kind is not ModelKind.DYNAMIC:
        raise PanelError("fit_dynamic requires a Dynamic model spec")
    if data.t < data.k + 3:
        raise PanelError(f"need T >= k+3 for dynamic fits, got T={data.t}, k={data.k}")
    designs = _dynamic_designs(data, spec)
    resid, coef, bases = _per_unit_ols(data.y[:, 1:], designs, data.unit_ids, keep_bases)
    alpha = coef[:, 0]
    hot = np.nonzero(np.abs(alpha) > 0.999)[0]
    if hot.size:
        labels = ", ".join(str(data.unit_ids[i]) for i in hot[:5])
        warnings.warn(
            f"|lag coefficient| > 0.999 for {hot.size} unit(s): {labels}",
            NearUnitRootWarning,
            stacklevel=2,
        )
    return ResidualMatrix(
        resid=resid,
        t_eff=data.t - 1,
        k_eff=designs.shape[2],
        estimator=spec,
        ortho_bases=bases,
        coef=coef,
    )


def fit(data: PanelDataset, spec: ModelSpec, keep_bases: bool = True) -> ResidualMatrix:
    """Dispatch to the estimator selected by ``spec.kind``."""
    if spec.kind is ModelKind.HETEROGENEOUS:
        return fit_heterogeneous(data, keep_bases=keep_bases)
    if spec.kind is ModelKind.FIXED_EFFECTS:
        return fit_fixed_effects(data)
    return fit_dynamic(data, spec, keep_bases=keep_bases)
