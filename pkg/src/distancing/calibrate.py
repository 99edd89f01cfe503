"""Pinning down the two free parameters: density elasticity and contact cap.

The elasticity ``eps`` scales how fast contact costs fall with density.
Model-implied log productivity per cell is ``eps * chi * ln(d)``, which is
linear in ``eps``, so the employment-weighted regression of it on
``ln(d)`` has slope ``eps * k`` with ``k`` a pure data moment
(Cov_w(chi*ln d, ln d) / Var_w(ln d)).  Matching a target slope is then a
one-line solve, guarded by an explicit re-regression.

The contact cap ``N`` is set so that capped aggregate contacts hit a
target fraction of the unconstrained aggregate.  The aggregate is a
continuous, piecewise-linear, nondecreasing function of N; we solve by
bisection for robustness to ties, and also ship the exact sorted solver,
which doubles as an independent check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import fsum, log
from typing import Iterable, Mapping, Sequence

from .errors import CalibrationError
from .geo import RegionCell, RegionDensity
from .industries import IndustryMix, MixResolver
from .model import FirmParams, contacts_at_density

logger = logging.getLogger(__name__)

_BISECT_ABS_TOL = 1e-10
_SHARE_REL_TOL = 1e-9
_SLOPE_TOL = 1e-9


@dataclass(frozen=True)
class CellParams:
    """Everything the model needs about one (region, industry) cell."""

    zcta: str
    naics: str
    industry_code: str
    employment: float
    chi: float
    density: float


@dataclass
class CalibratedModel:
    """Calibration output: the global parameters plus per-industry firm params."""

    eps: float
    contact_cap: float
    industry_params: dict[str, FirmParams]
    target_contact_share: float = 0.5
    target_elasticity: float = 0.04

    def __post_init__(self):
        if self.eps <= 0.0:
            raise CalibrationError(f"eps must be positive, got {self.eps!r}")
        if self.contact_cap <= 0.0:
            raise CalibrationError(f"contact_cap must be positive, got {self.contact_cap!r}")


@dataclass
class CalibrationReport:
    """Diagnostics for the calibration run."""

    eps: float
    contact_cap: float
    slope_factor: float  # k: slope of the density regression per unit of eps
    achieved_slope: float
    achieved_share: float
    n_cells: int
    eps_fixed: bool = False
    notes: list[str] = field(default_factory=list)


def cell_parameters(
    cells: Iterable[RegionCell],
    resolver: MixResolver,
    densities: Mapping[str, RegionDensity],
    group: str = "communication",
) -> list[CellParams]:
    """Join cells with industry chi and region density, dropping unusable ones.

    Cells with zero employment, an unresolvable industry, or no density
    record cannot enter the model; the latter two are warned about.
    """
    frame: list[CellParams] = []
    missing_density: set[str] = set()
    for cell in sorted(cells, key=lambda c: (c.zcta, c.industry_code)):
        if cell.employment <= 0.0:
            continue
        mix = resolver.resolve(cell.industry_code)
        if mix is None:
            continue  # resolver records and reports unresolved codes
        density = densities.get(cell.zcta)
        if density is None:
            missing_density.add(cell.zcta)
            continue
        frame.append(
            CellParams(
                zcta=cell.zcta,
                naics=cell.industry_code,
                industry_code=mix.industry_code,
                employment=cell.employment,
                chi=mix.chi[group],
                density=density.normalized_density,
            )
        )
    if missing_density:
        logger.warning(
            "%d regions lack density records; their cells were skipped: %s",
            len(missing_density), ", ".join(sorted(missing_density)),
        )
    return frame


def _weighted_slope(points: Sequence[tuple[float, float, float]]) -> float:
    """Weighted least-squares slope of z on x with intercept.

    ``points`` are (weight, x, z) triples.
    """
    total = fsum(w for w, _, _ in points)
    if total <= 0.0:
        raise CalibrationError("total weight is zero; cannot regress")
    xbar = fsum(w * x for w, x, _ in points) / total
    zbar = fsum(w * z for w, _, z in points) / total
    sxx = fsum(w * (x - xbar) ** 2 for w, x, _ in points)
    if sxx <= 0.0:
        raise CalibrationError("at least two distinct densities are required")
    sxz = fsum(w * (x - xbar) * (z - zbar) for w, x, z in points)
    return sxz / sxx


def slope_factor(frame: Sequence[CellParams]) -> float:
    """The data moment k: regression slope of chi*ln(d) on ln(d), weighted."""
    points = [(c.employment, log(c.density), c.chi * log(c.density)) for c in frame]
    return _weighted_slope(points)


def calibrate_epsilon(frame: Sequence[CellParams], target_elasticity: float) -> float:
    """Solve for eps so the implied-productivity regression hits the target slope.

    The regressand is linear in eps, so eps = target / k.  A verification
    re-regression with the returned eps must reproduce the target within
    1e-9 or the calibration aborts.
    """
    if target_elasticity <= 0.0:
        raise CalibrationError(f"target elasticity must be positive, got {target_elasticity!r}")
    k = slope_factor(frame)
    if k <= 0.0:
        raise CalibrationError(
            f"slope factor k={k!r} is not positive; exposure does not rise with "
            "density in this data, so no positive eps can match the target"
        )
    eps = target_elasticity / k
    check = [(c.employment, log(c.density), eps * c.chi * log(c.density)) for c in frame]
    achieved = _weighted_slope(check)
    if abs(achieved - target_elasticity) > _SLOPE_TOL:
        raise CalibrationError(
            f"verification regression slope {achieved!r} misses target "
            f"{target_elasticity!r} by more than {_SLOPE_TOL}"
        )
    return eps


def optimal_contacts_grid(
    frame: Sequence[CellParams], eps: float
) -> dict[tuple[str, str], float]:
    """Optimal contacts per (zcta, naics) cell at the calibrated elasticity."""
    return {
        (c.zcta, c.naics): contacts_at_density(c.density, eps, FirmParams.from_chi(c.chi))
        for c in frame
    }


def aggregate_contact_share(pairs: Sequence[tuple[float, float]], cap: float) -> float:
    """Capped aggregate contacts as a fraction of the unconstrained aggregate."""
    total = fsum(w * n for n, w in pairs)
    if total <= 0.0:
        raise CalibrationError("total contacts are zero; cannot compute a share")
    capped = fsum(w * min(cap, n) for n, w in pairs)
    return capped / total


def calibrate_cap(pairs: Sequence[tuple[float, float]], target_share: float) -> float:
    """Bisect for the cap N with capped contacts = target share of the total.

    ``pairs`` are (optimal contacts, employment weight).  The target must
    lie in (0, 1]; 1 means no binding cap and returns the largest optimal
    contact count.  The bisection runs to 1e-10 on N and the returned cap
    reproduces the target share within 1e-8 relative.
    """
    if not 0.0 < target_share <= 1.0:
        raise ValueError(f"target contact share must lie in (0, 1], got {target_share!r}")
    if not pairs:
        raise CalibrationError("no cells to calibrate the contact cap on")
    total = fsum(w * n for n, w in pairs)
    if total <= 0.0:
        raise CalibrationError("total contacts are zero; cannot calibrate a cap")
    hi = max(n for n, _ in pairs)
    if target_share == 1.0:
        return hi
    target = target_share * total
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # interval exhausted at float resolution
        capped = fsum(w * min(mid, n) for n, w in pairs)
        if capped < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _BISECT_ABS_TOL:
            mid = 0.5 * (lo + hi)
            capped = fsum(w * min(mid, n) for n, w in pairs)
            if abs(capped - target) <= _SHARE_REL_TOL * target:
                break
    cap = 0.5 * (lo + hi)
    achieved = aggregate_contact_share(pairs, cap)
    if abs(achieved - target_share) > 1e-8 * target_share:
        raise CalibrationError(
            f"bisection finished at share {achieved!r}, target {target_share!r}"
        )
    return cap


def calibrate_cap_exact(pairs: Sequence[tuple[float, float]], target_share: float) -> float:
    """Exact cap from the sorted piecewise-linear aggregate (closed form).

    The aggregate capped-contact function is linear between consecutive
    distinct optimal-contact values; locate the segment containing the
    target and invert it.  Used as an independent check on the bisection.
    """
    if not 0.0 < target_share <= 1.0:
        raise ValueError(f"target contact share must lie in (0, 1], got {target_share!r}")
    if not pairs:
        raise CalibrationError("no cells to calibrate the contact cap on")
    ordered = sorted(pairs)
    total = fsum(w * n for n, w in ordered)
    if total <= 0.0:
        raise CalibrationError("total contacts are zero; cannot calibrate a cap")
    target = target_share * total
    below = 0.0  # contacts from cells already fully below the cap
    weight_above = fsum(w for _, w in ordered)
    previous = 0.0
    index = 0
    while index < len(ordered):
        n = ordered[index][0]
        # capped(cap) = below + cap * weight_above on [previous, n]
        if below + n * weight_above >= target:
            return (target - below) / weight_above
        while index < len(ordered) and ordered[index][0] == n:
            below += ordered[index][0] * ordered[index][1]
            weight_above -= ordered[index][1]
            index += 1
        previous = n
    return previous


def industry_parameters(mixes: Iterable[IndustryMix], group: str = "communication") -> dict[str, FirmParams]:
    """Firm parameters per industry from its exposure share in ``group``."""
    return {
        mix.industry_code: FirmParams.from_chi(mix.chi[group])
        for mix in sorted(mixes, key=lambda m: m.industry_code)
    }


def run_calibration(
    frame: Sequence[CellParams],
    mixes: Iterable[IndustryMix],
    target_contact_share: float = 0.5,
    target_elasticity: float = 0.04,
    fixed_eps: float | None = None,
) -> tuple[CalibratedModel, CalibrationReport]:
    """Full calibration: eps (solved or fixed), contact grid, contact cap."""
    if not frame:
        raise CalibrationError("no usable cells; calibration is impossible")
    k = slope_factor(frame)
    if fixed_eps is not None:
        if fixed_eps <= 0.0:
            raise CalibrationError(f"fixed eps must be positive, got {fixed_eps!r}")
        eps = fixed_eps
    else:
        eps = calibrate_epsilon(frame, target_elasticity)
    nstar = optimal_contacts_grid(frame, eps)
    pairs = [
        (nstar[(c.zcta, c.naics)], c.employment)
        for c in frame
    ]
    cap = calibrate_cap(pairs, target_contact_share)
    achieved_share = aggregate_contact_share(pairs, cap)
    model = CalibratedModel(
        eps=eps,
        contact_cap=cap,
        industry_params=industry_parameters(mixes),
        target_contact_share=target_contact_share,
        target_elasticity=target_elasticity,
    )
    report = CalibrationReport(
        eps=eps,
        contact_cap=cap,
        slope_factor=k,
        achieved_slope=eps * k,
        achieved_share=achieved_share,
        n_cells=len(frame),
        eps_fixed=fixed_eps is not None,
    )
    if fixed_eps is not None and abs(eps * k - target_elasticity) > 1e-12:
        report.notes.append(
            f"eps fixed at {eps}; implied density slope {eps * k:.6g} "
            f"differs from the target {target_elasticity:.6g}"
        )
    return model, report
