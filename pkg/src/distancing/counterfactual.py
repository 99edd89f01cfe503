"""Apply the calibrated contact cap and compute compensating wage subsidies.

Each (region, industry) cell gets the subsidy that would offset its cost
increase under the cap, then cells are aggregated to employment-weighted
sector and location tables.  The telecom fallback never enters the
subsidy numbers; it only appears in the cost-ratio curves, where the two
regimes are compared across densities.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import fsum
from typing import Iterable, Mapping, Sequence

from .calibrate import CalibratedModel, CellParams
from .errors import CalibrationError
from .model import (
    FirmParams,
    Intervention,
    Regime,
    compensating_subsidy,
    contacts_at_density,
    distancing_cost_ratio,
    preferred_regime,
    telecom_cost_ratio,
)

logger = logging.getLogger(__name__)


@dataclass
class SubsidyResult:
    """Outcome for one (zcta, industry) cell under the calibrated cap."""

    zcta: str
    industry_code: str
    nstar: float
    cap_ratio: float  # min(1, cap / nstar); 1 means the cap does not bind
    subsidy: float
    employment: float
    regime: Regime | None = None


@dataclass
class AggRow:
    """One employment-weighted aggregate (a sector, a ZCTA, or a named region)."""

    key: str
    subsidy: float
    employment: float


def compute_subsidies(
    model: CalibratedModel,
    frame: Sequence[CellParams],
    telecom_cost: float | None = None,
) -> list[SubsidyResult]:
    """Per-cell compensating subsidies at the calibrated cap.

    Cells with chi = 0 have nothing to disrupt and get subsidy 0.  When
    ``telecom_cost`` is given, each cell is additionally annotated with the
    regime the firm would pick; the subsidy itself always prices the
    face-to-face (distanced) response.
    """
    results = []
    for cell in frame:
        params = model.industry_params.get(cell.industry_code)
        if params is None:
            params = FirmParams.from_chi(cell.chi)
        nstar = contacts_at_density(cell.density, model.eps, params)
        ratio = min(1.0, model.contact_cap / nstar)
        subsidy = compensating_subsidy(ratio, params)
        regime = None
        if telecom_cost is not None:
            regime, _ = preferred_regime(
                Intervention(model.contact_cap, telecom_cost), cell.density, model.eps, params
            )
        results.append(
            SubsidyResult(
                zcta=cell.zcta,
                industry_code=cell.industry_code,
                nstar=nstar,
                cap_ratio=ratio,
                subsidy=subsidy,
                employment=cell.employment,
                regime=regime,
            )
        )
    return results


def _weighted_rows(groups: Mapping[str, list[SubsidyResult]]) -> list[AggRow]:
    rows = []
    for key in sorted(groups):
        members = groups[key]
        employment = fsum(r.employment for r in members)
        if employment <= 0.0:
            continue
        subsidy = fsum(r.subsidy * r.employment for r in members) / employment
        rows.append(AggRow(key=key, subsidy=subsidy, employment=employment))
    return rows


def _overall(results: Sequence[SubsidyResult]) -> AggRow:
    ordered = sorted(results, key=lambda r: (r.zcta, r.industry_code))
    employment = fsum(r.employment for r in ordered)
    if employment <= 0.0:
        raise CalibrationError("no employment in the subsidy results")
    subsidy = fsum(r.subsidy * r.employment for r in ordered) / employment
    return AggRow(key="ALL", subsidy=subsidy, employment=employment)


def sector_table(results: Sequence[SubsidyResult]) -> tuple[list[AggRow], AggRow]:
    """Employment-weighted subsidy per industry, most affected first.

    Ties break by industry code; the overall employment-weighted average
    is returned separately (reports append it as a final row).
    """
    groups: dict[str, list[SubsidyResult]] = {}
    for r in sorted(results, key=lambda r: (r.industry_code, r.zcta)):
        groups.setdefault(r.industry_code, []).append(r)
    rows = _weighted_rows(groups)
    rows.sort(key=lambda row: (-row.subsidy, row.key))
    return rows, _overall(results)


def location_table(
    results: Sequence[SubsidyResult],
    grouping: Mapping[str, str] | None = None,
) -> tuple[list[AggRow], AggRow]:
    """Employment-weighted subsidy per region.

    Without a grouping, regions are individual ZCTAs.  With a grouping
    (zcta -> region name), only member ZCTAs are aggregated, into one row
    per named region; grouping entries that match no result are warned
    about.
    """
    groups: dict[str, list[SubsidyResult]] = {}
    ordered = sorted(results, key=lambda r: (r.zcta, r.industry_code))
    if grouping is None:
        for r in ordered:
            groups.setdefault(r.zcta, []).append(r)
    else:
        present = {r.zcta for r in results}
        for zcta in sorted(set(grouping) - present):
            logger.warning("region grouping lists %s, which has no results", zcta)
        for r in ordered:
            name = grouping.get(r.zcta)
            if name is not None:
                groups.setdefault(name, []).append(r)
    rows = _weighted_rows(groups)
    rows.sort(key=lambda row: (-row.subsidy, row.key))
    return rows, _overall(results)


@dataclass
class RegimeSwitch:
    """A density where the preferred regime changes, refined by bisection."""

    density: float
    from_regime: Regime
    to_regime: Regime


@dataclass
class CostCurves:
    """Sampled cost-ratio curves over a density grid, plus regime switches."""

    densities: list[float]
    distancing: list[float]
    telecom: list[float | None]
    regimes: list[Regime]
    switches: list[RegimeSwitch]


def cost_ratio_curves(
    params: FirmParams,
    density_grid: Sequence[float],
    contact_cap: float,
    telecom_cost: float | None,
    eps: float,
) -> CostCurves:
    """Cost ratios of the capped and telecom responses across densities.

    The distancing curve equals 1 on the unconstrained segment (low
    density, few contacts) and rises with density once the cap binds; the
    telecom curve rises throughout and is only defined where telecom costs
    at least as much as face-to-face contact.  Regime switches between
    adjacent grid points are located by bisection.
    """
    intervention = Intervention(contact_cap, telecom_cost)
    densities = [float(d) for d in density_grid]
    if any(d <= 0.0 for d in densities):
        raise ValueError("density grid must be strictly positive")
    distancing: list[float] = []
    telecom: list[float | None] = []
    regimes: list[Regime] = []
    for d in densities:
        nstar = contacts_at_density(d, eps, params)
        if nstar <= contact_cap:
            distancing.append(1.0)
        else:
            distancing.append(distancing_cost_ratio(contact_cap / nstar, params))
        if telecom_cost is not None and telecom_cost >= d ** (-eps):
            telecom.append(telecom_cost_ratio(telecom_cost, d, eps, params))
        else:
            telecom.append(None)
        regimes.append(preferred_regime(intervention, d, eps, params)[0])

    switches = []
    for i in range(1, len(densities)):
        if regimes[i] != regimes[i - 1]:
            crossing = _refine_switch(
                intervention, params, eps, densities[i - 1], densities[i],
                regimes[i - 1], regimes[i],
            )
            switches.append(RegimeSwitch(crossing, regimes[i - 1], regimes[i]))
    return CostCurves(densities, distancing, telecom, regimes, switches)


def _refine_switch(
    intervention: Intervention,
    params: FirmParams,
    eps: float,
    lo: float,
    hi: float,
    from_regime: Regime,
    to_regime: Regime,
) -> float:
    """Bisect the density where the regime flips between two grid points."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        regime = preferred_regime(intervention, mid, eps, params)[0]
        if regime == from_regime:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return 0.5 * (lo + hi)
