"""ZIP-level establishment data: employment estimates, density, exposure.

Establishment counts come in employment-size bins per (ZCTA, NAICS) cell;
employment is estimated with bin midpoints.  Cells whose size classes are
partly withheld get those establishments imputed at the national mean
plant size of the classes the cell does not report.  Population densities
are normalized so their employment-weighted national mean is one, which
is the unit the cost model expects.

All aggregation here iterates in sorted (zcta, industry) order and
accumulates with ``math.fsum`` (exact compensated summation), so results
are bit-stable across runs regardless of input row order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from math import fsum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import csvio
from .errors import IngestionError
from .industries import GROUPS, MixResolver

logger = logging.getLogger(__name__)

# Establishment-size bins and their midpoint employment estimates.  The
# open-ended 1000+ bin has no midpoint; it uses the national mean size of
# 1000+ plants in the industry, or a configured default when unavailable.
DEFAULT_BIN_MIDPOINTS = {
    "1-4": 2.5,
    "5-9": 7.0,
    "10-19": 14.5,
    "20-49": 34.5,
    "50-99": 74.5,
    "100-249": 174.5,
    "250-499": 374.5,
    "500-999": 749.5,
}
OPEN_BIN = "1000+"
DEFAULT_OPEN_BIN_MEAN = 1500.0


@dataclass(frozen=True)
class CbpRow:
    """One establishment-count record: a size bin or a suppressed batch."""

    zcta: str
    naics: str
    size_bin: str
    establishments: int
    suppressed: bool = False


@dataclass
class RegionCell:
    """Estimated employment of one industry in one ZCTA."""

    zcta: str
    industry_code: str
    employment: float
    imputed_fraction: float = 0.0

    def __post_init__(self):
        if self.employment < 0:
            raise IngestionError(f"negative employment in cell {self.zcta}/{self.industry_code}")
        if not 0.0 <= self.imputed_fraction <= 1.0:
            raise IngestionError(
                f"imputed_fraction {self.imputed_fraction!r} outside [0, 1] "
                f"in cell {self.zcta}/{self.industry_code}"
            )


@dataclass
class RegionDensity:
    """A ZCTA's population density, raw and normalized to the weighted mean."""

    zcta: str
    population: float
    land_area_km2: float
    raw_density: float
    normalized_density: float


class NationalSizeDistribution:
    """National establishment counts and employment by size bin per NAICS.

    Lookups fall back to ancestor codes (one digit truncated at a time)
    when the exact industry is absent.
    """

    def __init__(self, table: Mapping[str, Mapping[str, tuple[float, float]]]):
        self._table = {code: dict(bins) for code, bins in table.items()}

    @classmethod
    def from_csv(cls, path: str | Path) -> "NationalSizeDistribution":
        fieldnames, rows = csvio.read_rows(path)
        csvio.require_fields(
            fieldnames, ["naics", "size_bin", "establishments", "employment"], path=path
        )
        table: dict[str, dict[str, tuple[float, float]]] = {}
        for row in rows:
            naics = row["naics"].strip()
            size_bin = row["size_bin"].strip()
            est = csvio.parse_float(row["establishments"], path=path, field="establishments")
            emp = csvio.parse_float(row["employment"], path=path, field="employment")
            table.setdefault(naics, {})[size_bin] = (est, emp)
        return cls(table)

    def resolve(self, naics: str) -> dict[str, tuple[float, float]] | None:
        probe = naics
        while len(probe) >= 2:
            if probe in self._table:
                return self._table[probe]
            probe = probe[:-1]
        return None

    def mean_size(self, naics: str, exclude_bins: Iterable[str] = ()) -> float | None:
        """Mean plant size over the bins NOT in ``exclude_bins``.

        Falls back to the mean over all bins when the complement is empty,
        and to None when no distribution covers the industry at all.
        """
        bins = self.resolve(naics)
        if bins is None:
            return None
        excluded = set(exclude_bins)
        usable = {b: v for b, v in bins.items() if b not in excluded}
        est = fsum(v[0] for b, v in sorted(usable.items()))
        emp = fsum(v[1] for b, v in sorted(usable.items()))
        if est <= 0.0:
            est = fsum(v[0] for b, v in sorted(bins.items()))
            emp = fsum(v[1] for b, v in sorted(bins.items()))
        if est <= 0.0:
            return None
        return emp / est

    def open_bin_mean(self, naics: str, default: float = DEFAULT_OPEN_BIN_MEAN) -> float:
        bins = self.resolve(naics)
        if bins and OPEN_BIN in bins:
            est, emp = bins[OPEN_BIN]
            if est > 0:
                return emp / est
        return default


def estimate_cell_employment(
    size_bin_counts: Mapping[str, int], bin_midpoints: Mapping[str, float]
) -> float:
    """Sum of establishment counts times bin midpoints."""
    total = []
    for size_bin in sorted(size_bin_counts):
        count = size_bin_counts[size_bin]
        if count < 0:
            raise IngestionError(f"negative establishment count in bin {size_bin!r}")
        if size_bin not in bin_midpoints:
            raise IngestionError(f"unknown size bin label {size_bin!r}")
        total.append(count * bin_midpoints[size_bin])
    return fsum(total)


def impute_suppressed(
    known_bins: Mapping[str, int],
    suppressed_count: int,
    naics: str,
    national: NationalSizeDistribution,
    bin_midpoints: Mapping[str, float] | None = None,
) -> tuple[float, float]:
    """Employment estimate for a cell with possibly-withheld size classes.

    Establishments with withheld sizes are assigned the national mean plant
    size over the size classes the cell does not report.  Returns
    (employment, imputed_fraction).  Raises :class:`IngestionError` when
    imputation is needed but no national distribution covers the industry
    at any ancestor level.
    """
    if suppressed_count < 0:
        raise IngestionError("suppressed establishment count cannot be negative")
    midpoints = bin_midpoints if bin_midpoints is not None else DEFAULT_BIN_MIDPOINTS
    known = estimate_cell_employment(known_bins, midpoints)
    if suppressed_count == 0:
        return known, 0.0
    mean_size = national.mean_size(naics, exclude_bins=known_bins.keys())
    if mean_size is None:
        raise IngestionError(f"no national size distribution covers NAICS {naics!r}")
    imputed = suppressed_count * mean_size
    total = known + imputed
    return total, (imputed / total if total > 0 else 0.0)


def build_cells(
    rows: Iterable[CbpRow],
    national: NationalSizeDistribution,
    open_bin_mean: float = DEFAULT_OPEN_BIN_MEAN,
) -> tuple[list[RegionCell], list[tuple[str, str, str]]]:
    """Aggregate establishment rows into per-(zcta, naics) employment cells.

    Returns the cells sorted by (zcta, naics) and a list of dropped cells
    as (zcta, naics, reason).
    """
    grouped: dict[tuple[str, str], dict[str, int]] = {}
    suppressed: dict[tuple[str, str], int] = {}
    for row in rows:
        key = (row.zcta, row.naics)
        if row.suppressed:
            suppressed[key] = suppressed.get(key, 0) + row.establishments
            grouped.setdefault(key, {})
            continue
        bins = grouped.setdefault(key, {})
        bins[row.size_bin] = bins.get(row.size_bin, 0) + row.establishments

    cells: list[RegionCell] = []
    dropped: list[tuple[str, str, str]] = []
    for key in sorted(grouped):
        zcta, naics = key
        midpoints = dict(DEFAULT_BIN_MIDPOINTS)
        midpoints[OPEN_BIN] = national.open_bin_mean(naics, default=open_bin_mean)
        try:
            employment, imputed_fraction = impute_suppressed(
                grouped[key], suppressed.get(key, 0), naics, national, midpoints
            )
        except IngestionError as exc:
            logger.warning("cell %s/%s dropped: %s", zcta, naics, exc)
            dropped.append((zcta, naics, str(exc)))
            continue
        cells.append(RegionCell(zcta, naics, employment, imputed_fraction))
    return cells, dropped


def region_employment(cells: Iterable[RegionCell]) -> dict[str, float]:
    """Total estimated employment per ZCTA."""
    ordered = sorted(cells, key=lambda c: (c.zcta, c.industry_code))
    totals: dict[str, list[float]] = {}
    for cell in ordered:
        totals.setdefault(cell.zcta, []).append(cell.employment)
    return {zcta: fsum(values) for zcta, values in totals.items()}


def industry_totals(cells: Iterable[RegionCell]) -> dict[str, float]:
    """Total estimated employment per industry code (as ingested)."""
    ordered = sorted(cells, key=lambda c: (c.industry_code, c.zcta))
    totals: dict[str, list[float]] = {}
    for cell in ordered:
        totals.setdefault(cell.industry_code, []).append(cell.employment)
    return {code: fsum(values) for code, values in totals.items()}


def normalize_density(
    records: Iterable[tuple[str, float, float]],
    weights: Mapping[str, float],
) -> list[RegionDensity]:
    """Normalize population densities by their employment-weighted mean.

    ``records`` are (zcta, population, land_area_km2); ``weights`` maps
    zcta to employment.  Regions with nonpositive land area or density are
    dropped with a warning: they cannot enter the model.  After the call,
    the employment-weighted mean of normalized densities is 1.
    """
    raw: dict[str, tuple[float, float, float]] = {}
    for zcta, population, area in records:
        if area <= 0.0:
            logger.warning("region %s has nonpositive land area; dropped", zcta)
            continue
        density = population / area
        if density <= 0.0:
            logger.warning("region %s has zero population density; dropped", zcta)
            continue
        raw[zcta] = (population, area, density)

    weighted = [
        (weights[zcta] * raw[zcta][2], weights[zcta])
        for zcta in sorted(raw)
        if weights.get(zcta, 0.0) > 0.0
    ]
    total_weight = fsum(w for _, w in weighted)
    if total_weight <= 0.0:
        raise IngestionError("no employment overlaps the density data; cannot normalize")
    mean = fsum(wd for wd, _ in weighted) / total_weight

    return [
        RegionDensity(
            zcta=zcta,
            population=raw[zcta][0],
            land_area_km2=raw[zcta][1],
            raw_density=raw[zcta][2],
            normalized_density=raw[zcta][2] / mean,
        )
        for zcta in sorted(raw)
    ]


@dataclass
class RegionExposure:
    """Employment-weighted occupation-group shares for one ZCTA."""

    zcta: str
    shares: dict[str, float]
    employment: float


def regional_exposure(
    cells: Iterable[RegionCell], resolver: MixResolver
) -> tuple[dict[str, RegionExposure], list[tuple[str, str]]]:
    """Per-ZCTA exposure shares: employment-weighted industry chi values.

    Cells whose industry cannot be resolved to a mix are skipped with a
    warning and reported; regions with zero resolvable employment are
    omitted.  Output is invariant to splitting a cell into same-industry
    parts with the same total employment.
    """
    ordered = sorted(cells, key=lambda c: (c.zcta, c.industry_code))
    numerators: dict[str, dict[str, list[float]]] = {}
    denominators: dict[str, list[float]] = {}
    skipped: list[tuple[str, str]] = []
    for cell in ordered:
        mix = resolver.resolve(cell.industry_code)
        if mix is None:
            skipped.append((cell.zcta, cell.industry_code))
            continue
        region = numerators.setdefault(cell.zcta, {group: [] for group in GROUPS})
        for group in GROUPS:
            region[group].append(cell.employment * mix.chi[group])
        denominators.setdefault(cell.zcta, []).append(cell.employment)

    if skipped:
        codes = sorted({code for _, code in skipped})
        logger.warning(
            "%d cells skipped: no industry mix for codes %s",
            len(skipped), ", ".join(codes),
        )

    exposures: dict[str, RegionExposure] = {}
    for zcta in sorted(denominators):
        employment = fsum(denominators[zcta])
        if employment <= 0.0:
            continue
        shares = {group: fsum(numerators[zcta][group]) / employment for group in GROUPS}
        exposures[zcta] = RegionExposure(zcta=zcta, shares=shares, employment=employment)
    return exposures, skipped


# ---------------------------------------------------------------------------
# Locally weighted smoothing (for the density profiles of exposure shares)
# ---------------------------------------------------------------------------


def lowess_curve(
    x: Sequence[float],
    y: Sequence[float],
    weights: Sequence[float] | None = None,
    bandwidth: float = 0.5,
    grid_points: int = 100,
) -> tuple[np.ndarray, np.ndarray]:
    """Tricube-weighted local linear fit on an even grid spanning the data.

    At each grid point g, the window radius h is the distance to the
    ceil(bandwidth * n)-th nearest observation (at least 2).  Observations
    inside the window get tricube kernel weight (1 - (dist/h)**3)**3 times
    their point weight, and a weighted straight line is fitted; its value
    at g is the curve.  Degenerate windows fall back deterministically:
    zero radius or zero x-variance (below 1e-12 * h**2) means a weighted
    local mean, and if no observation falls strictly inside the radius the
    nearest observations are averaged by point weight.

    Requires at least 10 points and bandwidth in (0, 1].
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    n = xs.size
    if n < 10:
        raise ValueError(f"lowess needs at least 10 points, got {n}")
    if not 0.0 < bandwidth <= 1.0:
        raise ValueError(f"bandwidth must lie in (0, 1], got {bandwidth!r}")
    if ys.size != n:
        raise ValueError("x and y must have the same length")
    if weights is None:
        ws = np.ones(n)
    else:
        ws = np.asarray(weights, dtype=float)
        if ws.size != n:
            raise ValueError("weights must have the same length as x")
        if np.any(ws < 0):
            raise ValueError("weights must be nonnegative")
    lo, hi = float(xs.min()), float(xs.max())
    if hi <= lo:
        raise ValueError("x values span zero range; nothing to smooth over")

    r = min(n, max(2, int(math.ceil(bandwidth * n))))
    grid = np.linspace(lo, hi, grid_points)
    fitted = np.empty(grid_points)
    for j, g in enumerate(grid):
        dist = np.abs(xs - g)
        h = np.partition(dist, r - 1)[r - 1]
        if h <= 0.0:
            at = dist == 0.0
            fitted[j] = _weighted_mean(ys[at], ws[at])
            continue
        u = dist / h
        kernel = np.where(u < 1.0, (1.0 - np.minimum(u, 1.0) ** 3) ** 3, 0.0)
        omega = ws * kernel
        total = omega.sum()
        if total <= 0.0:
            nearest = dist == dist.min()
            fitted[j] = _weighted_mean(ys[nearest], ws[nearest])
            continue
        dx = xs - g
        sx = float(np.dot(omega, dx))
        sxx = float(np.dot(omega, dx * dx))
        sy = float(np.dot(omega, ys))
        sxy = float(np.dot(omega, dx * ys))
        var = sxx - sx * sx / total
        if var <= 1e-12 * h * h:
            fitted[j] = sy / total
            continue
        slope = (sxy - sx * sy / total) / var
        intercept = (sy - slope * sx) / total
        fitted[j] = intercept  # dx is centered on g, so the intercept is the value there
    return grid, fitted


def _weighted_mean(values: np.ndarray, weights: np.ndarray) -> float:
    total = weights.sum()
    if total <= 0.0:
        return float(values.mean())
    return float(np.dot(weights, values) / total)


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------


def read_cbp_csv(path: str | Path) -> list[CbpRow]:
    """Read ``zcta,naics,size_bin,establishments`` with optional ``suppressed`` flag."""
    fieldnames, rows = csvio.read_rows(path)
    csvio.require_fields(fieldnames, ["zcta", "naics", "size_bin", "establishments"], path=path)
    out = []
    for i, row in enumerate(rows, start=1):
        where = f"{path} row {i}"
        raw_flag = (row.get("suppressed") or "").strip()
        flag = bool(csvio.parse_int(raw_flag, path=where, field="suppressed")) if raw_flag else False
        out.append(
            CbpRow(
                zcta=row["zcta"].strip(),
                naics=row["naics"].strip(),
                size_bin=(row.get("size_bin") or "").strip(),
                establishments=csvio.parse_int(
                    row["establishments"], path=where, field="establishments"
                ),
                suppressed=flag,
            )
        )
    return out


def read_density_csv(path: str | Path) -> list[tuple[str, float, float]]:
    """Read ``zcta,population,land_area_km2`` records."""
    fieldnames, rows = csvio.read_rows(path)
    csvio.require_fields(fieldnames, ["zcta", "population", "land_area_km2"], path=path)
    return [
        (
            row["zcta"].strip(),
            csvio.parse_float(row["population"], path=f"{path} row {i}", field="population"),
            csvio.parse_float(row["land_area_km2"], path=f"{path} row {i}", field="land_area_km2"),
        )
        for i, row in enumerate(rows, start=1)
    ]


def write_location_index_csv(
    path: str | Path,
    exposures: Mapping[str, RegionExposure],
    densities: Mapping[str, RegionDensity],
    comment: str | None = None,
) -> None:
    """Write the per-location exposure table (one row per ZCTA with density)."""
    rows = []
    for zcta in sorted(exposures):
        if zcta not in densities:
            logger.warning("region %s has no density record; omitted from location index", zcta)
            continue
        exposure = exposures[zcta]
        rows.append(
            [
                zcta,
                densities[zcta].normalized_density,
                exposure.shares["teamwork"],
                exposure.shares["customer"],
                exposure.shares["communication"],
                exposure.shares["presence"],
                exposure.employment,
            ]
        )
    csvio.write_rows(
        path,
        [
            "zcta",
            "density",
            "share_teamwork",
            "share_customer",
            "share_communication",
            "share_presence",
            "employment",
        ],
        rows,
        comment=comment,
    )
