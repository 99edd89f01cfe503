"""Command-line pipeline: index, calibrate, subsidy, fig2, lowess.

Subcommands compose the library modules into a deterministic pipeline.
Rerunning any subcommand with unchanged inputs produces byte-identical
outputs.  Exit codes: 0 success, 1 internal/data error, 2 usage or
config error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from math import fsum, log
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, calibrate, counterfactual, csvio, geo, industries, occupations
from .config import (
    DEFAULT_EXCLUSIONS,
    RunConfig,
    config_hash,
    load_config_file,
    params_hash,
    require,
    resolve_config,
)
from .errors import ConfigError, DistancingError
from .industries import GROUPS
from .model import FirmParams

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Pipeline stages
# ---------------------------------------------------------------------------


@dataclass
class IndexStage:
    profiles: list[occupations.OccupationProfile]
    flags: dict[str, occupations.ExposureFlags]
    build_report: industries.MixBuildReport
    mixes: list[industries.IndustryMix]
    exclusions: list[str]
    removed_sectors: list[str]


@dataclass
class GeoStage:
    cells: list[geo.RegionCell]
    densities: dict[str, geo.RegionDensity]
    resolver: industries.MixResolver
    exposures: dict[str, geo.RegionExposure]


def run_index_stage(cfg: RunConfig) -> IndexStage:
    require(cfg, "occupations", "matrix")
    profiles = occupations.read_profiles_csv(cfg.occupations)
    thresholds = occupations.ClassificationThresholds(
        cutoff=cfg.cutoff,
        face_to_face_level=cfg.face_to_face_level,
        proximity_level=cfg.proximity_level,
    )
    flags = occupations.classify_all(profiles, thresholds, lenient=cfg.lenient)
    names = industries.read_names_csv(cfg.industry_names) if cfg.industry_names else None
    report = industries.build_mix(industries.read_matrix_csv(cfg.matrix), flags, names)
    exclusions = (
        industries.read_exclusions(cfg.exclusions)
        if cfg.exclusions is not None
        else list(DEFAULT_EXCLUSIONS)
    )
    mixes, removed = industries.exclude_sectors(report.mixes, exclusions)
    return IndexStage(profiles, flags, report, mixes, exclusions, removed)


def run_geo_stage(cfg: RunConfig, index: IndexStage) -> GeoStage:
    require(cfg, "cbp", "density", "national_sizes")
    national = geo.NationalSizeDistribution.from_csv(cfg.national_sizes)
    cells, _ = geo.build_cells(geo.read_cbp_csv(cfg.cbp), national, cfg.open_bin_mean)
    cells = _drop_excluded_cells(cells, index.exclusions)
    weights = geo.region_employment(cells)
    records = geo.read_density_csv(cfg.density)
    if cfg.employment_density:
        records = [(zcta, weights.get(zcta, 0.0), area) for zcta, _, area in records]
    density_rows = geo.normalize_density(records, weights)
    densities = {d.zcta: d for d in density_rows}
    resolver = industries.MixResolver(index.mixes)
    exposures, _ = geo.regional_exposure(cells, resolver)
    return GeoStage(cells, densities, resolver, exposures)


def _drop_excluded_cells(
    cells: list[geo.RegionCell], exclusions: Sequence[str]
) -> list[geo.RegionCell]:
    """Exclusion codes act as sector prefixes on raw establishment codes."""
    if not exclusions:
        return cells
    kept = [
        cell for cell in cells
        if not any(cell.industry_code.startswith(code) for code in exclusions)
    ]
    dropped = len(cells) - len(kept)
    if dropped:
        logger.info("excluded sectors removed %d establishment cells", dropped)
    return kept


def run_calibration_stage(
    cfg: RunConfig, index: IndexStage, geo_stage: GeoStage
) -> tuple[calibrate.CalibratedModel, calibrate.CalibrationReport, list[calibrate.CellParams]]:
    frame = calibrate.cell_parameters(geo_stage.cells, geo_stage.resolver, geo_stage.densities)
    model, report = calibrate.run_calibration(
        frame,
        index.mixes,
        target_contact_share=cfg.contact_share,
        target_elasticity=cfg.elasticity,
        fixed_eps=cfg.fixed_eps,
    )
    return model, report, frame


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_index(cfg: RunConfig) -> int:
    out = _output_dir(cfg)
    stamp = _provenance(cfg)
    index = run_index_stage(cfg)
    occupations.write_flags_csv(out / "occupation-index.csv", index.profiles, index.flags, stamp)
    industries.write_industry_index_csv(out / "industry-index.csv", index.mixes, stamp)
    _write_reconciliation(out / "reconciliation.txt", index, stamp)
    if cfg.cbp and cfg.density and cfg.national_sizes:
        geo_stage = run_geo_stage(cfg, index)
        geo.write_location_index_csv(
            out / "location-index.csv", geo_stage.exposures, geo_stage.densities, stamp
        )
    else:
        logger.info("no establishment/density inputs configured; location index skipped")
    return 0


def cmd_calibrate(cfg: RunConfig) -> int:
    out = _output_dir(cfg)
    stamp = _provenance(cfg)
    index = run_index_stage(cfg)
    geo_stage = run_geo_stage(cfg, index)
    _, report, _ = run_calibration_stage(cfg, index, geo_stage)
    _write_calibration(out, report, stamp)
    return 0


def cmd_subsidy(cfg: RunConfig) -> int:
    out = _output_dir(cfg)
    stamp = _provenance(cfg)
    index = run_index_stage(cfg)
    geo_stage = run_geo_stage(cfg, index)
    model, report, frame = run_calibration_stage(cfg, index, geo_stage)
    _write_calibration(out, report, stamp)

    results = counterfactual.compute_subsidies(model, frame, telecom_cost=cfg.telecom_cost)
    sector_rows, overall = counterfactual.sector_table(results)
    csvio.write_rows(
        out / "sector-subsidy.csv",
        ["industry", "wage_subsidy_pct", "employment_thousands"],
        [[r.key, _pct(r.subsidy), r.employment / 1000.0] for r in sector_rows]
        + [["Average", _pct(overall.subsidy), overall.employment / 1000.0]],
        comment=stamp,
    )
    location_rows, _ = counterfactual.location_table(results)
    csvio.write_rows(
        out / "location-subsidy.csv",
        ["zcta", "wage_subsidy_pct", "employment"],
        [[r.key, _pct(r.subsidy), r.employment] for r in location_rows],
        comment=stamp,
    )
    if cfg.region_groups:
        grouping = read_region_groups(cfg.region_groups)
        region_rows, _ = counterfactual.location_table(results, grouping)
        csvio.write_rows(
            out / "region-subsidy.csv",
            ["region", "wage_subsidy_pct", "employment"],
            [[r.key, _pct(r.subsidy), r.employment] for r in region_rows],
            comment=stamp,
        )
    _write_fig2_from_frame(out, model, frame, cfg.telecom_cost, stamp)
    return 0


def _write_fig2_from_frame(out, model, frame, telecom_cost, stamp) -> None:
    """Cost-ratio curves for the employment-weighted average firm."""
    total = fsum(c.employment for c in frame)
    mean_chi = fsum(c.employment * c.chi for c in frame) / total
    if mean_chi <= 0.0:
        logger.warning("mean communication share is zero; fig2 curves skipped")
        return
    dmin = min(c.density for c in frame)
    dmax = max(c.density for c in frame)
    if dmax <= dmin:
        logger.warning("degenerate density range; fig2 curves skipped")
        return
    grid = np.geomspace(dmin, dmax, 100)
    curves = counterfactual.cost_ratio_curves(
        FirmParams.from_chi(mean_chi), grid, model.contact_cap, telecom_cost, model.eps
    )
    _write_fig2_csv(out / "fig2.csv", curves, stamp)


def _write_fig2_csv(path, curves: counterfactual.CostCurves, stamp: str) -> None:
    rows = [
        [d, dist, tele, regime.value]
        for d, dist, tele, regime in zip(
            curves.densities, curves.distancing, curves.telecom, curves.regimes
        )
    ]
    csvio.write_rows(
        path, ["density", "distancing_ratio", "telecom_ratio", "regime"], rows, comment=stamp
    )
    for switch in curves.switches:
        logger.info(
            "regime switch at density %.6g: %s -> %s",
            switch.density, switch.from_regime.value, switch.to_regime.value,
        )


def cmd_fig2(args: argparse.Namespace) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.points < 2:
        raise ConfigError(f"--points must be >= 2, got {args.points}")
    if not 0.0 < args.dmin < args.dmax:
        raise ConfigError("need 0 < dmin < dmax")
    params = FirmParams.from_chi(args.chi)
    grid = np.geomspace(args.dmin, args.dmax, args.points)
    curves = counterfactual.cost_ratio_curves(params, grid, args.cap, args.telecom, args.eps)
    stamp = (
        f"distancing {__version__} config:"
        + params_hash(
            f"chi={args.chi!r} eps={args.eps!r} cap={args.cap!r} "
            f"telecom={args.telecom!r} dmin={args.dmin!r} dmax={args.dmax!r} "
            f"points={args.points!r}"
        )
    )
    _write_fig2_csv(out / "fig2.csv", curves, stamp)
    return 0


def cmd_lowess(cfg: RunConfig, args: argparse.Namespace) -> int:
    out = _output_dir(cfg)
    source = args.input or str(Path(cfg.output_dir) / "location-index.csv")
    if not Path(source).is_file():
        raise ConfigError(f"location index not found: {source} (run 'index' first or pass --input)")
    if not 0.0 < args.bandwidth <= 1.0:
        raise ConfigError(f"--bandwidth must lie in (0, 1], got {args.bandwidth}")
    fieldnames, rows = csvio.read_rows(source)
    csvio.require_fields(
        fieldnames, ["density", "employment"] + [f"share_{g}" for g in GROUPS], path=source
    )
    x = [log(float(row["density"])) for row in rows]
    weights = [float(row["employment"]) for row in rows]
    curves = {}
    grid = None
    for group in GROUPS:
        y = [float(row[f"share_{group}"]) for row in rows]
        grid, curves[group] = geo.lowess_curve(x, y, weights, bandwidth=args.bandwidth)
    stamp = _provenance(cfg) + f" bandwidth:{args.bandwidth!r}"
    csvio.write_rows(
        out / "location-lowess.csv",
        ["log_density", *GROUPS],
        [
            [float(grid[i])] + [float(curves[group][i]) for group in GROUPS]
            for i in range(len(grid))
        ],
        comment=stamp,
    )
    return 0


# ---------------------------------------------------------------------------
# Report writers and small helpers
# ---------------------------------------------------------------------------


def read_region_groups(path) -> dict[str, str]:
    """Read a ``zcta,region`` membership file for named-region aggregation."""
    fieldnames, rows = csvio.read_rows(path)
    csvio.require_fields(fieldnames, ["zcta", "region"], path=path)
    return {row["zcta"].strip(): row["region"].strip() for row in rows}


def _pct(fraction: float) -> float:
    """Report layer only: subsidies become percentages at one decimal."""
    return round(100.0 * fraction, 1)


def _output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _provenance(cfg: RunConfig) -> str:
    return f"distancing {__version__} config:{config_hash(cfg)}"


def _write_reconciliation(path: Path, index: IndexStage, stamp: str) -> None:
    lines = [f"# {stamp}"]
    lines.append("unknown_socs: " + (", ".join(index.build_report.unknown_socs) or "none"))
    lines.append(
        "skipped_industries: " + (", ".join(index.build_report.skipped_industries) or "none")
    )
    lines.append("excluded_sectors: " + (", ".join(index.removed_sectors) or "none"))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_calibration(out: Path, report: calibrate.CalibrationReport, stamp: str) -> None:
    csvio.write_rows(
        out / "calibration.csv",
        [
            "eps",
            "contact_cap",
            "slope_factor",
            "achieved_slope",
            "achieved_share",
            "cells",
            "eps_fixed",
        ],
        [[
            report.eps,
            report.contact_cap,
            report.slope_factor,
            report.achieved_slope,
            report.achieved_share,
            report.n_cells,
            report.eps_fixed,
        ]],
        comment=stamp,
    )
    lines = [
        f"# {stamp}",
        f"eps: {report.eps!r}" + (" (fixed)" if report.eps_fixed else " (calibrated)"),
        f"contact cap: {report.contact_cap!r}",
        f"slope factor k: {report.slope_factor!r}",
        f"achieved density slope: {report.achieved_slope!r}",
        f"achieved contact share: {report.achieved_share!r}",
        f"cells: {report.n_cells}",
    ]
    lines.extend(report.notes)
    (out / "calibration.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--output-dir", dest="output_dir", help="output directory")
    parser.add_argument("--threads", type=int, help="worker cap (results never depend on it)")
    for key in ("occupations", "matrix", "cbp", "density", "national-sizes",
                "exclusions", "region-groups", "industry-names"):
        parser.add_argument(f"--{key}", dest=key.replace("-", "_"), help=f"{key} CSV path")
    parser.add_argument("--cutoff", type=float, help="composite index cutoff (default 62.5)")
    parser.add_argument("--face-to-face-level", dest="face_to_face_level", type=int,
                        help="minimum discussion frequency level (default 4)")
    parser.add_argument("--proximity-level", dest="proximity_level", type=int,
                        help="minimum proximity level (default 3)")
    parser.add_argument("--contact-share", dest="contact_share", type=float,
                        help="target capped share of aggregate contacts (default 0.5)")
    parser.add_argument("--elasticity", type=float,
                        help="target density elasticity of implied productivity (default 0.04)")
    parser.add_argument("--fixed-eps", dest="fixed_eps", type=float,
                        help="skip the elasticity solve and use this eps")
    parser.add_argument("--telecom-cost", dest="telecom_cost", type=float,
                        help="per-contact telecom cost for the cost-ratio curves")
    parser.add_argument("--open-bin-mean", dest="open_bin_mean", type=float,
                        help="mean plant size for the open 1000+ bin when no national data")
    parser.add_argument("--lenient", action="store_const", const=True, default=None,
                        help="fail closed on missing occupation data instead of erroring")
    parser.add_argument("--employment-density", dest="employment_density",
                        action="store_const", const=True, default=None,
                        help="measure density as estimated employment per km2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distancing",
        description="Occupation exposure indexes, regional aggregation, and "
                    "compensating wage subsidies under contact-limiting interventions.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("index", "build occupation, industry, and location exposure indexes"),
        ("calibrate", "calibrate the density elasticity and the contact cap"),
        ("subsidy", "compute sector and location wage-subsidy tables"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)

    p = sub.add_parser("fig2", help="cost-ratio curves over a density grid")
    p.add_argument("--chi", type=float, required=True, help="communication cost share")
    p.add_argument("--eps", type=float, required=True, help="density elasticity of contact cost")
    p.add_argument("--cap", type=float, required=True, help="face-to-face contact cap")
    p.add_argument("--telecom", type=float, default=None, help="per-contact telecom cost")
    p.add_argument("--dmin", type=float, default=0.05, help="grid lower density")
    p.add_argument("--dmax", type=float, default=20.0, help="grid upper density")
    p.add_argument("--points", type=int, default=100, help="grid size")
    p.add_argument("--output-dir", dest="output_dir", default="out")

    p = sub.add_parser("lowess", help="smooth location exposure shares against log density")
    _add_config_flags(p)
    p.add_argument("--input", help="location index CSV (default <output_dir>/location-index.csv)")
    p.add_argument("--bandwidth", type=float, default=0.5,
                   help="fraction of points in each local window (default 0.5)")
    return parser


_OVERRIDE_KEYS = (
    "occupations", "matrix", "cbp", "density", "national_sizes", "exclusions",
    "region_groups", "industry_names", "output_dir", "cutoff", "face_to_face_level",
    "proximity_level", "contact_share", "elasticity", "fixed_eps", "telecom_cost",
    "open_bin_mean", "lenient", "employment_density", "threads",
)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else None
    overrides = {key: getattr(args, key, None) for key in _OVERRIDE_KEYS}
    return resolve_config(file_values, overrides)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fig2":
            return cmd_fig2(args)
        cfg = _config_from_args(args)
        if args.command == "index":
            return cmd_index(cfg)
        if args.command == "calibrate":
            return cmd_calibrate(cfg)
        if args.command == "subsidy":
            return cmd_subsidy(cfg)
        if args.command == "lowess":
            return cmd_lowess(cfg, args)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DistancingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
