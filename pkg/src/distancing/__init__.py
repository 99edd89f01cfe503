"""Business exposure to contact-limiting interventions.

A reproducible pipeline: classify occupations by their reliance on
face-to-face communication and physical proximity, aggregate to industry
and ZIP-level exposure shares, calibrate a communication cost model, and
compute the wage subsidies that would compensate businesses for a cap on
worker contacts.
"""

__version__ = "0.1.0"

from .calibrate import (
    CalibratedModel,
    CalibrationReport,
    CellParams,
    calibrate_cap,
    calibrate_cap_exact,
    calibrate_epsilon,
    cell_parameters,
    optimal_contacts_grid,
    run_calibration,
)
from .counterfactual import (
    AggRow,
    CostCurves,
    SubsidyResult,
    compute_subsidies,
    cost_ratio_curves,
    location_table,
    sector_table,
)
from .errors import (
    CalibrationError,
    ClassificationError,
    ConfigError,
    DistancingError,
    DomainError,
    IngestionError,
)
from .geo import (
    NationalSizeDistribution,
    RegionCell,
    RegionDensity,
    RegionExposure,
    build_cells,
    estimate_cell_employment,
    impute_suppressed,
    lowess_curve,
    normalize_density,
    regional_exposure,
)
from .industries import (
    GROUPS,
    IndustryMix,
    MixResolver,
    build_mix,
    exclude_sectors,
    rank_industries,
)
from .model import (
    FirmParams,
    Intervention,
    Regime,
    compensating_subsidy,
    contacts_at_density,
    distancing_cost_ratio,
    optimal_contacts,
    preferred_regime,
    telecom_cost_ratio,
    unit_cost,
    unit_cost_at_density,
)
from .occupations import (
    ClassificationThresholds,
    ExposureFlags,
    OccupationProfile,
    classify_all,
    classify_customer,
    classify_presence,
    classify_teamwork,
    composite_index,
)
