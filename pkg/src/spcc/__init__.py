"""Software project control center.

Collects project measurement data, interprets it through an explicit catena
of control techniques, and serves role-oriented views that flag plan
deviations while the project runs. Finished configurations are packaged into
an experience base for reuse.
"""

from .access import (
    AccessPolicy,
    Principal,
    Role,
    authenticate,
    authorize_view,
)
from .catena import (
    CatenaResult,
    DataEntryBinding,
    FunctionInstance,
    ValidationReport,
    ViewInstance,
    VisualizationCatena,
    catena_from_dict,
    drill_down,
    execute_catena,
    load_catena,
    reparameterize,
    toposort,
    validate_catena,
)
from .data import DataEntry, DataSnapshot, MeasurementPoint, build_entries
from .experience import (
    ContextProfile,
    ExperiencePackage,
    ExperienceStore,
    ReuseCandidate,
    bind_parameters,
    package_results,
    retrieve_candidates,
    reuse_catena,
)
from .gqm import (
    CoverageReport,
    DataCollectionSheet,
    GqmPlan,
    MeasurementGoal,
    Metric,
    check_goal_coverage,
    derive_collection_plan,
    formulate_goal,
    load_plan,
    parse_goal,
)
from .ingestion import RawRecord, SourceAdapter, ValidationFinding, parse_records, validate_records
from .service import ControlCenter, IngestReceipt, load_bundle_dir
from .steps import ProcessStepTree
from .techniques import (
    Baseline,
    ClassifiedSeries,
    ForecastSeries,
    Summary,
    TechniqueDescriptor,
    TechniqueRegistry,
    ToleranceSpec,
    aggregate,
    builtin_registry,
    compare_to_baseline,
    monitor,
    predict_course,
    register_technique,
    tolerance_range_check,
)

__version__ = "0.1.0"

__all__ = [
    "AccessPolicy",
    "Baseline",
    "CatenaResult",
    "ClassifiedSeries",
    "ContextProfile",
    "ControlCenter",
    "CoverageReport",
    "DataCollectionSheet",
    "DataEntry",
    "DataEntryBinding",
    "DataSnapshot",
    "ExperiencePackage",
    "ExperienceStore",
    "ForecastSeries",
    "FunctionInstance",
    "GqmPlan",
    "IngestReceipt",
    "MeasurementGoal",
    "MeasurementPoint",
    "Metric",
    "Principal",
    "ProcessStepTree",
    "RawRecord",
    "ReuseCandidate",
    "Role",
    "SourceAdapter",
    "Summary",
    "TechniqueDescriptor",
    "TechniqueRegistry",
    "ToleranceSpec",
    "ValidationFinding",
    "ValidationReport",
    "ViewInstance",
    "VisualizationCatena",
    "aggregate",
    "authenticate",
    "authorize_view",
    "bind_parameters",
    "build_entries",
    "builtin_registry",
    "catena_from_dict",
    "check_goal_coverage",
    "compare_to_baseline",
    "derive_collection_plan",
    "drill_down",
    "execute_catena",
    "formulate_goal",
    "load_bundle_dir",
    "load_catena",
    "load_plan",
    "monitor",
    "package_results",
    "parse_goal",
    "parse_records",
    "predict_course",
    "register_technique",
    "reparameterize",
    "retrieve_candidates",
    "reuse_catena",
    "tolerance_range_check",
    "toposort",
    "validate_catena",
    "validate_records",
]
