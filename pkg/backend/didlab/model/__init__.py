from .panel_model import MicroPanel, PanelData, PanelSchema
from .dgp_model import (
    ARInit,
    ARSpec,
    BernoulliAssignment,
    CompleteAssignment,
    FactorModelSpec,
    FixedAssignment,
    FixedPopulation,
    GroupedAssignment,
    ModelStructure,
    NestedMicroSpec,
    SimulationResult,
    TreatmentEffectSpec,
)
from .estimate_model import (
    Comparison,
    EstimateRecord,
    EstimatorTag,
    ReferenceDistribution,
    TestResult,
    VarianceEstimate,
    VarianceMethod,
)
from .analytics_model import CurvePreset, DesignVariances, GapInputs
from .experiment_model import (
    ConditionalLambdaReport,
    ConditionalLambdaSettings,
    ExperimentKind,
    MCConfig,
    MCReport,
    NormalModelReport,
    NormalModelSettings,
    PretestRow,
    PretestSettings,
    RateCell,
    StaggeredSettings,
    TwoWaySettings,
)
from .placebo_model import (
    AssignmentScheme,
    DesignCell,
    PlaceboCurve,
    PlaceboPlan,
    PlaceboPoint,
    PlaceboPreset,
    PlaceboSurface,
    PlaceboSurfacePoint,
    PlaceboWindow,
)
from .manifest_model import RunManifest

__all__ = [
    'PanelData',
    'MicroPanel',
    'PanelSchema',
    'ARInit',
    'ARSpec',
    'BernoulliAssignment',
    'FixedAssignment',
    'CompleteAssignment',
    'GroupedAssignment',
    'TreatmentEffectSpec',
    'ModelStructure',
    'FactorModelSpec',
    'FixedPopulation',
    'NestedMicroSpec',
    'SimulationResult',
    'Comparison',
    'EstimateRecord',
    'EstimatorTag',
    'ReferenceDistribution',
    'TestResult',
    'VarianceEstimate',
    'VarianceMethod',
    'GapInputs',
    'DesignVariances',
    'CurvePreset',
    'ExperimentKind',
    'MCConfig',
    'MCReport',
    'RateCell',
    'PretestRow',
    'PretestSettings',
    'TwoWaySettings',
    'ConditionalLambdaSettings',
    'ConditionalLambdaReport',
    'StaggeredSettings',
    'NormalModelSettings',
    'NormalModelReport',
    'AssignmentScheme',
    'PlaceboWindow',
    'PlaceboPlan',
    'DesignCell',
    'PlaceboPoint',
    'PlaceboCurve',
    'PlaceboSurfacePoint',
    'PlaceboPreset',
    'PlaceboSurface',
    'RunManifest'
]
