"""fieldforge: from labeled images to a deployable citizen-science app.

Three automated stages (dataset creation, training orchestration, app
bundle generation) plus a back-end service that collects, curates, and
recycles field observations into retraining sets.
"""

__version__ = "0.1.0"

from .annotations import (
    AnswerGeometry,
    Document,
    FormatTag,
    MTurkFieldMapping,
    annotation_set_from_json,
    annotation_set_to_json,
    export,
    import_mturk,
    ingest_classification_folders,
    parse_coco,
    parse_mturk_csv,
    parse_voc,
    parse_yolo,
)
from .appforge import (
    AppBundleDescriptor,
    AppTemplate,
    Channel,
    Customization,
    DeployConfig,
    Platform,
    emit_build_manifest,
    emit_deploy_lanes,
    instantiate_template,
    template_by_id,
    template_catalog,
)
from .dataset import (
    AdvisoryReport,
    DatasetStats,
    FramePlan,
    SplitRatio,
    SplitResult,
    SufficiencyTier,
    advise_sufficiency,
    dataset_stats,
    plan_frame_extraction,
    read_split_manifests,
    split_dataset,
    write_split_manifests,
)
from .domain import (
    AnnotationSet,
    BoundingBox,
    ImageRecord,
    ImageSource,
    LabelMap,
    Task,
    ValidationIssue,
    ValidationReport,
    validate_annotation_set,
    validate_label_map,
)
from .models import (
    ModelRegistryEntry,
    SelectionConstraints,
    check_class_capacity,
    default_registry,
    load_registry,
    select_model,
)
from .training import (
    ConvergencePolicy,
    MockTrainer,
    ModelPackage,
    RunStatus,
    TrainerArtifacts,
    TrainingConfig,
    TrainingRun,
    build_training_config,
    check_convergence,
    load_run,
    package_model,
    read_trainer_artifacts,
    record_loss,
    run_to_completion,
    save_run,
    start_training,
)
