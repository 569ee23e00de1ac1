"""Weakly-supervised NER: train on a small labeled seed, weak-label a large
unlabeled corpus with gazetteer pins plus model predictions, and refine the
soft labels by iterative retraining.
"""

from .corpus import (
    Dataset,
    DatasetKind,
    EntitySpan,
    Provenance,
    Sentence,
    SoftLabeling,
    TagSet,
    Token,
    bio_decode,
    bio_encode,
    bio_repair,
    read_conll,
    read_soft_tsv,
    sentence_from_texts,
    soften,
    split_seed,
    tokenize,
    write_conll,
    write_soft_tsv,
)
from .refset import (
    MatchPolicy,
    RefMatch,
    ReferenceSet,
    audit_matcher,
    exact_policy,
    filter_names,
    filtered_policy,
    find_matches,
    load_dictionary,
    load_reference_set,
)
from .tagger import (
    FeatureExtractor,
    Objective,
    TaggerModel,
    TrainConfig,
    dataset_loss,
    dataset_loss_and_gradient,
    harden,
    predict_dataset_hard,
    predict_dataset_soft,
    train,
)
from .bootstrap import (
    BootstrapConfig,
    IterationTrace,
    compute_pins,
    finalize,
    iterative_train,
    relabel,
)
from .metrics import EvalReport, evaluate_model, score_datasets, score_entities
from .synthetic import SyntheticSpec, generate_synthetic
from .experiments import (
    Condition,
    GridConfig,
    default_conditions,
    format_grid_table,
    run_experiment_grid,
    write_grid_tsv,
)

__version__ = "0.1.0"
