"""Dysfluency segmentation from weak labels via graph partitioning.

Utterances are cut into overlapping windows whose embeddings become graph
nodes; a classifier trained only on clip-level labels softly reshapes the
graph where its MC-dropout uncertainty is low; the normalized-cut Fiedler
vector bipartitions the nodes; and window runs become typed time segments.
"""

from .clustering import (
    ClusterAssignment,
    FuzzyCMeansBipartition,
    KMeansBipartition,
    fuzzy_cmeans_bipartition,
    kmeans_bipartition,
)
from .evaluation import (
    EvalReport,
    MatchResult,
    evaluate_corpus,
    f1_from_counts,
    interval_iou,
    match_segments,
)
from .fusion import FusionConfig, apply_similarity_floor, fuse_similarities
from .graph import cosine_similarity_matrix
from .oracle import (
    McPrediction,
    OracleModel,
    TrainConfig,
    WindowOracle,
    confidence_mask,
    dysfluent_flags,
    focal_loss,
    forward,
    init_model,
    load_model,
    mc_predict,
    prediction_similarity_matrix,
    predictive_entropy,
    probability_mask,
    save_model,
    train_oracle,
)
from .pipeline import (
    PHI_MODES,
    VARIANTS,
    ClipResult,
    DysfluencySegmenter,
    segment_clip,
    weak_label_targets,
)
from .segments import (
    BoundaryConfig,
    Segment,
    extract_segments,
    label_segments,
    read_segment_records,
    write_segment_records,
)
from .spectral import (
    FiedlerSolution,
    Partition,
    eig_symmetric,
    fiedler_solution,
    identify_dysfluent_cluster,
    jacobi_eigh,
    normalized_laplacian,
    threshold_partition,
)
from .store import (
    ClipManifest,
    CorpusIndex,
    read_corpus_index,
    read_embeddings,
    write_corpus_index,
    write_embeddings,
)
from .synthetic import SynthConfig, corrupt_weak_labels, generate_corpus, write_corpus
from .windows import WindowConfig, WindowSet, make_windows, window_count

__version__ = "0.1.0"
