"""Generative discrepancy comparison network for multimodal sarcasm detection, in numpy."""

from .alignment import SimilarityMatrix, contrastive_loss, contrastive_loss_grad, similarity_matrix
from .data import (
    CaptionRecord,
    CaptionServiceConfig,
    DatasetManifest,
    Sample,
    attach_captions,
    fetch_caption,
    load_manifest,
    make_batches,
    save_manifest,
)
from .embedding import (
    EmbeddingVector,
    FeatureStore,
    ProjectionHead,
    encode_image_passthrough,
    encode_text_hashed,
    project,
)
from .fusion import FusionParams, fuse, gate, predict
from .gdrm import (
    DiscrepancyMLP,
    DiscrepancyTriple,
    SentimentDistribution,
    SentimentLexicon,
    discrepancy_representation,
    discrepancy_vector,
    fidelity,
    semantic_discrepancy,
    sentiment_discrepancy,
    sentiment_score_lexicon,
)
from .metrics import MetricsReport, compare_reports, evaluate
from .model import GDCNet, ModelDims
from .training import (
    TrainConfig,
    apply_ablation,
    bce_loss,
    fit,
    load_checkpoint,
    save_checkpoint,
    total_loss,
    train_epoch,
)

__version__ = "0.1.0"
