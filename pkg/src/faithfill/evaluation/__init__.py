"""Similarity metrics, embedder backends, report rendering, preference studies."""

from .metrics import cosine_metric, perceptual_distance, psnr, ssim
from .embedders import (
    EmbedderBackend, MomentEmbedder, GradientFeatureEmbedder, CheckpointEmbedderAdapter,
    get_embedders,
)
from .report import MetricReport, PairMetrics, evaluate_dataset, render_table, PAPER_FAITHFILL_ROW
from .study import (
    CannedJudge, JudgeClient, JudgeDecision, VoteRecord, aggregate_preferences, collect_votes,
    read_votes_file, shares_from_margin, write_votes_file,
)

__all__ = [
    "cosine_metric", "perceptual_distance", "psnr", "ssim",
    "EmbedderBackend", "MomentEmbedder", "GradientFeatureEmbedder",
    "CheckpointEmbedderAdapter", "get_embedders",
    "MetricReport", "PairMetrics", "evaluate_dataset", "render_table", "PAPER_FAITHFILL_ROW",
    "CannedJudge", "JudgeClient", "JudgeDecision", "VoteRecord", "aggregate_preferences",
    "collect_votes", "read_votes_file", "shares_from_margin", "write_votes_file",
]
