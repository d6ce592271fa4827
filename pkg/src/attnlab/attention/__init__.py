"""Dot-product, L2 and metric attention; the IPN classifier and its trainer."""
from attnlab.attention.metrics import (
    KINDS,
    DotQK,
    Head,
    L2Linear,
    MetricMLP,
    MultiHeadSpec,
    multi_head_propagate,
    propagate,
    pseudo_metric_matrix,
    similarity,
)
from attnlab.attention.model import Block, IPNModel, build_ipn, ipn_forward
from attnlab.attention.train import TrainConfig, evaluate, train_ipn

__all__ = [
    "KINDS",
    "Block",
    "DotQK",
    "Head",
    "IPNModel",
    "L2Linear",
    "MetricMLP",
    "MultiHeadSpec",
    "TrainConfig",
    "build_ipn",
    "evaluate",
    "ipn_forward",
    "multi_head_propagate",
    "propagate",
    "pseudo_metric_matrix",
    "similarity",
    "train_ipn",
]
