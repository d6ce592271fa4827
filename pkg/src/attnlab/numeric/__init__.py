"""Dense linear algebra, portable RNG, reverse-mode autodiff and Adam."""
from attnlab.numeric.autodiff import Tape, Tensor, backward, grad_check
from attnlab.numeric.linalg import as_matrix, matmul, pairwise_sqdist, row_softmax
from attnlab.numeric.optim import AdamState, adam_update
from attnlab.numeric.rng import RandomSource

__all__ = [
    "AdamState",
    "RandomSource",
    "Tape",
    "Tensor",
    "adam_update",
    "as_matrix",
    "backward",
    "grad_check",
    "matmul",
    "pairwise_sqdist",
    "row_softmax",
]
