"""Tiny numpy network mapping a pair of histograms to four tone-curve parameters."""

from .loss import (
    backward,
    batch_loss,
    batch_loss_and_grad,
    denormalize_params,
    logistic,
    loss,
    normalize_params,
    predict,
    raw_to_params,
)
from .model import (
    MAX_FLOPS,
    MAX_PARAMS,
    REFERENCE,
    Activation,
    Architecture,
    BudgetError,
    Conv1d,
    Dense,
    Flatten,
    ModelWeights,
    Scale,
    ShapeError,
    check_budget,
    count_flops,
    count_params,
    forward,
    init_weights,
    layer_flops,
    zero_weights,
)
from .optim import AdamState, PlateauScheduler, adam_step, plateau_scheduler
from .serialize import WeightsFormatError, load_weights, save_weights
from .train import EpochRecord, History, TrainConfig, dataset_loss, iterations_per_epoch, train
