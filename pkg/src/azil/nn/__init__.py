"""Sequence models, losses and the training harness (torch, float64)."""

from .checkpoint import build_model, from_dict, load_checkpoint, save_checkpoint, to_dict
from .gradcheck import grad_check, relative_error
from .losses import PROB_EPS, loss_clf, loss_loc
from .models import (
    CHANNELS,
    BiLSTM,
    CocoNet,
    FeatureSummarizer,
    HaloCocoNet,
    HaloNet,
    MlpBaseline,
    ModelConfig,
    StaticFusion,
    TemporalAttention,
    ZoneHeads,
    normalize_input,
    peripheral_bins,
)
from .train import Batch, History, TrainConfig, batch_loss, deterministic_mode, perturb_static, predict, train
