from .checkpoint import Checkpoint, CheckpointError
from .loss import LossBreakdown, LossWeights, NonFiniteResidualError, data_loss, physics_loss
from .optim import OptimizerState, Schedule, optimizer_step
from .train import DivergenceError, TrainConfig, build_model, model_from_checkpoint, read_history, train
