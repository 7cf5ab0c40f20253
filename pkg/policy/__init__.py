from .checkpoint import CheckpointFormatError, load_checkpoint, save_checkpoint
from .lstm import LSTMState, PolicyConfig, PolicyFault, PolicyParams, backward, forward, init_params, loss, predict_step
from .train import TrainConfig, TrainingDiverged, train
