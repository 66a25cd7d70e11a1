"""fusedseq: a desk-scale attention/CTC recognizer whose decoder LSTM can
be fused with a pretrained character LM in six different ways."""

from .checkpoint import Checkpoint
from .decode import DecodeConfig, beam_search, greedy_transcript, shallow_combine
from .fusion import FusionKind, FusionOutput
from .lstm import LstmState
from .metrics import evaluate, levenshtein
from .model import (ModelConfig, Seq2SeqModel, attention_loss, build_model,
                    joint_loss, model_from_checkpoint)
from .optim import AdaDelta, AdaDeltaState, adadelta_step, eps_decay
from .params import Parameter, ParamStore
from .rnnlm import LmConfig, RnnLm, build_lm, lm_from_checkpoint, lm_train
from .tensor import Tensor, activation, linear, no_grad
from .toytask import CorpusSizes, FeatureSource, ToyTaskConfig, gen_corpus, synth_features
from .training import TrainConfig, train_asr
from .vocab import Vocabulary

__version__ = "0.1.0"

__all__ = [
    "AdaDelta", "AdaDeltaState", "Checkpoint", "CorpusSizes", "DecodeConfig",
    "FeatureSource", "FusionKind", "FusionOutput", "LmConfig", "LstmState",
    "ModelConfig", "ParamStore", "Parameter", "RnnLm", "Seq2SeqModel", "Tensor",
    "ToyTaskConfig", "TrainConfig", "Vocabulary", "activation", "adadelta_step",
    "attention_loss", "beam_search", "build_lm", "build_model", "eps_decay",
    "evaluate", "gen_corpus", "greedy_transcript", "joint_loss", "levenshtein",
    "linear", "lm_from_checkpoint", "lm_train", "model_from_checkpoint", "no_grad",
    "shallow_combine", "synth_features", "train_asr",
]
