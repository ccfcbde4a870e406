from .attention import AttentionParams, attention_forward, attention_weights
from .gradcheck import CheckResult, check_gradients, layer_checks, model_check
from .ops import (
    BnState,
    activation,
    add,
    batchnorm1d,
    concat,
    conv1d,
    dropout,
    elementwise,
    linear,
    matmul,
    maxpool1d,
    mul,
    narrow,
    relu,
    reshape,
    sigmoid,
    softmax,
    softmax_crossentropy,
    stack_time,
    sub,
    sum_all,
    sum_sq,
    swap_axes,
    tanh,
)
from .recurrent import LstmParams, LstmState, bilstm_forward, lstm_cell, zero_state
from .tensor import Tape, Tensor, as_tensor, backward, set_debug_checks

__all__ = [
    "AttentionParams", "attention_forward", "attention_weights",
    "CheckResult", "check_gradients", "layer_checks", "model_check",
    "BnState", "activation", "add", "batchnorm1d", "concat", "conv1d",
    "dropout", "elementwise", "linear", "matmul", "maxpool1d", "mul",
    "narrow", "relu", "reshape", "sigmoid", "softmax",
    "softmax_crossentropy", "stack_time", "sub", "sum_all", "sum_sq",
    "swap_axes", "tanh",
    "LstmParams", "LstmState", "bilstm_forward", "lstm_cell", "zero_state",
    "Tape", "Tensor", "as_tensor", "backward", "set_debug_checks",
]
