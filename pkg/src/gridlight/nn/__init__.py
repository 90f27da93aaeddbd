from . import backends
from .model import (
    AdamState,
    NetworkSpec,
    adam_update,
    attention_weights,
    backward,
    clone_params,
    csr_neighborhoods,
    forward,
    init_params,
    load_params,
    save_params,
    zero_params,
)

__all__ = [
    "AdamState",
    "NetworkSpec",
    "adam_update",
    "attention_weights",
    "backward",
    "backends",
    "clone_params",
    "csr_neighborhoods",
    "forward",
    "init_params",
    "load_params",
    "save_params",
    "zero_params",
]
