from .jet import Jet, eval_with_coordinate_jets, seed
from .params import (ParamView, ParameterStore, Program, UndeclaredParameterError, evaluate,
                     record_forward, value_and_grad)
from .tensor import ShapeError, Tape, TapeError, Tensor, backward

__all__ = [
    "Jet", "ParamView", "ParameterStore", "Program", "ShapeError", "Tape", "TapeError",
    "Tensor", "UndeclaredParameterError", "backward", "eval_with_coordinate_jets", "evaluate",
    "record_forward", "seed", "value_and_grad",
]
