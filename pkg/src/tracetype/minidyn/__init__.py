from .parser import ParseError, parse_program
from .interp import Interpreter, MiniDynRuntimeError, run_and_record
from .natives import DuplicateModel, NativeModel

__all__ = [
    "DuplicateModel", "Interpreter", "MiniDynRuntimeError", "NativeModel",
    "ParseError", "parse_program", "run_and_record",
]
