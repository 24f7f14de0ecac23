"""Expression language for metric components, with exact second-order jets."""

from .ast import Binary, Const, Expr, Pow, Unary, Var, to_source
from .jet import JetValue, eval_jet, run_program, unpack_symmetric
from .parser import parse_expr
from .program import Program, compile_exprs

__all__ = [
    "Binary",
    "Const",
    "Expr",
    "JetValue",
    "Pow",
    "Program",
    "Unary",
    "Var",
    "compile_exprs",
    "eval_jet",
    "parse_expr",
    "run_program",
    "to_source",
    "unpack_symmetric",
]
