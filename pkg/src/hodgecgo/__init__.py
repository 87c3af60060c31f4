"""Discrete Hodge calculus, CGO solutions and ray transforms for form-valued
Calderon-type inverse problems."""

__version__ = "0.1.0"
SLOT_ORDER = "degree-lex-v1"
