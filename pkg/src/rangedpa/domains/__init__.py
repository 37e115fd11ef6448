"""Concrete analyses: explicit values, symbolic execution and intervals."""

from .interval import IntervalAnalysis, IntervalState
from .symexec import SymbolicExecution, SymState
from .value import UNKNOWN_VALUE, ValueAnalysis, ValueState

ANALYSES = {
    "value": ValueAnalysis,
    "symexec": SymbolicExecution,
    "interval": IntervalAnalysis,
}


def make_analysis(name: str, domain=None, **kwargs):
    try:
        cls = ANALYSES[name]
    except KeyError:
        raise ValueError(f"unknown analysis {name!r}; choose from {', '.join(ANALYSES)}") from None
    return cls(domain=domain, **kwargs)


__all__ = [
    "ValueAnalysis",
    "ValueState",
    "UNKNOWN_VALUE",
    "SymbolicExecution",
    "SymState",
    "IntervalAnalysis",
    "IntervalState",
    "ANALYSES",
    "make_analysis",
]
