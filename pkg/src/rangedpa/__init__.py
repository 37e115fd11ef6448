"""Ranged program analysis.

Split the feasible paths of a program into ranges bounded by
test-case-induced paths, verify each range with its own analysis, and
combine the verdicts and correctness witnesses.
"""

__version__ = "0.1.0"

from .cpa_core import Budget, Verdict, run_cpa
from .frontend import Cfa, ProgramError, build_cfa, load_cfa, parse
from .orchestrator import RunReport, aggregate, run_ranged_program_analysis
from .range_reduction import make_ranged
from .semantics import BOTTOM, TOP, Path, Range, enumerate_paths, execute, in_range, path_leq
from .splitter import split_loopbound, split_random
from .witness import generate_correctness_witness, join_witnesses, validate_witness

__all__ = [
    "__version__",
    "Budget",
    "Verdict",
    "run_cpa",
    "Cfa",
    "ProgramError",
    "build_cfa",
    "load_cfa",
    "parse",
    "RunReport",
    "aggregate",
    "run_ranged_program_analysis",
    "make_ranged",
    "BOTTOM",
    "TOP",
    "Path",
    "Range",
    "enumerate_paths",
    "execute",
    "in_range",
    "path_leq",
    "split_loopbound",
    "split_random",
    "generate_correctness_witness",
    "join_witnesses",
    "validate_witness",
]
