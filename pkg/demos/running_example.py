"""Split the running example, prove both ranges, print the joined witness.

    python demos/running_example.py
"""

from pathlib import Path

from rangedpa import Budget, load_cfa, run_ranged_program_analysis, split_loopbound
from rangedpa.expr import format_formula
from rangedpa.orchestrator import SequentialExecutor
from rangedpa.semantics import enumerate_paths, execute

PROGRAM = Path(__file__).resolve().parent.parent / "tests" / "corpus" / "safe" / "running.imp"
DOMAIN = (-8, 8)

cfa = load_cfa(PROGRAM)
print(cfa.dump())
print()

paths = enumerate_paths(cfa, DOMAIN)
print(f"{len(paths)} distinct paths for x in {DOMAIN}, smallest first:")
for p in paths:
    print(f"  x={p.states[0]['x']:>2}  {' '.join(map(str, p.locations))}")

split = split_loopbound(cfa, 3, domain=DOMAIN)
tau = split.test_cases[0]
print(f"\nloop-bound splitter picks {tau}; its path: {execute(cfa, tau).locations}")

report = run_ranged_program_analysis(
    cfa, ["interval", "value"], split, Budget(20), domain=DOMAIN, executor=SequentialExecutor()
)
print(f"\nverdict {report.verdict.value}")
for o in report.outcomes:
    print(f"  range {o.index} [{o.lower} .. {o.upper}]: {o.verdict.value} by {o.analysis}, {o.states} states")

print(f"\njoined witness ({report.validation}):")
for loc in cfa.locations:
    print(f"  l{loc:<3} {format_formula(report.witness.invariant(loc))}")
