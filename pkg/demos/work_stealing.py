"""Value analysis stalls on the loop range; interval analysis steals it.

With inputs ranging over +-10^6 the value analysis enumerates far too many
loop iterations.  Without stealing the loop range stays UNKNOWN.  With
stealing, the interval analysis finishes its own range, is relaunched on
the loop range, and wins the race.

    python demos/work_stealing.py [timeout-seconds]
"""

import sys
from pathlib import Path

from rangedpa import Budget, load_cfa, run_ranged_program_analysis, split_loopbound

PROGRAM = Path(__file__).resolve().parent.parent / "tests" / "corpus" / "safe" / "running.imp"
WIDE = (-(10**6), 10**6)
timeout = float(sys.argv[1]) if len(sys.argv) > 1 else 5.0

cfa = load_cfa(PROGRAM)
split = split_loopbound(cfa, 3, domain=WIDE)

for steal in (False, True):
    report = run_ranged_program_analysis(
        cfa, ["value", "interval"], split, Budget(timeout), steal=steal, domain=WIDE
    )
    print(f"steal={steal}: {report.verdict.value} in {report.wall_time:.2f} s, "
          f"{report.launches} launches, at most {report.max_concurrent} at once")
    for e in report.events:
        extra = e.get("verdict") or e.get("reason") or ""
        print(f"  {e['time']:8.3f}  {e['event']:<7} {e['job']:<20} {extra}")
    print()
