"""Energy decay and residual history of the gradient flow for one level.

    python scripts/flow_history.py STIRRER 64 EQ1ROT
"""
import sys

from gpfem.elements import ElementKind
from gpfem.experiments import EXAMPLES, ExampleId
from gpfem.gpe import solve_ground_state

example = ExampleId(sys.argv[1] if len(sys.argv) > 1 else "TABLE_CONV")
n = int(sys.argv[2]) if len(sys.argv) > 2 else 32
kind = ElementKind(sys.argv[3] if len(sys.argv) > 3 else "EQ1ROT")

gs = solve_ground_state(EXAMPLES[example].problem(kind, n))
for it, (e, lam, res) in enumerate(gs.history):
    print(f"{it:4d}  E={e:.12f}  lambda={lam:.12f}  residual={res:.3e}")
