"""Energy/eigenvalue table and L2/H1 error table for the beta = 1 sin-well problem.

    python scripts/reproduce_tables.py [--max-level 256] [--reference-level 512]
"""
import argparse
from pathlib import Path

from gpfem.cli import print_report
from gpfem.elements import ElementKind
from gpfem.experiments import ExampleId, ReferenceSpec, preset_config, run_experiment

ROOT = Path(__file__).resolve().parents[1]

parser = argparse.ArgumentParser()
parser.add_argument("--max-level", type=int, default=256)
parser.add_argument("--reference-level", type=int, default=512)
args = parser.parse_args()

levels = tuple(2**k for k in range(3, args.max_level.bit_length()))
cfg = preset_config(
    ExampleId.TABLE_CONV,
    levels=levels,
    reference=ReferenceSpec(ElementKind.Q2, args.reference_level),
    output_dir=ROOT / "out" / "tables",
    cache_dir=ROOT / "out" / "cache",
)
print_report(run_experiment(cfg))
