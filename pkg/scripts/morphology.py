"""Ground-state densities for the two beta = 400 traps, written as cell samples.

Plot e.g. with matplotlib: ``tricontourf(x, y, u**2)`` from ``field_N<k>.csv``.
"""
from pathlib import Path

from gpfem.cli import print_report
from gpfem.experiments import ExampleId, preset_config, run_experiment

ROOT = Path(__file__).resolve().parents[1]

for example, n in ((ExampleId.GS_MORPHOLOGY, 128), (ExampleId.STIRRER, 128)):
    cfg = preset_config(example, levels=(n,), output_dir=ROOT / "out" / "morphology" / example.value.lower())
    print_report(run_experiment(cfg))
