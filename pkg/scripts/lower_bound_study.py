"""EQ1rot and Q2 energies side by side for the beta = 10 and stirrer examples.

EQ1rot energies should increase towards the conforming reference from below,
Q2 energies decrease towards it from above.
"""
from pathlib import Path

from gpfem.cli import print_report
from gpfem.elements import ElementKind
from gpfem.experiments import ExampleId, ReferenceSpec, preset_config, run_experiment

ROOT = Path(__file__).resolve().parents[1]

for example in (ExampleId.ELEMENT_COMPARE, ExampleId.STIRRER):
    cfg = preset_config(
        example,
        elements=(ElementKind.EQ1ROT, ElementKind.Q2),
        levels=(8, 16, 32, 64, 128),
        reference=ReferenceSpec(ElementKind.Q2, 512),
        lower_bound=True,
        fields=False,
        output_dir=ROOT / "out" / f"lower_bound_{example.value.lower()}",
        cache_dir=ROOT / "out" / "cache",
    )
    print(f"== {example.value}")
    print_report(run_experiment(cfg))
