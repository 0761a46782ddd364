"""Declarative convergence experiments and their CSV reports.

A config is a TOML file::

    example = "TABLE_CONV"          # or give a [problem] table instead
    elements = ["EQ1ROT"]
    levels = [8, 16, 32, 64, 128, 256]
    output_dir = "out/table2"

    [reference]                     # optional; enables error columns
    element = "Q2"
    level = 512

    [flow]                          # optional overrides
    tol = 1e-12
    max_iter = 2000

    [problem]                       # custom problem
    domain = [-1.0, 1.0, -1.0, 1.0]
    potential = "SIN_WELL"
    beta = 1.0
    aspect = [1, 1]                 # cells per axis are N * aspect

Further optional keys: ``seed``, ``fields`` (write per-level field samples),
``cache_dir`` (reuse reference solutions across runs), ``lower_bound``.
"""
from __future__ import annotations

import datetime as _dt
import enum
import hashlib
import json
import logging
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .analysis import compute_errors, eoc, lower_bound_check
from .assembly import potential_preset
from .elements import DiscreteField, ElementKind, build_space
from .gpe import FlowConfig, GpeProblem, NonConvergenceError, solve_ground_state
from .interp import evaluate
from .mesh import Domain, build_mesh

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

WORKERS_ENV = "GPFEM_WORKERS"


class ExampleId(str, enum.Enum):
    GS_MORPHOLOGY = "GS_MORPHOLOGY"
    TABLE_CONV = "TABLE_CONV"
    ELEMENT_COMPARE = "ELEMENT_COMPARE"
    STIRRER = "STIRRER"


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid config: " + "; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class ProblemSpec:
    domain: Domain
    potential: str
    beta: float
    aspect: tuple[int, int] = (1, 1)
    potential_params: tuple = ()

    def mesh(self, n: int):
        return build_mesh(self.domain, n * self.aspect[0], n * self.aspect[1])

    def problem(self, kind: ElementKind, n: int) -> GpeProblem:
        space = build_space(self.mesh(n), kind)
        V = potential_preset(self.potential, **dict(self.potential_params))
        return GpeProblem(space, V, self.beta)

    def key(self) -> str:
        d = self.domain
        text = repr(
            (d.xmin, d.xmax, d.ymin, d.ymax, self.potential, self.beta, self.aspect,
             self.potential_params)
        )
        return hashlib.sha1(text.encode()).hexdigest()[:12]


EXAMPLES = {
    ExampleId.GS_MORPHOLOGY: ProblemSpec(Domain(-4, 4, -8, 8), "HARMONIC_ANISO", 400.0, (1, 2)),
    ExampleId.TABLE_CONV: ProblemSpec(Domain.square(-1, 1), "SIN_WELL", 1.0),
    ExampleId.ELEMENT_COMPARE: ProblemSpec(Domain.square(-1, 1), "SIN_WELL", 10.0),
    ExampleId.STIRRER: ProblemSpec(Domain.square(-8, 8), "HARMONIC_STIRRER", 400.0),
}

# example numbers accepted by the lowerbound subcommand
EXAMPLE_NUMBERS = {
    "6.1": ExampleId.GS_MORPHOLOGY,
    "6.2": ExampleId.TABLE_CONV,
    "6.3": ExampleId.ELEMENT_COMPARE,
    "6.4": ExampleId.STIRRER,
}


@dataclass(frozen=True)
class ReferenceSpec:
    element: ElementKind = ElementKind.Q2
    level: int = 512


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    levels: tuple[int, ...]
    elements: tuple[ElementKind, ...] = (ElementKind.EQ1ROT,)
    example: ExampleId | None = None
    reference: ReferenceSpec | None = None
    flow: FlowConfig = FlowConfig()
    output_dir: Path = Path("out")
    seed: int = 0
    fields: bool = True
    lower_bound: bool = False
    cache_dir: Path | None = None

    def echo(self) -> dict:
        d = self.problem.domain
        return {
            "example": self.example.value if self.example else None,
            "domain": [d.xmin, d.xmax, d.ymin, d.ymax],
            "potential": self.problem.potential,
            "beta": self.problem.beta,
            "aspect": list(self.problem.aspect),
            "elements": [e.value for e in self.elements],
            "levels": list(self.levels),
            "reference": (
                {"element": self.reference.element.value, "level": self.reference.level}
                if self.reference else None
            ),
            "flow": {"step": self.flow.step, "tol": self.flow.tol, "max_iter": self.flow.max_iter},
            "seed": self.seed,
        }


def _is_pow2(n) -> bool:
    return isinstance(n, int) and n > 0 and n & (n - 1) == 0


def parse_config(raw: dict, base: Path | None = None) -> ExperimentConfig:
    """Validate a config mapping, collecting every problem before raising."""
    problems = []
    known = {
        "example", "elements", "levels", "reference", "flow", "problem",
        "output_dir", "seed", "fields", "lower_bound", "cache_dir",
    }
    for k in raw:
        if k not in known:
            problems.append(f"{k}: unknown key")

    example = None
    spec = None
    if "example" in raw:
        try:
            example = ExampleId(str(raw["example"]).upper())
            spec = EXAMPLES[example]
        except ValueError:
            problems.append(f"example: unknown example {raw['example']!r}")
    if "problem" in raw:
        p = raw["problem"]
        try:
            dom = Domain(*map(float, p.get("domain", [-1, 1, -1, 1])))
        except (TypeError, ValueError) as exc:
            problems.append(f"problem.domain: {exc}")
            dom = None
        pot = str(p.get("potential", "ZERO")).upper()
        params = p.get("potential_params", {})
        try:
            potential_preset(pot, **params)
        except (ValueError, TypeError) as exc:
            problems.append(f"problem.potential: {exc}")
        beta = p.get("beta", 0.0)
        if not isinstance(beta, (int, float)) or beta < 0:
            problems.append("problem.beta: must be a nonnegative number")
        aspect = tuple(p.get("aspect", (1, 1)))
        if len(aspect) != 2 or not all(isinstance(a, int) and a > 0 for a in aspect):
            problems.append("problem.aspect: must be two positive integers")
        if dom is not None and not problems:
            spec = ProblemSpec(dom, pot, float(beta), aspect, tuple(sorted(params.items())))
    if spec is None and not problems:
        problems.append("example/problem: one of them is required")

    levels = raw.get("levels", [])
    if not isinstance(levels, list) or not levels:
        problems.append("levels: must be a non-empty list")
        levels = []
    elif not all(_is_pow2(n) for n in levels):
        problems.append("levels: entries must be powers of two")
    elif any(b <= a for a, b in zip(levels, levels[1:])):
        problems.append("levels: must be strictly increasing")

    elements = []
    for e in raw.get("elements", ["EQ1ROT"]):
        try:
            elements.append(ElementKind(str(e).upper()))
        except ValueError:
            problems.append(f"elements: unknown element {e!r}")
    if not elements and "elements" in raw:
        problems.append("elements: must not be empty")

    reference = None
    if "reference" in raw:
        r = raw["reference"]
        try:
            reference = ReferenceSpec(ElementKind(str(r.get("element", "Q2")).upper()),
                                      int(r.get("level", 512)))
        except ValueError as exc:
            problems.append(f"reference: {exc}")
        if reference is not None:
            if not _is_pow2(reference.level):
                problems.append("reference.level: must be a power of two")
            elif levels and reference.level <= max(levels):
                problems.append("reference.level: must exceed every measured level")

    flow = FlowConfig()
    if "flow" in raw:
        f = raw["flow"]
        unknown = set(f) - {"step", "tol", "max_iter"}
        if unknown:
            problems.append(f"flow: unknown keys {sorted(unknown)}")
        try:
            flow = FlowConfig(
                step=float(f.get("step", 1.0)),
                tol=float(f.get("tol", 1e-12)),
                max_iter=int(f.get("max_iter", 2000)),
            )
        except (TypeError, ValueError) as exc:
            problems.append(f"flow: {exc}")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        problems.append("seed: must be an integer")

    if problems:
        raise ConfigError(problems)

    out = Path(raw.get("output_dir", "out"))
    cache = raw.get("cache_dir")
    if base is not None:
        out = out if out.is_absolute() else (base / out).resolve()
        if cache is not None and not Path(cache).is_absolute():
            cache = (base / cache).resolve()
    return ExperimentConfig(
        problem=spec,
        levels=tuple(levels),
        elements=tuple(elements),
        example=example,
        reference=reference,
        flow=flow,
        output_dir=out,
        seed=seed,
        fields=bool(raw.get("fields", True)),
        lower_bound=bool(raw.get("lower_bound", False)),
        cache_dir=Path(cache) if cache is not None else None,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    return parse_config(raw, base=path.parent)


@dataclass
class ErrorRecord:
    element: str
    N: int
    dofs: int
    energy: float | None = None
    eigenvalue: float | None = None
    l2_error: float | None = None
    h1_error: float | None = None
    energy_error: float | None = None
    eigenvalue_error: float | None = None
    cpu_s: float = 0.0
    iterations: int = 0
    residual: float | None = None
    status: str = "ok"


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list[ErrorRecord]
    histories: dict = field(default_factory=dict, repr=False)
    reference_energy: float | None = None
    reference_eigenvalue: float | None = None
    lower_bound: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return any(r.status != "ok" for r in self.records)

    def rows(self, element: ElementKind) -> list[ErrorRecord]:
        return [r for r in self.records if r.element == element.value]


@dataclass
class _JobResult:
    record: ErrorRecord
    history: list
    coeffs: np.ndarray | None


def _solve_job(spec: ProblemSpec, kind: ElementKind, n: int, flow: FlowConfig) -> _JobResult:
    with threadpool_limits(1):
        t0 = time.perf_counter()
        problem = spec.problem(kind, n)
        rec = ErrorRecord(kind.value, n, problem.space.n_dofs)
        try:
            gs = solve_ground_state(problem, flow)
        except NonConvergenceError as exc:
            rec.cpu_s = time.perf_counter() - t0
            rec.status = "failed"
            rec.iterations = len(exc.history)
            return _JobResult(rec, exc.history, None)
        rec.cpu_s = time.perf_counter() - t0
        rec.energy, rec.eigenvalue = gs.energy, gs.eigenvalue
        rec.iterations, rec.residual = gs.iterations, gs.residual
        return _JobResult(rec, gs.history, gs.u.coeffs)


def solve_reference(spec: ProblemSpec, ref: ReferenceSpec, flow: FlowConfig, cache_dir=None):
    """Reference ground state, loaded from ``cache_dir`` when available."""
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / (
            f"ref_{spec.key()}_{ref.element.value}_{ref.level}_{flow.tol:g}.npz"
        )
        if path.exists():
            data = np.load(path)
            problem = spec.problem(ref.element, ref.level)
            u = DiscreteField(problem.space, data["u"])
            return u, float(data["energy"]), float(data["eigenvalue"])
    res = _solve_job(spec, ref.element, ref.level, flow)
    if res.record.status != "ok":
        raise NonConvergenceError("reference solve did not converge", res.history)
    space = build_space(spec.mesh(ref.level), ref.element)
    u = DiscreteField(space, res.coeffs)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, u=res.coeffs, energy=res.record.energy, eigenvalue=res.record.eigenvalue)
    return u, res.record.energy, res.record.eigenvalue


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def run_experiment(cfg: ExperimentConfig, workers: int | None = None, write: bool = True) -> ExperimentReport:
    """Solve every (element, level) row, measure errors, write the report."""
    workers = worker_count() if workers is None else workers
    jobs = [(kind, n) for kind in cfg.elements for n in cfg.levels]

    ref_u = ref_e = ref_l = None
    if cfg.reference is not None:
        ref_u, ref_e, ref_l = solve_reference(cfg.problem, cfg.reference, cfg.flow, cfg.cache_dir)

    if workers > 1 and len(jobs) > 1:
        # fork after BLAS/CHOLMOD threads exist can deadlock; spawn is safe
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            futures = [pool.submit(_solve_job, cfg.problem, k, n, cfg.flow) for k, n in jobs]
            results = [f.result() for f in futures]
    else:
        results = [_solve_job(cfg.problem, k, n, cfg.flow) for k, n in jobs]

    report = ExperimentReport(cfg, [], reference_energy=ref_e, reference_eigenvalue=ref_l)
    fields = {}
    for (kind, n), res in zip(jobs, results):
        rec = res.record
        report.histories[(kind.value, n)] = res.history
        if res.coeffs is not None:
            u = DiscreteField(build_space(cfg.problem.mesh(n), kind), res.coeffs)
            fields[(kind.value, n)] = u
            if ref_u is not None:
                with threadpool_limits(1):
                    rec.l2_error, rec.h1_error = compute_errors(u, ref_u)
                rec.energy_error = abs(rec.energy - ref_e)
                rec.eigenvalue_error = abs(rec.eigenvalue - ref_l)
        report.records.append(rec)

    if cfg.lower_bound and ref_e is not None:
        for kind in cfg.elements:
            energies = {r.N: r.energy for r in report.rows(kind) if r.status == "ok"}
            report.lower_bound[kind.value] = lower_bound_check(energies, ref_e)

    if write:
        write_report(report, fields)
    return report


# ---------------------------------------------------------------- CSV output


def fmt_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def fmt_sci(x) -> str:
    if x is None:
        return ""
    return np.format_float_scientific(float(x), unique=True, exp_digits=2)


def _write_csv(path: Path, header: list[str], rows: list[list[str]]):
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    lines = [f"# gpfem {__version__} generated {stamp}", ",".join(header)]
    lines += [",".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def read_csv_body(path) -> str:
    """File content without the leading comment line."""
    text = Path(path).read_text()
    return "".join(l for l in text.splitlines(keepends=True) if not l.startswith("#"))


def _orders(values: list) -> list:
    out = [None]
    for a, b in zip(values, values[1:]):
        out.append(eoc(a, b) if a is not None and b is not None else None)
    return out


def write_report(report: ExperimentReport, fields: dict | None = None):
    cfg = report.config
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    multi = len(cfg.elements) > 1
    for kind in cfg.elements:
        out = root / kind.value.lower() if multi else root
        out.mkdir(parents=True, exist_ok=True)
        rows = report.rows(kind)
        if cfg.reference is not None:
            l2o = _orders([r.l2_error for r in rows])
            h1o = _orders([r.h1_error for r in rows])
            _write_csv(
                out / "table_errors.csv",
                ["N", "DOFs", "cpu_s", "l2_error", "l2_order", "h1_error", "h1_order"],
                [
                    [str(r.N), str(r.dofs), f"{r.cpu_s:.3f}", fmt_sci(r.l2_error),
                     fmt_value(a), fmt_sci(r.h1_error), fmt_value(b)]
                    for r, a, b in zip(rows, l2o, h1o)
                ],
            )
        eo = _orders([r.energy_error for r in rows])
        lo = _orders([r.eigenvalue_error for r in rows])
        _write_csv(
            out / "table_energy.csv",
            ["N", "energy", "energy_error", "energy_order",
             "eigenvalue", "eigenvalue_error", "eigenvalue_order"],
            [
                [str(r.N), fmt_value(r.energy), fmt_sci(r.energy_error), fmt_value(a),
                 fmt_value(r.eigenvalue), fmt_sci(r.eigenvalue_error), fmt_value(b)]
                for r, a, b in zip(rows, eo, lo)
            ],
        )
        conv = []
        for r in rows:
            for it, (e, lam, res) in enumerate(report.histories[(kind.value, r.N)]):
                conv.append([str(r.N), str(it), fmt_value(e), fmt_value(lam), fmt_sci(res)])
        _write_csv(out / "convergence.csv", ["N", "iteration", "energy", "eigenvalue", "residual"], conv)
        if cfg.fields and fields:
            for r in rows:
                u = fields.get((kind.value, r.N))
                if u is not None:
                    write_field(out / f"field_N{r.N}.csv", u)
    if report.lower_bound:
        rows = []
        for kind, lb in report.lower_bound.items():
            steps = [None] + lb.steps
            for n, e, m, b, s in zip(lb.levels, lb.energies, lb.margins, lb.below, steps):
                rows.append([kind, str(n), fmt_value(e), fmt_value(lb.reference), fmt_sci(m),
                             fmt_value(b), fmt_sci(s)])
        _write_csv(root / "lowerbound.csv",
                   ["element", "N", "energy", "reference_energy", "margin", "below", "step"], rows)
    summary = {
        "config": cfg.echo(),
        "reference_energy": report.reference_energy,
        "reference_eigenvalue": report.reference_eigenvalue,
        "failed_rows": [[r.element, r.N] for r in report.records if r.status != "ok"],
        "lower_bound": {
            k: {"all_below": lb.all_below, "monotone": lb.monotone, "threshold": lb.threshold}
            for k, lb in report.lower_bound.items()
        },
    }
    (root / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def write_field(path: Path, u: DiscreteField):
    """Cell-center samples ``i, j, x, y, u`` for morphology plots."""
    mesh = u.space.mesh
    c = mesh.cell_centers()
    vals = evaluate(u, c[:, 0], c[:, 1])
    rows = [
        [str(i), str(j), fmt_value(x), fmt_value(y), fmt_value(v)]
        for (i, j), (x, y), v in zip(mesh.cells.tolist(), c.tolist(), vals.tolist())
    ]
    _write_csv(path, ["i", "j", "x", "y", "u"], rows)


def preset_config(example: ExampleId, **overrides) -> ExperimentConfig:
    """Default config of a numbered example; keyword overrides are applied last."""
    example = ExampleId(example)
    base = dict(problem=EXAMPLES[example], example=example,
                levels=(8, 16, 32, 64, 128, 256), output_dir=Path("out") / example.value.lower())
    if example is ExampleId.ELEMENT_COMPARE:
        base["elements"] = (ElementKind.EQ1ROT, ElementKind.Q2)
    base.update(overrides)
    return ExperimentConfig(**base)


__all__ = [
    "ConfigError", "ErrorRecord", "ExampleId", "ExperimentConfig", "ExperimentReport",
    "ProblemSpec", "ReferenceSpec", "load_config", "parse_config", "preset_config",
    "run_experiment", "solve_reference", "asdict", "replace",
]
