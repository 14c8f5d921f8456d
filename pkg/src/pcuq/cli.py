"""Batch command-line front end.

Every command reads a JSON study config (``--config``) whose fields can be
overridden by flags, writes its artifacts into ``--out`` atomically, and
records a ``<command>.summary.json`` with the config hash, seed, versions
and every warning raised while it ran.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import DEFAULT_QUANTILES, kde, percentiles, sample, sample_moments, exceedance_probability
from .basis import build_basis
from .design import DesignProblem, optimal_design
from .models import (
    ARRIVAL_THRESHOLD,
    TABLE2_SPEC,
    Parameter,
    ParameterSpec,
    emit_nodes,
    extract_qois,
    format_float,
    ingest_results,
    ishigami,
    read_nodes,
    toy_caprock_pressure,
    toy_leakage,
    write_results,
)
from .projection import (
    EvaluationTable,
    LogTransformError,
    atomic_write_text,
    moments,
    project,
    read_archive,
    relative_l2_error,
    write_archive,
)
from .quadrature import tensor_grid
from .sensitivity import sobol_indices

MODELS = ("ishigami", "toy_leakage", "toy_caprock", "external")

ISHIGAMI_SPEC = ParameterSpec(tuple(Parameter(f"x{i}", "uniform", a=-math.pi, b=math.pi) for i in (1, 2, 3)))


def default_times() -> list[float]:
    return [float(t) for t in np.concatenate([np.arange(0, 120, 2), np.arange(120, 1501, 10)])]


@dataclass
class StudyConfig:
    """Settings shared by all commands; ``out`` is not part of the config hash."""

    model: str = "toy_leakage"
    spec: str | None = None
    order: int = 4
    nq: int | list[int] = 5
    nq_validation: int | list[int] | None = 4
    log_transform: bool = False
    outputs: str = "series"  # toy_leakage: "series" or "qoi"
    times: list[float] | None = None
    arrival_threshold: float = ARRIVAL_THRESHOLD
    ishigami_a: float = 7.0
    ishigami_b: float = 0.1
    seed: int = 0
    samples: int = 1_000_000
    quantiles: list[float] = field(default_factory=lambda: list(DEFAULT_QUANTILES))
    pdf_labels: list[str] | None = None
    pdf_points: int = 512
    pdf_bandwidth: str = "silverman"
    thresholds: list[float] = field(default_factory=list)
    design_dim: int | None = None  # 1-based
    design_threshold: float = 330.0
    target_prob: float = 0.05
    design_interval: list[float] | None = None
    design_tol: float = 1e-4
    design_sweep: int = 41
    design_margin_se: float = 0.0
    out: str = "out"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.outputs not in ("series", "qoi"):
            raise ValueError("outputs must be 'series' or 'qoi'")
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.pdf_bandwidth not in ("silverman", "silverman-robust"):
            raise ValueError("pdf_bandwidth must be 'silverman' or 'silverman-robust'")

    @classmethod
    def load(cls, path) -> "StudyConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"{path}: unknown config fields {sorted(unknown)}")
        if data.get("spec") is not None and not os.path.isabs(data["spec"]):
            data["spec"] = str((path.parent / data["spec"]).resolve())
        return cls(**data)

    def hashed(self) -> dict:
        data = asdict(self)
        data.pop("out")
        return data

    def config_hash(self) -> str:
        blob = json.dumps(self.hashed(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def parameter_spec(self) -> ParameterSpec:
        if self.spec is not None:
            return ParameterSpec.load(self.spec)
        if self.model == "ishigami":
            return ISHIGAMI_SPEC
        if self.model in ("toy_leakage", "toy_caprock"):
            return TABLE2_SPEC
        raise ValueError("an external model needs a parameter spec (--spec / config 'spec')")

    def time_grid(self) -> list[float]:
        return default_times() if self.times is None else [float(t) for t in self.times]


class CommandError(Exception):
    pass


class Run:
    """Collects outputs and warnings of one command and writes its summary."""

    def __init__(self, name: str, cfg: StudyConfig):
        self.name = name
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.outputs: list[str] = []
        self.notes: list[dict] = []
        self.extra: dict = {}

    def path(self, filename: str) -> Path:
        self.outputs.append(filename)
        return self.out / filename

    def note(self, category: str, message: str) -> None:
        self.notes.append({"category": category, "message": message})
        print(f"warning: {message}", file=sys.stderr)

    def write_summary(self) -> None:
        summary = {
            "command": self.name,
            "config": self.cfg.hashed(),
            "config_hash": self.cfg.config_hash(),
            "seed": self.cfg.seed,
            "versions": {
                "pcuq": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "outputs": sorted(set(self.outputs)),
            "warnings": self.notes,
            **self.extra,
        }
        atomic_write_text(self.out / f"{self.name}.summary.json", json.dumps(summary, indent=2) + "\n")


def _write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(r) for r in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _rule(cfg: StudyConfig, spec: ParameterSpec, nq=None):
    return tensor_grid(spec.families, cfg.nq if nq is None else nq)


def _model_outputs(cfg: StudyConfig, xi: np.ndarray, phys: np.ndarray) -> tuple[np.ndarray, list[str]]:
    if cfg.model == "ishigami":
        return ishigami(xi, cfg.ishigami_a, cfg.ishigami_b)[:, None], ["y"]
    if cfg.model == "toy_caprock":
        return toy_caprock_pressure(phys)[:, None], ["p_caprock"]
    if cfg.model == "toy_leakage":
        times = cfg.time_grid()
        series = toy_leakage(phys, times)
        if cfg.outputs == "qoi":
            q = extract_qois(series, cfg.arrival_threshold)
            if q.censored.any():
                raise CommandError(f"{int(q.censored.sum())} realizations never reach the arrival threshold")
            return q.as_columns(), ["t_arrival", "q_max", "t_maxleak"]
        return series.values, [f"{t:g}" for t in times]
    raise CommandError("the external model is evaluated outside this tool; supply results.csv")


# --- commands ---------------------------------------------------------------


def cmd_gen_nodes(cfg: StudyConfig, args, run: Run) -> None:
    spec = cfg.parameter_spec()
    rule = _rule(cfg, spec, args.nq_override)
    emit_nodes(rule, spec, run.path(args.nodes or "nodes.csv"))
    run.extra["n_nodes"] = rule.n_nodes


def cmd_run_model(cfg: StudyConfig, args, run: Run) -> None:
    spec = cfg.parameter_spec()
    nodes_path = Path(args.nodes) if args.nodes else run.out / "nodes.csv"
    names, xi, phys, _ = read_nodes(nodes_path)
    if names != spec.names:
        raise CommandError(f"{nodes_path}: parameter columns {names} do not match spec {spec.names}")
    outputs, labels = _model_outputs(cfg, xi, phys)
    table = EvaluationTable("built-in", outputs, labels)
    write_results(run.path(args.results or "results.csv"), table)


def _load_results(cfg, args, run, spec, nq=None, default="results.csv"):
    rule = _rule(cfg, spec, nq)
    path = Path(args.results) if getattr(args, "results", None) else run.out / default
    return rule, ingest_results(path, rule)


def cmd_project(cfg: StudyConfig, args, run: Run) -> None:
    spec = cfg.parameter_spec()
    rule, table = _load_results(cfg, args, run, spec, args.nq_override)
    basis = build_basis(spec.dim, cfg.order, spec.families)
    sur = project(table, rule, basis, cfg.log_transform)
    write_archive(sur, run.path(args.expansion or "expansion.json"))


def _expansion(args, run: Run, default="expansion.json"):
    return read_archive(Path(args.expansion) if args.expansion else run.out / default)


def cmd_evaluate(cfg: StudyConfig, args, run: Run) -> None:
    sur = _expansion(args, run)
    if not args.points:
        raise CommandError("evaluate needs --points (CSV with columns xi_1..xi_d)")
    with open(args.points, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = [f"xi_{i + 1}" for i in range(sur.basis.dim)]
        missing = [c for c in cols if c not in (reader.fieldnames or [])]
        if missing:
            raise CommandError(f"{args.points}: missing columns {missing}")
        pts = np.array([[float(row[c]) for c in cols] for row in reader])
    vals = np.atleast_2d(sur.evaluate(pts))
    rows = ([str(j)] + [format_float(v) for v in vals[j]] for j in range(vals.shape[0]))
    _write_csv(run.path("evaluate.csv"), ["point_id", *sur.output_labels], rows)


def cmd_moments(cfg: StudyConfig, args, run: Run) -> None:
    sur = _expansion(args, run)
    try:
        mean, var = moments(sur)
        method = "coefficients"
    except LogTransformError:
        mean, var, _, _ = sample_moments(sur, cfg.samples, cfg.seed)
        method = "sampling"
    rows = ([lab, format_float(m), format_float(v)] for lab, m, v in zip(sur.output_labels, mean, var))
    _write_csv(run.path("moments.csv"), ["label", "mean", "variance"], rows)
    run.extra["moments_method"] = method


def cmd_pdf(cfg: StudyConfig, args, run: Run) -> None:
    sur = _expansion(args, run)
    labels = cfg.pdf_labels or list(sur.output_labels)
    idx = []
    for lab in labels:
        if lab not in sur.output_labels:
            raise CommandError(f"pdf label {lab!r} not among surrogate outputs")
        idx.append(sur.output_labels.index(lab))
    rows = []
    for i, lab in zip(idx, labels):
        draws = sample(sur.select([i]), cfg.samples, cfg.seed).draws[:, 0]
        try:
            est = kde(draws, n_grid=cfg.pdf_points, bandwidth=cfg.pdf_bandwidth)
        except ValueError as exc:
            run.note("DegenerateSample", f"output {lab!r}: {exc}")
            continue
        grid = np.linspace(est.grid[0], est.grid[-1], cfg.pdf_points)
        dens = np.interp(grid, est.grid, est.density)
        rows += [[lab, format_float(x), format_float(y)] for x, y in zip(grid, dens)]
        run.extra.setdefault("bandwidths", {})[lab] = est.bandwidth
    _write_csv(run.path("pdf.csv"), ["label", "x", "pdf"], rows)


def cmd_percentiles(cfg: StudyConfig, args, run: Run) -> None:
    sur = _expansion(args, run)
    q = np.asarray(cfg.quantiles, dtype=float)
    table = percentiles(sur, q, cfg.samples, cfg.seed)
    header = ["label"] + [f"q{round(100 * v):02d}" for v in q]
    rows = ([lab] + [format_float(v) for v in table[m]] for m, lab in enumerate(sur.output_labels))
    _write_csv(run.path("percentiles.csv"), header, rows)


def cmd_sobol(cfg: StudyConfig, args, run: Run) -> None:
    sur = _expansion(args, run)
    report = sobol_indices(sur)
    undefined = [lab for lab, ok in zip(report.output_labels, report.defined) if not ok]
    if undefined:
        run.note("UndefinedIndices", f"zero variance, indices undefined at outputs {undefined}")
    report.to_csv(run.path("sobol.csv"))


def cmd_risk(cfg: StudyConfig, args, run: Run) -> None:
    sur = _expansion(args, run)
    if not cfg.thresholds:
        raise CommandError("risk needs at least one --threshold")
    rows = []
    for thr in cfg.thresholds:
        ex = exceedance_probability(sur, thr, cfg.samples, cfg.seed)
        rows += [[format_float(thr), lab, format_float(p), format_float(s)] for lab, p, s in zip(sur.output_labels, ex.prob, ex.stderr)]
    _write_csv(run.path("exceedance.csv"), ["threshold", "label", "prob", "stderr"], rows)


def cmd_design_opt(cfg: StudyConfig, args, run: Run) -> None:
    sur = _expansion(args, run)
    spec = cfg.parameter_spec()
    if cfg.design_dim is None:
        raise CommandError("design-opt needs --design-dim (1-based)")
    if not 1 <= cfg.design_dim <= spec.dim:
        raise CommandError(f"--design-dim must be in 1..{spec.dim}")
    param = spec.parameters[cfg.design_dim - 1]
    center, scale = param.design_center_scale()
    lo, hi = cfg.design_interval or (center - 3 * scale, center + 3 * scale)
    problem = DesignProblem(sur, cfg.design_dim - 1, center, scale, cfg.design_threshold, cfg.target_prob)
    res = optimal_design(
        problem, (lo, hi), cfg.samples, cfg.seed, cfg.design_tol, cfg.design_sweep,
        verify_seed=cfg.seed + 1, margin_se=cfg.design_margin_se,
    )
    res.sweep_csv(run.path("design_sweep.csv"))
    summary = res.summary(problem, cfg.samples, cfg.seed)
    summary["design_parameter"] = param.name
    summary["design_dim"] = cfg.design_dim
    if param.distribution == "lognormal":
        summary["q_star_physical"] = math.exp(res.value)
    atomic_write_text(run.path("design_summary.json"), json.dumps(summary, indent=2) + "\n")
    if res.verified_prob is not None and res.binding and not res.verified_prob < cfg.target_prob:
        run.note("FeasibilityCheck", f"fresh-seed failure probability {res.verified_prob:.4g} at q* is not below target")


def _write_l2(run: Run, sur, err) -> None:
    if err.space == "log":
        header = ["label", "rel_l2_log", "rel_l2_physical"]
        rows = ([lab, format_float(v), format_float(p)] for lab, v, p in zip(sur.output_labels, err.value, err.physical))
    else:
        header = ["label", "rel_l2_physical"]
        rows = ([lab, format_float(v)] for lab, v in zip(sur.output_labels, err.value))
    _write_csv(run.path("l2_error.csv"), header, rows)


def cmd_validate(cfg: StudyConfig, args, run: Run) -> None:
    sur = _expansion(args, run)
    spec = cfg.parameter_spec()
    nq = args.nq_override if args.nq_override is not None else cfg.nq_validation
    if nq is None:
        raise CommandError("validate needs a validation grid (--nq or config nq_validation)")
    rule, table = _load_results(cfg, args, run, spec, nq, default="results_validation.csv")
    if tuple(table.output_labels) != tuple(sur.output_labels):
        raise CommandError("validation outputs do not match the surrogate labels")
    err = relative_l2_error(sur, table, rule)
    _write_l2(run, sur, err)


def cmd_pipeline(cfg: StudyConfig, args, run: Run) -> None:
    """Built-in model end to end: nodes, evaluations, projection, analyses."""
    if cfg.model == "external":
        raise CommandError("pipeline runs built-in models only")
    spec = cfg.parameter_spec()
    basis = build_basis(spec.dim, cfg.order, spec.families)

    def evaluate_on(nq, nodes_name, results_name):
        rule = _rule(cfg, spec, nq)
        emit_nodes(rule, spec, run.path(nodes_name))
        outputs, labels = _model_outputs(cfg, rule.nodes, spec.to_physical(rule.nodes))
        table = EvaluationTable.from_rule(rule, outputs, labels)
        write_results(run.path(results_name), table)
        return rule, ingest_results(run.out / results_name, rule)

    rule, table = evaluate_on(cfg.nq, "nodes.csv", "results.csv")
    sur = project(table, rule, basis, cfg.log_transform)
    write_archive(sur, run.path("expansion.json"))
    direct = sur
    if cfg.log_transform:
        direct = project(table, rule, basis, False)
        write_archive(direct, run.path("expansion_direct.json"))

    sub = argparse.Namespace(expansion=str(run.out / "expansion.json"), results=None, nq_override=None, points=None)
    if cfg.nq_validation is not None:
        vrule, vtable = evaluate_on(cfg.nq_validation, "nodes_validation.csv", "results_validation.csv")
        err = relative_l2_error(sur, vtable, vrule)
        _write_l2(run, sur, err)
    cmd_moments(cfg, sub, run)
    cmd_percentiles(cfg, sub, run)
    if cfg.pdf_labels is not None or sur.n_outputs <= 8:
        cmd_pdf(cfg, sub, run)
    if cfg.thresholds:
        cmd_risk(cfg, sub, run)
    cmd_sobol(cfg, argparse.Namespace(expansion=str(run.out / ("expansion_direct.json" if cfg.log_transform else "expansion.json"))), run)
    if cfg.design_dim is not None:
        cmd_design_opt(cfg, sub, run)


COMMANDS = {
    "gen-nodes": cmd_gen_nodes,
    "run-model": cmd_run_model,
    "project": cmd_project,
    "evaluate": cmd_evaluate,
    "moments": cmd_moments,
    "pdf": cmd_pdf,
    "percentiles": cmd_percentiles,
    "sobol": cmd_sobol,
    "risk": cmd_risk,
    "design-opt": cmd_design_opt,
    "validate": cmd_validate,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcuq", description="Polynomial chaos surrogates: NISP, sensitivity, risk.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="study config JSON")
        p.add_argument("--out", help="output directory")
        p.add_argument("--spec", help="parameter spec JSON")
        p.add_argument("--model", choices=MODELS)
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--order", type=int)
        p.add_argument("--nq", type=int, dest="nq_override", help="points per dimension for this command's grid")
        p.add_argument("--log-transform", action="store_true", default=None)
        p.add_argument("--threshold", type=float, action="append", help="exceedance / failure threshold (repeatable)")
        p.add_argument("--target-prob", type=float)
        p.add_argument("--design-dim", type=int, help="1-based index of the design input")
        p.add_argument("--nodes", help="node table path")
        p.add_argument("--results", help="results table path")
        p.add_argument("--expansion", help="expansion archive path")
        p.add_argument("--points", help="CSV of germ points for evaluate")
    return parser


def resolve_config(args) -> StudyConfig:
    cfg = StudyConfig.load(args.config) if args.config else StudyConfig()
    updates = {}
    for key in ("out", "model", "seed", "samples", "order", "target_prob", "design_dim"):
        value = getattr(args, key)
        if value is not None:
            updates[key] = value
    if args.spec is not None:
        updates["spec"] = str(Path(args.spec).resolve())
    if args.log_transform:
        updates["log_transform"] = True
    if args.threshold:
        if args.command == "design-opt":
            updates["design_threshold"] = args.threshold[0]
        else:
            updates["thresholds"] = list(args.threshold)
    if args.nq_override is not None and args.command == "pipeline":
        updates["nq"] = args.nq_override
    return replace(cfg, **updates)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        os.makedirs(cfg.out, exist_ok=True)
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run = Run(args.command.replace("-", "_"), cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            COMMANDS[args.command](cfg, args, run)
        except (CommandError, OSError, ValueError, KeyError, ZeroDivisionError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    for w in caught:
        run.note(w.category.__name__, str(w.message))
    run.write_summary()
    return 0


if __name__ == "__main__":
    sys.exit(main())
