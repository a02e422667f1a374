"""Experiment-grid harness: deterministic runs, CSV artifacts, comparisons.

A grid is the cartesian product of topology regimes, SEM models, node
counts, and noise levels, each replicated ``n_reps`` times and learned by
every configured algorithm.  Per-run seeds are derived up front by hashing
the cell fingerprint, so results are byte-identical regardless of worker
count and stable under grid edits: adding a cell never reshuffles the
random draws of existing cells.

The Fisher-Z test is paired with the linear model and the Gaussian-MI test
with the nonlinear model.  All algorithms within one (cell, rep) share the
same simulated dataset, which makes topology comparisons paired across
algorithms.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .citests import CiTestKind, build_tester
from .evaluation import (
    EVAL_MODES,
    evaluate_run,
    normalize_eval_mode,
    sensitivity,
    specificity,
    wilcoxon_rank_sum,
)
from .graphs import in_degree_histogram
from .learners import ALGORITHMS, LearnParams, learn_structure
from .rng import derive_seed
from .sem import MODELS, SemSpec, simulate_dataset
from .topology import TopologySpec, generate_pa_dag

__all__ = [
    "AUTO_TEST_BY_MODEL",
    "DEFAULT_GROUP_KEYS",
    "RUNS_CSV_HEADER",
    "PVALUES_CSV_HEADER",
    "ConfigError",
    "TopologyRegime",
    "ExperimentConfig",
    "RunRecord",
    "PairwiseComparison",
    "derive_run_seed",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "save_config",
    "run_grid",
    "filter_records",
    "compare_topologies",
    "emit_csv",
    "parse_csv",
    "emit_pvalues_csv",
]

AUTO_TEST_BY_MODEL = {"linear": "fisher_z", "nonlinear": "mi_gaussian"}

DEFAULT_GROUP_KEYS = ("model", "n_nodes", "sigma", "algorithm")

RUNS_CSV_HEADER = (
    "topology",
    "gamma",
    "model",
    "n_nodes",
    "sigma",
    "sample_size",
    "algorithm",
    "rep",
    "run_seed",
    "sensitivity",
    "specificity",
    "tp",
    "fp",
    "fn",
    "tn",
    "max_in_degree",
    "n_ci_tests",
    "runtime_ms",
    "status",
)

PVALUES_CSV_HEADER = DEFAULT_GROUP_KEYS + (
    "topology_a",
    "topology_b",
    "n_a",
    "n_b",
    "statistic",
    "p_value",
    "method",
    "significant",
)


class ConfigError(ValueError):
    """Raised when an experiment configuration is malformed."""


@dataclass(frozen=True)
class TopologyRegime:
    """A labeled attachment regime of the grid: a name and its exponent."""

    label: str
    gamma: float

    def __post_init__(self) -> None:
        if not self.label:
            raise ConfigError("topology label must be non-empty")
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ConfigError(
                f"gamma must be finite and >= 0, got {self.gamma!r}"
            )
        object.__setattr__(self, "gamma", float(self.gamma))


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of an experiment grid.

    ``regenerate_dag_per_rep`` controls whether each repetition grows its
    own graph (rep index folded into the graph seed) or all repetitions of
    a cell share one graph.  ``timings`` opts into wall-clock runtimes in
    the output; it is off by default because timings break byte-for-byte
    reproducibility of the CSV artifact.  ``pair_budget`` bounds the CI
    tests any learner spends separating one node pair (see
    :class:`~bslbench.learners.LearnParams`); the default keeps grid
    runtime polynomial on hub-dominated topologies, and ``None`` restores
    the unbounded search.
    """

    master_seed: int = 0
    n_reps: int = 20
    sample_size: int = 1024
    node_counts: tuple = (48, 64)
    sigmas: tuple = (3.0, 6.0)
    topologies: tuple = (
        TopologyRegime("B", 0.25),
        TopologyRegime("L", 1.0),
        TopologyRegime("U", 1.25),
    )
    models: tuple = MODELS
    algorithms: tuple = ALGORITHMS
    alpha: float = 0.05
    eval_mode: str = "moral"
    regenerate_dag_per_rep: bool = True
    workers: int = 1
    timings: bool = False
    pair_budget: int | None = 5000

    def __post_init__(self) -> None:
        if self.master_seed < 0:
            raise ConfigError("master_seed must be >= 0")
        if self.n_reps < 1:
            raise ConfigError("n_reps must be >= 1")
        if self.sample_size < 8:
            raise ConfigError("sample_size must be >= 8")
        if not self.node_counts or any(n < 2 for n in self.node_counts):
            raise ConfigError("node_counts must be non-empty with entries >= 2")
        if not self.sigmas or any(s < 0 for s in self.sigmas):
            raise ConfigError("sigmas must be non-empty and nonnegative")
        if not self.topologies:
            raise ConfigError("at least one topology is required")
        labels = [t.label for t in self.topologies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate topology labels: {labels}")
        if not self.models or any(m not in MODELS for m in self.models):
            raise ConfigError(f"models must be a non-empty subset of {MODELS}")
        if not self.algorithms or any(a not in ALGORITHMS for a in self.algorithms):
            raise ConfigError(f"algorithms must be a non-empty subset of {ALGORITHMS}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must be in (0, 1)")
        if self.pair_budget is not None and self.pair_budget < 1:
            raise ConfigError("pair_budget must be >= 1 or null")
        try:
            object.__setattr__(self, "eval_mode", normalize_eval_mode(self.eval_mode))
        except ValueError:
            raise ConfigError(f"eval_mode must be one of {EVAL_MODES}") from None
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


_CONFIG_KEYS = {
    "master_seed",
    "n_reps",
    "sample_size",
    "node_counts",
    "sigmas",
    "gammas",
    "models",
    "algorithms",
    "alpha",
    "eval_mode",
    "regenerate_dag_per_rep",
    "workers",
    "timings",
    "pair_budget",
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a validated config from a JSON-style dictionary.

    Topologies are given under the key ``"gammas"`` as a label-to-exponent
    mapping whose insertion order is preserved.  Unknown keys are rejected.
    """
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict = {}
    for key in _CONFIG_KEYS - {"gammas", "node_counts", "sigmas", "models", "algorithms"}:
        if key in raw:
            kwargs[key] = raw[key]
    if "gammas" in raw:
        gammas = raw["gammas"]
        if not isinstance(gammas, dict):
            raise ConfigError("gammas must be an object mapping label -> exponent")
        kwargs["topologies"] = tuple(
            TopologyRegime(str(label), float(g)) for label, g in gammas.items()
        )
    for key in ("node_counts",):
        if key in raw:
            kwargs[key] = tuple(int(v) for v in raw[key])
    for key in ("sigmas",):
        if key in raw:
            kwargs[key] = tuple(float(v) for v in raw[key])
    for key in ("models", "algorithms"):
        if key in raw:
            kwargs[key] = tuple(str(v) for v in raw[key])
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(config: ExperimentConfig) -> dict:
    """Serialize a config back to its JSON-style dictionary form."""
    return {
        "master_seed": config.master_seed,
        "n_reps": config.n_reps,
        "sample_size": config.sample_size,
        "node_counts": list(config.node_counts),
        "sigmas": list(config.sigmas),
        "gammas": {t.label: t.gamma for t in config.topologies},
        "models": list(config.models),
        "algorithms": list(config.algorithms),
        "alpha": config.alpha,
        "eval_mode": config.eval_mode,
        "regenerate_dag_per_rep": config.regenerate_dag_per_rep,
        "workers": config.workers,
        "timings": config.timings,
        "pair_budget": config.pair_budget,
    }


def load_config(path: str | Path) -> ExperimentConfig:
    """Load and validate a JSON experiment config."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return config_from_dict(raw)


def save_config(path: str | Path, config: ExperimentConfig) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(config), indent=2) + "\n", encoding="utf-8"
    )


@dataclass(frozen=True)
class RunRecord:
    """One learner run on one simulated dataset.

    ``run_seed`` is the derived data seed of the repetition.  Metric fields
    are None (empty CSV cells) when the run failed or a denominator was
    empty; ``status`` is ``"ok"`` or ``"failed: <reason>"``.
    """

    topology: str
    gamma: float
    model: str
    n_nodes: int
    sigma: float
    sample_size: int
    algorithm: str
    rep: int
    run_seed: int
    sensitivity: float | None
    specificity: float | None
    tp: int | None
    fp: int | None
    fn: int | None
    tn: int | None
    max_in_degree: int | None
    n_ci_tests: int | None
    runtime_ms: float | None
    status: str


@dataclass(frozen=True)
class PairwiseComparison:
    """A per-group topology comparison of sensitivity distributions.

    ``group_keys`` names the record fields the comparison was grouped by
    and ``group`` holds the corresponding values, aligned index by index.
    """

    group_keys: tuple
    group: tuple
    topology_a: str
    topology_b: str
    n_a: int
    n_b: int
    statistic: float | None
    p_value: float | None
    method: str
    significant: bool | None

    def value(self, key: str):
        """Return the group value recorded under ``key``."""
        try:
            return self.group[self.group_keys.index(key)]
        except ValueError:
            raise KeyError(key) from None


def derive_run_seed(master_seed: int, fingerprint: str, rep_index: int = 0) -> int:
    """Hash a cell fingerprint and repetition index into a 64-bit run seed."""
    return derive_seed(master_seed, fingerprint, rep_index)


def _dag_seed(
    config: ExperimentConfig, topo: TopologyRegime, n_nodes: int, rep: int
) -> int:
    fingerprint = f"dag|{topo.label}|{topo.gamma}|{n_nodes}"
    return derive_run_seed(
        config.master_seed, fingerprint, rep if config.regenerate_dag_per_rep else 0
    )


def _data_seed(
    config: ExperimentConfig,
    topo: TopologyRegime,
    model: str,
    n_nodes: int,
    sigma: float,
    rep: int,
) -> int:
    fingerprint = (
        f"data|{topo.label}|{topo.gamma}|{model}|{n_nodes}|{sigma}|{config.sample_size}"
    )
    return derive_run_seed(config.master_seed, fingerprint, rep)


@dataclass(frozen=True)
class _CellTask:
    """Everything one worker needs to run all algorithms of one (cell, rep)."""

    topology: str
    gamma: float
    model: str
    n_nodes: int
    sigma: float
    sample_size: int
    algorithms: tuple
    alpha: float
    eval_mode: str
    rep: int
    dag_seed: int
    data_seed: int
    timings: bool
    pair_budget: int | None
    trace_dir: str | None


def _enumerate_tasks(
    config: ExperimentConfig, trace_dir: str | None = None
) -> Iterator[_CellTask]:
    for topo in config.topologies:
        for model in config.models:
            for n_nodes in config.node_counts:
                for sigma in config.sigmas:
                    for rep in range(config.n_reps):
                        yield _CellTask(
                            topology=topo.label,
                            gamma=topo.gamma,
                            model=model,
                            n_nodes=n_nodes,
                            sigma=sigma,
                            sample_size=config.sample_size,
                            algorithms=config.algorithms,
                            alpha=config.alpha,
                            eval_mode=config.eval_mode,
                            rep=rep,
                            dag_seed=_dag_seed(config, topo, n_nodes, rep),
                            data_seed=_data_seed(
                                config, topo, model, n_nodes, sigma, rep
                            ),
                            timings=config.timings,
                            pair_budget=config.pair_budget,
                            trace_dir=trace_dir,
                        )


def _failed_record(task: _CellTask, algorithm: str, exc: Exception) -> RunRecord:
    return RunRecord(
        topology=task.topology,
        gamma=task.gamma,
        model=task.model,
        n_nodes=task.n_nodes,
        sigma=task.sigma,
        sample_size=task.sample_size,
        algorithm=algorithm,
        rep=task.rep,
        run_seed=task.data_seed,
        sensitivity=None,
        specificity=None,
        tp=None,
        fp=None,
        fn=None,
        tn=None,
        max_in_degree=None,
        n_ci_tests=None,
        runtime_ms=None,
        status=f"failed: {type(exc).__name__}: {exc}",
    )


def _trace_path(trace_dir: str, task: _CellTask, algorithm: str) -> Path:
    name = (
        f"{task.topology}_{task.model}_n{task.n_nodes}_s{task.sigma:g}"
        f"_{algorithm}_rep{task.rep}.csv"
    )
    return Path(trace_dir) / name


def _execute_cell_task(task: _CellTask) -> list[RunRecord]:
    """Generate, simulate, and run every algorithm of one (cell, rep)."""
    try:
        dag = generate_pa_dag(TopologySpec(task.n_nodes, task.gamma, task.dag_seed))
        spec = SemSpec(task.model, task.sigma)
        data = simulate_dataset(dag, spec, task.sample_size, task.data_seed)
        test = CiTestKind(AUTO_TEST_BY_MODEL[task.model], task.alpha)
        tester = build_tester(data, test)
        max_in_degree = in_degree_histogram(dag).max_in_degree
    except Exception as exc:  # generation failure fails the whole cell rep
        return [_failed_record(task, alg, exc) for alg in task.algorithms]

    records: list[RunRecord] = []
    for algorithm in task.algorithms:
        trace_rows: list | None = [] if task.trace_dir else None
        if trace_rows is None:
            trace_fn = None
        else:
            def trace_fn(x, y, z, res, _rows=trace_rows):
                _rows.append((x, y, z, res))
        started = time.perf_counter()
        tests_before = tester.n_tests
        try:
            params = LearnParams(algorithm, test, pair_budget=task.pair_budget)
            pdag, _ = learn_structure(None, params, tester=tester, trace=trace_fn)
            counts = evaluate_run(dag, pdag, task.eval_mode)
            runtime_ms = (
                (time.perf_counter() - started) * 1000.0 if task.timings else None
            )
            records.append(
                RunRecord(
                    topology=task.topology,
                    gamma=task.gamma,
                    model=task.model,
                    n_nodes=task.n_nodes,
                    sigma=task.sigma,
                    sample_size=task.sample_size,
                    algorithm=algorithm,
                    rep=task.rep,
                    run_seed=task.data_seed,
                    sensitivity=sensitivity(counts),
                    specificity=specificity(counts),
                    tp=counts.tp,
                    fp=counts.fp,
                    fn=counts.fn,
                    tn=counts.tn,
                    max_in_degree=max_in_degree,
                    n_ci_tests=tester.n_tests - tests_before,
                    runtime_ms=runtime_ms,
                    status="ok",
                )
            )
        except Exception as exc:
            records.append(_failed_record(task, algorithm, exc))
        if trace_rows is not None:
            _write_trace(
                _trace_path(task.trace_dir, task, algorithm), trace_rows
            )
    return records


def _write_trace(path: Path, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ("x", "y", "z", "statistic", "p_value", "dof_or_n_eff", "independent", "note")
        )
        for x, y, z, res in rows:
            writer.writerow(
                (
                    x,
                    y,
                    " ".join(str(i) for i in z),
                    _format_float(res.statistic),
                    _format_float(res.p_value),
                    _format_float(res.dof_or_n_eff),
                    "true" if res.independent else "false",
                    res.note or "",
                )
            )


def _record_sort_key(record: RunRecord):
    return (
        record.topology,
        record.gamma,
        record.model,
        record.n_nodes,
        record.sigma,
        record.sample_size,
        record.algorithm,
        record.rep,
    )


def run_grid(
    config: ExperimentConfig,
    workers: int | None = None,
    trace_dir: str | Path | None = None,
) -> list[RunRecord]:
    """Execute the full grid and return records in deterministic sorted order.

    Per-run seeds are derived before any work is dispatched, so the records
    (and the CSV they serialize to) are identical for any worker count.
    Individual run failures are captured in the record's status rather
    than aborting the grid.
    """
    workers = config.workers if workers is None else workers
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    tasks = list(_enumerate_tasks(config, str(trace_dir) if trace_dir else None))
    if workers == 1:
        batches = [_execute_cell_task(task) for task in tasks]
    else:
        chunksize = max(1, len(tasks) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_execute_cell_task, tasks, chunksize=chunksize))
    records = [record for batch in batches for record in batch]
    records.sort(key=_record_sort_key)
    return records


def filter_records(records: Iterable[RunRecord], **field_values) -> list[RunRecord]:
    """Select records whose named fields equal the given values."""
    valid = {f.name for f in fields(RunRecord)}
    unknown = set(field_values) - valid
    if unknown:
        raise ValueError(f"unknown record fields: {sorted(unknown)}")
    out = []
    for record in records:
        if all(getattr(record, key) == val for key, val in field_values.items()):
            out.append(record)
    return out


def compare_topologies(
    records: Iterable[RunRecord],
    pair: tuple[str, str] = ("B", "U"),
    alpha: float = 0.05,
    group_keys: tuple = DEFAULT_GROUP_KEYS,
) -> list[PairwiseComparison]:
    """Rank-sum comparisons of sensitivity between two topology regimes.

    Records are grouped by the fields named in ``group_keys`` (by default
    model, n_nodes, sigma, and algorithm); failed runs and undefined
    sensitivities are dropped.  Groups missing observations on either side
    produce a row with method ``"missing"`` and no verdict.
    """
    label_a, label_b = pair
    if label_a == label_b:
        raise ValueError(f"pair labels must differ, got {pair!r}")
    group_keys = tuple(group_keys)
    valid = {f.name for f in fields(RunRecord)}
    if not group_keys or len(set(group_keys)) != len(group_keys):
        raise ValueError(f"group_keys must be non-empty and unique: {group_keys!r}")
    bad = [k for k in group_keys if k not in valid or k == "topology"]
    if bad:
        raise ValueError(f"invalid group keys: {bad}")
    groups: dict[tuple, dict[str, list[float]]] = {}
    for record in records:
        if record.status != "ok" or record.sensitivity is None:
            continue
        if record.topology not in (label_a, label_b):
            continue
        key = tuple(getattr(record, k) for k in group_keys)
        bucket = groups.setdefault(key, {label_a: [], label_b: []})
        bucket[record.topology].append(record.sensitivity)
    rows: list[PairwiseComparison] = []
    for key in sorted(groups):
        sample_a = groups[key][label_a]
        sample_b = groups[key][label_b]
        if not sample_a or not sample_b:
            rows.append(
                PairwiseComparison(
                    group_keys, key, label_a, label_b,
                    len(sample_a), len(sample_b), None, None, "missing", None,
                )
            )
            continue
        res = wilcoxon_rank_sum(sample_a, sample_b)
        rows.append(
            PairwiseComparison(
                group_keys, key, label_a, label_b,
                len(sample_a), len(sample_b),
                res.statistic, res.p_value, res.method, res.p_value < alpha,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# CSV artifacts
# ---------------------------------------------------------------------------


def _format_float(value: float | None) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


def _format_int(value: int | None) -> str:
    return "" if value is None else str(int(value))


def emit_csv(records: Iterable[RunRecord], path: str | Path) -> None:
    """Write run records to CSV with a pinned header and 17-digit floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RUNS_CSV_HEADER)
        for r in records:
            writer.writerow(
                (
                    r.topology,
                    _format_float(r.gamma),
                    r.model,
                    str(r.n_nodes),
                    _format_float(r.sigma),
                    str(r.sample_size),
                    r.algorithm,
                    str(r.rep),
                    str(r.run_seed),
                    _format_float(r.sensitivity),
                    _format_float(r.specificity),
                    _format_int(r.tp),
                    _format_int(r.fp),
                    _format_int(r.fn),
                    _format_int(r.tn),
                    _format_int(r.max_in_degree),
                    _format_int(r.n_ci_tests),
                    _format_float(r.runtime_ms),
                    r.status,
                )
            )


def _parse_float(text: str) -> float | None:
    return None if text == "" else float(text)


def _parse_int(text: str) -> int | None:
    return None if text == "" else int(text)


def parse_csv(path: str | Path) -> list[RunRecord]:
    """Read back a runs CSV produced by :func:`emit_csv`."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != RUNS_CSV_HEADER:
            raise ValueError(f"{path}: unexpected runs header: {header}")
        records = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(RUNS_CSV_HEADER):
                raise ValueError(f"{path}: ragged row: {row}")
            records.append(
                RunRecord(
                    topology=row[0],
                    gamma=float(row[1]),
                    model=row[2],
                    n_nodes=int(row[3]),
                    sigma=float(row[4]),
                    sample_size=int(row[5]),
                    algorithm=row[6],
                    rep=int(row[7]),
                    run_seed=int(row[8]),
                    sensitivity=_parse_float(row[9]),
                    specificity=_parse_float(row[10]),
                    tp=_parse_int(row[11]),
                    fp=_parse_int(row[12]),
                    fn=_parse_int(row[13]),
                    tn=_parse_int(row[14]),
                    max_in_degree=_parse_int(row[15]),
                    n_ci_tests=_parse_int(row[16]),
                    runtime_ms=_parse_float(row[17]),
                    status=row[18],
                )
            )
    return records


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _format_float(value)
    return str(value)


def emit_pvalues_csv(
    comparisons: Iterable[PairwiseComparison], path: str | Path
) -> None:
    """Write pairwise comparison rows to CSV (group keys, then statistics).

    All rows must share one set of group keys; with none to write, the
    default header is used.
    """
    comparisons = list(comparisons)
    group_keys = comparisons[0].group_keys if comparisons else DEFAULT_GROUP_KEYS
    if any(c.group_keys != group_keys for c in comparisons):
        raise ValueError("comparison rows disagree on group keys")
    header = tuple(group_keys) + PVALUES_CSV_HEADER[len(DEFAULT_GROUP_KEYS):]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for c in comparisons:
            writer.writerow(
                tuple(_format_cell(v) for v in c.group)
                + (
                    c.topology_a,
                    c.topology_b,
                    str(c.n_a),
                    str(c.n_b),
                    _format_float(c.statistic),
                    _format_float(c.p_value),
                    c.method,
                    _format_cell(c.significant),
                )
            )
