"""Command-line pipeline: ingest | embed | train-scorer | score | cluster |
select | eval | cost | bench.

Stages communicate through files so any artifact can be swapped for an
externally produced one.  Every output gets a sidecar run manifest with the
parameters, seed, and content hashes of its inputs; downstream stages refuse
artifacts whose manifests disagree about the source corpus.  Options can
come from a JSON config file (``--config``); explicit flags win.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 remote
service failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from car import __version__, benchgen, costing, plots
from car.cluster import (
    ClusterAssignment,
    default_k,
    kmeans,
    load_assignment_csv,
    save_assignment_csv,
    save_centroids,
)
from car.dataset import dedupe_pairs, load_dataset, write_dataset
from car.embedding import EmbedderSpec, embed_corpus, hash_embed, load_embeddings, save_embeddings
from car.errors import CarError, RemoteServiceError, ValidationError
from car.evaluation import (
    MockJudge,
    RemoteJudge,
    load_eval_samples,
    run_eval,
    save_sample_log_csv,
    save_summary_json,
)
from car.manifest import (
    check_same_corpus,
    corpus_hash_of,
    sha256_file,
    write_manifest,
)
from car.pca import fit_pca, pca_transform, save_pca
from car.scorer import (
    TrainConfig,
    curate_preferences,
    eval_pref_accuracy,
    load_preferences_json,
    load_scorer,
    load_scores_csv,
    save_preferences_json,
    save_scorer,
    save_scores_csv,
    score_pairs,
    split_811,
    train_scorer,
)
from car.selection import (
    SelectionConfig,
    car_select,
    save_selection_csv,
    selection_report,
)

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class _Options:
    """Flag values backed by a config file: flag > config[command] > config
    top level > hard default."""

    def __init__(self, args: argparse.Namespace, command: str):
        self._args = vars(args)
        self._command = command
        config_path = self._args.get("config")
        self._config = {}
        if config_path:
            try:
                self._config = json.loads(Path(config_path).read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{config_path}: malformed config: {exc}") from exc
            if not isinstance(self._config, dict):
                raise ValidationError(f"{config_path}: config must be a JSON object")

    def get(self, key: str, default=None):
        value = self._args.get(key)
        if value is not None:
            return value
        section = self._config.get(self._command, {})
        if isinstance(section, dict) and key in section:
            return section[key]
        if key in self._config and not isinstance(self._config[key], dict):
            return self._config[key]
        return default

    def require(self, key: str, flag: str):
        value = self.get(key)
        if value is None:
            raise ValidationError(f"missing required option {flag} (or config key {key!r})")
        return value


def _require_inputs(*paths: str | Path) -> None:
    missing = [str(p) for p in paths if not Path(p).exists()]
    if missing:
        raise ValidationError(f"input paths do not exist: {', '.join(missing)}")


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise ValidationError(f"expected a comma-separated integer list, got {text!r}") from exc


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise ValidationError(f"expected a comma-separated number list, got {text!r}") from exc


# --- subcommands -----------------------------------------------------------

def cmd_ingest(opts: _Options) -> int:
    source = opts.require("input", "--input")
    out = opts.require("out", "--out")
    _require_inputs(source)
    dataset = load_dataset(source)
    write_dataset(dataset, range(len(dataset)), out)
    write_manifest(
        out,
        stage="ingest",
        params={"format": "alpaca-json"},
        inputs={"raw": source},
        corpus_sha256=sha256_file(out),
    )
    print(f"ingested {len(dataset)} pairs -> {out}")
    return 0


def _embedder_spec(opts: _Options) -> EmbedderSpec:
    return EmbedderSpec(
        backend=opts.get("backend", "hash"),
        dim=int(opts.get("dim", 384)),
        seed=int(opts.get("seed", 0)),
        path=str(opts.get("file", "")),
        endpoint=str(opts.get("endpoint", "")),
        instruction_only=bool(opts.get("instruction_only", False)),
        batch_size=int(opts.get("batch_size", 64)),
        timeout=float(opts.get("timeout", 30.0)),
        retries=int(opts.get("retries", 2)),
        concurrency=int(opts.get("concurrency", 4)),
    )


def cmd_embed(opts: _Options) -> int:
    dataset_path = opts.require("dataset", "--dataset")
    out = opts.require("out", "--out")
    _require_inputs(dataset_path)
    spec = _embedder_spec(opts)
    if spec.backend == "file":
        _require_inputs(spec.path)
    dataset = load_dataset(dataset_path)
    matrix = embed_corpus(dataset, spec)
    save_embeddings(matrix, out)
    inputs = {"dataset": dataset_path}
    if spec.backend == "file":
        inputs["vectors"] = spec.path
    write_manifest(
        out,
        stage="embed",
        params={
            "backend": spec.backend,
            "dim": spec.dim,
            "seed": spec.seed,
            "instruction_only": spec.instruction_only,
        },
        inputs=inputs,
        corpus_sha256=sha256_file(dataset_path),
        seed=spec.seed,
    )
    print(f"embedded {matrix.n} pairs at d={matrix.d} -> {out}")
    return 0


def cmd_train_scorer(opts: _Options) -> int:
    out = opts.require("out", "--out")
    preferences_path = opts.get("preferences")
    if preferences_path:
        _require_inputs(preferences_path)
        examples = load_preferences_json(preferences_path)
        inputs = {"preferences": preferences_path}
        curation_params = {"source": "preferences"}
    else:
        originals_path = opts.require("originals", "--originals")
        revised_path = opts.require("revised", "--revised")
        min_edit = opts.get("min_edit")
        if min_edit is None:
            raise ValidationError(
                "--min-edit is required when curating from originals/revised "
                "(no privileged default exists)"
            )
        _require_inputs(originals_path, revised_path)
        examples = curate_preferences(
            load_dataset(originals_path), load_dataset(revised_path), int(min_edit)
        )
        inputs = {"originals": originals_path, "revised": revised_path}
        curation_params = {"source": "curated", "min_edit": int(min_edit)}
    if not examples:
        raise ValidationError("curation produced zero preference examples")

    save_prefs = opts.get("save_preferences")
    if save_prefs:
        save_preferences_json(examples, save_prefs)

    embed_dim = int(opts.get("embed_dim", 384))
    embed_seed = int(opts.get("embed_seed", 0))
    config = TrainConfig(
        epochs=int(opts.get("epochs", 200)),
        eta=float(opts.get("eta", 0.1)),
        lam=float(opts.get("lam", 1e-4)),
        seed=int(opts.get("seed", 0)),
    )
    embed_fn = lambda text: hash_embed(text, embed_dim, embed_seed)  # noqa: E731

    do_split = bool(opts.get("split", True))
    if do_split:
        splits = split_811(examples, seed=config.seed)
        model = train_scorer(splits["train"], embed_fn, config)
        val_acc = eval_pref_accuracy(model, splits["val"], embed_fn)
        test_acc = eval_pref_accuracy(model, splits["test"], embed_fn)
        print(
            f"trained on {len(splits['train'])} examples; "
            f"val acc {val_acc:.3f}, test acc {test_acc:.3f}"
        )
        split_sizes = {name: len(part) for name, part in splits.items()}
    else:
        model = train_scorer(examples, embed_fn, config)
        train_acc = eval_pref_accuracy(model, examples, embed_fn)
        print(f"trained on all {len(examples)} examples; train acc {train_acc:.3f}")
        split_sizes = {"train": len(examples), "val": 0, "test": 0}

    save_scorer(model, out)
    write_manifest(
        out,
        stage="train-scorer",
        params={
            **curation_params,
            "embed_dim": embed_dim,
            "embed_seed": embed_seed,
            "epochs": config.epochs,
            "eta": config.eta,
            "lambda": config.lam,
            "seed": config.seed,
            "split": do_split,
            "split_sizes": split_sizes,
            "n_examples": len(examples),
        },
        inputs=inputs,
        seed=config.seed,
    )
    print(f"scorer ({model.d} weights) -> {out}")
    return 0


def cmd_score(opts: _Options) -> int:
    model_path = opts.require("model", "--model")
    embeddings_path = opts.require("embeddings", "--embeddings")
    out = opts.require("out", "--out")
    _require_inputs(model_path, embeddings_path)
    model = load_scorer(model_path)
    matrix = load_embeddings(embeddings_path)
    scores = score_pairs(model, matrix)
    save_scores_csv(scores, out)
    write_manifest(
        out,
        stage="score",
        params={"d": model.d, "train_meta": model.train_meta},
        inputs={"model": model_path, "embeddings": embeddings_path},
        corpus_sha256=corpus_hash_of(embeddings_path),
    )
    print(f"scored {len(scores)} pairs -> {out}")
    return 0


def cmd_cluster(opts: _Options) -> int:
    embeddings_path = opts.require("embeddings", "--embeddings")
    labels_out = opts.require("labels_out", "--labels-out")
    centroids_out = opts.get("centroids_out")
    pca_out = opts.get("pca_out")
    _require_inputs(embeddings_path)

    matrix = load_embeddings(embeddings_path)
    pca_target = float(opts.get("pca_target", 0.95))
    seed = int(opts.get("seed", 0))
    model = fit_pca(matrix, pca_target)
    reduced = pca_transform(model, matrix)
    k = opts.get("k")
    k = int(k) if k is not None else default_k(matrix.n)
    assignment = kmeans(
        reduced,
        k,
        seed=seed,
        max_iter=int(opts.get("max_iter", 300)),
        tol=float(opts.get("tol", 1e-6)),
        restarts=int(opts.get("restarts", 1)),
    )
    save_assignment_csv(assignment, labels_out)
    params = {
        "pca_target": pca_target,
        "pca_m": model.m,
        "explained_ratio": model.explained_ratio,
        "k": k,
        "seed": seed,
        "rng": assignment.rng_name,
        "max_iter": int(opts.get("max_iter", 300)),
        "tol": float(opts.get("tol", 1e-6)),
        "restarts": int(opts.get("restarts", 1)),
        "inertia": assignment.inertia,
        "iterations": assignment.iterations,
    }
    corpus = corpus_hash_of(embeddings_path)
    write_manifest(
        labels_out,
        stage="cluster",
        params=params,
        inputs={"embeddings": embeddings_path},
        corpus_sha256=corpus,
        seed=seed,
    )
    if centroids_out:
        save_centroids(assignment.centroids, centroids_out)
        write_manifest(
            centroids_out,
            stage="cluster",
            params=params,
            inputs={"embeddings": embeddings_path},
            corpus_sha256=corpus,
            seed=seed,
        )
    if pca_out:
        save_pca(model, pca_out)
    print(
        f"clustered {matrix.n} pairs into k={k} "
        f"(pca {matrix.d}->{model.m} @ {model.explained_ratio:.4f}, "
        f"inertia {assignment.inertia:.4f}) -> {labels_out}"
    )
    return 0


def cmd_select(opts: _Options) -> int:
    dataset_path = opts.require("dataset", "--dataset")
    scores_path = opts.require("scores", "--scores")
    clusters_path = opts.require("clusters", "--clusters")
    out = opts.require("out", "--out")
    selection_csv = opts.get("selection_csv", str(Path(out).with_suffix(".csv")))
    report_out = opts.get("report_out", str(Path(out).with_suffix(".report.json")))
    _require_inputs(dataset_path, scores_path, clusters_path)

    corpus = sha256_file(dataset_path)
    check_same_corpus(corpus, {"scores": scores_path, "clusters": clusters_path})

    dataset = load_dataset(dataset_path)
    scores = load_scores_csv(scores_path)
    labels = load_assignment_csv(clusters_path)
    if len(labels) != len(dataset) or len(scores) != len(dataset):
        raise ValidationError(
            f"sizes disagree: dataset {len(dataset)}, scores {len(scores)}, "
            f"clusters {len(labels)}"
        )
    k = int(labels.max()) + 1
    centroids = np.zeros((k, 1))  # selection never reads centroid geometry
    assignment = ClusterAssignment(
        labels=labels, centroids=centroids, inertia=0.0, iterations=0
    )
    config = SelectionConfig(
        n1=int(opts.get("n1", 1000)), n2=int(opts.get("n2", 1))
    )
    result = car_select(scores, assignment, config)
    final_ids = dedupe_pairs(result.selected_ids, dataset)
    dropped = len(result.selected_ids) - len(final_ids)
    if dropped:
        logger.info("dropped %d exact content duplicates", dropped)
        result = replace(result, selected_ids=final_ids)

    write_dataset(dataset, result.selected_ids, out)
    save_selection_csv(result, scores, assignment, selection_csv)
    report = selection_report(result, scores, assignment)
    finite = lambda x: x if np.isfinite(x) else None  # noqa: E731
    report_record = {
        "subset_size": report.subset_size,
        "corpus_size": report.corpus_size,
        "percent_of_corpus": report.percent_of_corpus,
        "cluster_coverage": report.cluster_coverage,
        "mean_selected_score": finite(report.mean_selected_score),
        "min_selected_score": finite(report.min_selected_score),
        "overlap_count": result.overlap_count,
        "content_duplicates_dropped": dropped,
        "n1": config.n1,
        "n2": config.n2,
        "k": k,
    }
    Path(report_out).write_text(
        json.dumps(report_record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    params = {"n1": config.n1, "n2": config.n2, "k": k}
    inputs = {
        "dataset": dataset_path,
        "scores": scores_path,
        "clusters": clusters_path,
    }
    for artifact in (out, selection_csv):
        write_manifest(
            artifact, stage="select", params=params, inputs=inputs, corpus_sha256=corpus
        )

    if bool(opts.get("figures", True)):
        score_map = dict(scores)
        plots.plot_selection(
            [s for _, s in scores],
            [score_map[pid] for pid in result.selected_ids],
            [
                sum(1 for pid in result.selected_ids if labels[pid] == c)
                for c in range(k)
            ],
            plots.figure_path_for(selection_csv),
        )
    print(
        f"selected {report.subset_size} of {report.corpus_size} pairs "
        f"({report.percent_of_corpus:.2f}%, coverage {report.cluster_coverage:.0%}) "
        f"-> {out}"
    )
    return 0


def _judge_from_spec(spec: str, reply_format: str, timeout: float, retries: int):
    if spec.startswith("mock:"):
        rule = spec[len("mock:") :]
        if rule.startswith("table="):
            table_path = rule[len("table=") :]
            _require_inputs(table_path)
            raw = json.loads(Path(table_path).read_text(encoding="utf-8"))
            if not isinstance(raw, dict):
                raise ValidationError(f"{table_path}: verdict table must be an object")
            return MockJudge(rule="table", reply_format=reply_format, table=raw)
        return MockJudge(rule=rule, reply_format=reply_format)
    if spec.startswith("http://") or spec.startswith("https://"):
        return RemoteJudge(spec, timeout=timeout, retries=retries)
    raise ValidationError(
        f"judge must be mock:longer, mock:position-first, mock:table=FILE, "
        f"or an http(s) endpoint; got {spec!r}"
    )


def cmd_eval(opts: _Options) -> int:
    input_path = opts.require("input", "--input")
    log_out = opts.require("log_out", "--log-out")
    summary_out = opts.get("summary_out", str(Path(log_out).with_suffix(".summary.json")))
    _require_inputs(input_path)
    reply_format = opts.get("reply_format", "scores")
    judge = _judge_from_spec(
        str(opts.require("judge", "--judge")),
        reply_format,
        timeout=float(opts.get("timeout", 30.0)),
        retries=int(opts.get("retries", 2)),
    )
    samples = load_eval_samples(input_path)
    result = run_eval(
        samples,
        judge,
        reply_format=reply_format,
        concurrency=int(opts.get("concurrency", 1)),
    )
    save_sample_log_csv(result.samples, log_out)
    save_summary_json(result, summary_out)
    write_manifest(
        log_out,
        stage="eval",
        params={
            "judge": str(opts.get("judge")),
            "reply_format": reply_format,
            "n_samples": len(samples),
        },
        inputs={"test_set": input_path},
        corpus_sha256=sha256_file(input_path),
    )
    if bool(opts.get("figures", True)):
        plots.plot_eval(result, plots.figure_path_for(log_out))
    report = result.report
    print(
        f"n={report.n_all} win={report.n_win} tie={report.n_tie} "
        f"lose={report.n_lose} skipped={result.n_skipped} | "
        f"WS={report.ws:.3f} WR={100 * report.wr:.1f}% QS={100 * report.qs:.1f}%"
    )
    return 0


def cmd_cost(opts: _Options) -> int:
    cfg = costing.CostConfig(
        api_price_per_1k_tokens=float(opts.get("api_price", 0.0)),
        avg_tokens_per_pair=float(opts.get("avg_tokens", 0.0)),
        gpu_hour_rate=float(opts.get("gpu_hour_rate", 0.0)),
        full_train_hours=float(opts.get("full_train_hours", 0.0)),
        local_selection_hours=float(opts.get("local_selection_hours", 0.0)),
    )
    table = costing.cost_table(
        n_pairs=int(opts.get("n_pairs", 0)),
        mode=str(opts.get("mode", "local")),
        subset_fraction=float(opts.get("fraction", 1.0)),
        cfg=cfg,
    )
    sys.stdout.write(costing.format_cost_text(table))
    csv_out = opts.get("csv_out")
    if csv_out:
        costing.save_cost_csv(table, csv_out)
        if bool(opts.get("figures", True)):
            plots.plot_cost(table, plots.figure_path_for(csv_out))
    return 0


def cmd_bench(opts: _Options) -> int:
    mode = str(opts.get("mode", "sweep-n2"))
    out = opts.require("out", "--out")
    shifts_raw = opts.get("quality_shifts")
    world = benchgen.gen_blobs(
        k=int(opts.get("k", 5)),
        per_cluster_n=int(opts.get("per_cluster_n", 100)),
        dim=int(opts.get("dim", 16)),
        sep=float(opts.get("sep", 10.0)),
        seed=int(opts.get("seed", 0)),
        quality_shift_scale=float(opts.get("quality_shift_scale", 1.0)),
        quality_noise=float(opts.get("quality_noise", 1.0)),
        quality_shifts=(
            _parse_float_list(shifts_raw) if shifts_raw is not None else None
        ),
    )
    params = {
        "mode": mode,
        "k": world.k,
        "per_cluster_n": int(opts.get("per_cluster_n", 100)),
        "dim": int(opts.get("dim", 16)),
        "sep": float(opts.get("sep", 10.0)),
        "seed": world.seed,
    }
    n1 = int(opts.get("n1", 50))
    n2 = int(opts.get("n2", 1))
    if mode == "sweep-n1":
        grid = _parse_int_list(opts.require("grid", "--grid"))
        rows = benchgen.sweep_n1(world, grid, n2=int(opts.get("n2", 0)))
        benchgen.save_sweep_csv(rows, out)
        if bool(opts.get("figures", True)):
            plots.plot_sweep(rows, "n1", plots.figure_path_for(out))
        params.update({"grid": grid, "n2": int(opts.get("n2", 0))})
    elif mode == "sweep-n2":
        grid = _parse_int_list(opts.require("grid", "--grid"))
        rows = benchgen.sweep_n2(world, n1, grid)
        benchgen.save_sweep_csv(rows, out)
        if bool(opts.get("figures", True)):
            plots.plot_sweep(rows, "n2", plots.figure_path_for(out))
        params.update({"grid": grid, "n1": n1})
    elif mode == "rescue":
        rows = benchgen.rescue_comparison(world, n1=n1, n2=n2)
        benchgen.save_rescue_csv(rows, out)
        if bool(opts.get("figures", True)):
            plots.plot_rescue(rows, plots.figure_path_for(out))
        params.update({"n1": n1, "n2": n2})
    else:
        raise ValidationError(
            f"bench mode must be sweep-n1, sweep-n2, or rescue; got {mode!r}"
        )
    write_manifest(
        out, stage="bench", params=params, inputs={}, seed=world.seed
    )
    print(f"bench {mode} ({len(rows)} rows) -> {out}")
    return 0


# --- argument wiring --------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="car", description=__doc__)
    parser.add_argument("--version", action="version", version=f"car {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    p = add("ingest", "validate a dataset file and write the canonical corpus")
    p.add_argument("--input")
    p.add_argument("--out")

    p = add("embed", "embed every pair into an EMB1 matrix")
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.add_argument("--backend", choices=["hash", "file", "remote"])
    p.add_argument("--dim", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--instruction-only", action="store_const", const=True, default=None)
    p.add_argument("--file", help="EMB1 file for the file backend")
    p.add_argument("--endpoint", help="URL for the remote backend")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int)
    p.add_argument("--concurrency", type=int)

    p = add("train-scorer", "curate preference pairs and fit the quality scorer")
    p.add_argument("--originals")
    p.add_argument("--revised")
    p.add_argument("--min-edit", type=int)
    p.add_argument("--preferences", help="pre-curated preference JSON instead")
    p.add_argument("--save-preferences")
    p.add_argument("--out")
    p.add_argument("--embed-dim", type=int)
    p.add_argument("--embed-seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-split", dest="split", action="store_const", const=False, default=None)

    p = add("score", "score every pair with a trained model")
    p.add_argument("--model")
    p.add_argument("--embeddings")
    p.add_argument("--out")

    p = add("cluster", "PCA-reduce embeddings and run seeded k-means")
    p.add_argument("--embeddings")
    p.add_argument("--labels-out")
    p.add_argument("--centroids-out")
    p.add_argument("--pca-out")
    p.add_argument("--pca-target", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--restarts", type=int)

    p = add("select", "rank, union per-cluster tops, dedupe, write the subset")
    p.add_argument("--dataset")
    p.add_argument("--scores")
    p.add_argument("--clusters")
    p.add_argument("--out")
    p.add_argument("--selection-csv")
    p.add_argument("--report-out")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--no-figures", dest="figures", action="store_const", const=False, default=None)

    p = add("eval", "judge candidate vs baseline responses with order swapping")
    p.add_argument("--input")
    p.add_argument("--judge", help="mock:longer | mock:position-first | mock:table=FILE | URL")
    p.add_argument("--reply-format", choices=["scores", "bracket"])
    p.add_argument("--log-out")
    p.add_argument("--summary-out")
    p.add_argument("--concurrency", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int)
    p.add_argument("--no-figures", dest="figures", action="store_const", const=False, default=None)

    p = add("cost", "estimate selection + training cost")
    p.add_argument("--mode", choices=["api", "local"])
    p.add_argument("--n-pairs", type=int)
    p.add_argument("--fraction", type=float)
    p.add_argument("--api-price", type=float, help="$ per 1k tokens")
    p.add_argument("--avg-tokens", type=float, help="tokens per pair")
    p.add_argument("--gpu-hour-rate", type=float)
    p.add_argument("--full-train-hours", type=float)
    p.add_argument("--local-selection-hours", type=float)
    p.add_argument("--csv-out")
    p.add_argument("--no-figures", dest="figures", action="store_const", const=False, default=None)

    p = add("bench", "synthetic worlds: n1/n2 sweeps and the coverage-rescue check")
    p.add_argument("--mode", choices=["sweep-n1", "sweep-n2", "rescue"])
    p.add_argument("--out")
    p.add_argument("--grid", help="comma-separated budgets to sweep")
    p.add_argument("--k", type=int)
    p.add_argument("--per-cluster-n", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--sep", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--quality-shift-scale", type=float)
    p.add_argument("--quality-noise", type=float)
    p.add_argument("--quality-shifts", help="comma-separated per-cluster shifts")
    p.add_argument("--no-figures", dest="figures", action="store_const", const=False, default=None)

    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "embed": cmd_embed,
    "train-scorer": cmd_train_scorer,
    "score": cmd_score,
    "cluster": cmd_cluster,
    "select": cmd_select,
    "eval": cmd_eval,
    "cost": cmd_cost,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        opts = _Options(args, args.command)
        return _COMMANDS[args.command](opts)
    except RemoteServiceError as exc:
        print(f"car {args.command}: remote service failure: {exc}", file=sys.stderr)
        return 3
    except (CarError, OSError) as exc:
        print(f"car {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
