"""Command-line pipeline: fit-labels, eval, report, vocab, and score.

A single YAML config drives every stage; flags override config fields and
the LABELFORGE_ENDPOINT environment variable overrides the endpoint. Each
run owns a directory tree (caches/, labelsets/, results/, report/) plus a
manifest tying outputs to the config hash and fingerprints.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from . import data
from .cache import CacheError, build_logit_matrix, cache_path, load_cache, save_cache
from .icl import SweepError, read_records, run_sweep, write_sweep_manifest
from .optimize import export_fit_result, load_fit_export, optimize_labels
from .prompts import DEFAULT_TEMPLATE, PromptTemplate
from .providers import (
    DEFAULT_BOUNDARY_MARKER,
    ENDPOINT_ENV_VAR,
    HttpProvider,
    ProviderError,
    SyntheticConfig,
    fetch_vocabulary,
    make_synthetic_provider,
)
from .report import ReportError, export_report
from .stats import StatsError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROVIDER = 3
EXIT_INCOMPLETE = 4


class ConfigError(ValueError):
    """Invalid or missing configuration."""


@dataclass(frozen=True)
class RunConfig:
    dataset_path: str
    output_dir: str
    k_list: tuple[int, ...]
    n_list: tuple[int, ...]
    runs: int
    restarts: int
    max_iterations: int
    seed_split: int
    seed_labeling: int
    seed_optimizer: int
    seed_sweep: int
    template: PromptTemplate
    boundary_marker: str
    provider_kind: str
    endpoint: str | None
    timeout: float
    synthetic: dict | None
    dataset_format: str | None
    keep_classes: tuple[int, ...] | None
    fractions: tuple[float, float, float]
    n_boot: int
    window: int
    config_hash: str


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    _require(isinstance(raw, dict), f"{path}: config must be a mapping")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value

    _require("dataset" in raw, "config needs a 'dataset' path")
    _require("output_dir" in raw, "config needs an 'output_dir'")

    k_list = tuple(raw.get("k_list", []))
    n_list = tuple(raw.get("n_list", []))
    _require(len(k_list) > 0 and list(k_list) == sorted(k_list), "k_list must be non-empty and sorted")
    _require(len(n_list) > 0 and list(n_list) == sorted(n_list), "n_list must be non-empty and sorted")

    seeds = dict(raw.get("seeds") or {})
    seed_defaults = {"split": 0, "labeling": 1, "optimizer": 2, "sweep": 3}
    for name in seed_defaults:
        seeds.setdefault(name, seed_defaults[name])
        _require(isinstance(seeds[name], int), f"seeds.{name} must be an integer")

    tpl_cfg = raw.get("template") or {}
    try:
        template = PromptTemplate(
            demo_pattern=tpl_cfg.get("demo_pattern", DEFAULT_TEMPLATE.demo_pattern),
            query_pattern=tpl_cfg.get("query_pattern", DEFAULT_TEMPLATE.query_pattern),
            separator=tpl_cfg.get("separator", DEFAULT_TEMPLATE.separator),
        )
    except ValueError as e:
        raise ConfigError(f"invalid template: {e}") from e

    provider_cfg = dict(raw.get("provider") or {})
    kind = provider_cfg.get("kind", "synthetic")
    _require(kind in ("synthetic", "http"), f"provider.kind must be synthetic or http, got {kind!r}")
    synthetic = provider_cfg.get("synthetic")
    if kind == "synthetic":
        _require(isinstance(synthetic, dict), "synthetic provider needs a provider.synthetic block")

    split_cfg = raw.get("split") or {}
    fractions = tuple(split_cfg.get("fractions", (0.25, 0.25, 0.5)))
    report_cfg = raw.get("report") or {}

    hash_payload = {k: v for k, v in raw.items() if k != "output_dir"}
    config_hash = hashlib.sha256(
        json.dumps(hash_payload, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()

    return RunConfig(
        dataset_path=str(raw["dataset"]),
        output_dir=str(raw["output_dir"]),
        k_list=k_list,
        n_list=n_list,
        runs=int(raw.get("runs", 10)),
        restarts=int(raw.get("restarts", 10)),
        max_iterations=int(raw.get("max_iterations", 100)),
        seed_split=seeds["split"],
        seed_labeling=seeds["labeling"],
        seed_optimizer=seeds["optimizer"],
        seed_sweep=seeds["sweep"],
        template=template,
        boundary_marker=str(raw.get("boundary_marker", DEFAULT_BOUNDARY_MARKER)),
        provider_kind=kind,
        endpoint=provider_cfg.get("endpoint"),
        timeout=float(provider_cfg.get("timeout", 120.0)),
        synthetic=synthetic,
        dataset_format=raw.get("format"),
        keep_classes=tuple(raw["keep_classes"]) if raw.get("keep_classes") else None,
        fractions=fractions,
        n_boot=int(report_cfg.get("n_boot", 1000)),
        window=int(report_cfg.get("window", 10)),
        config_hash=config_hash,
    )


@dataclass
class RunContext:
    config: RunConfig
    dataset: data.Dataset
    provider: object
    vocab: object
    run_dir: Path

    @property
    def caches_dir(self) -> Path:
        return self.run_dir / "caches"

    @property
    def labelsets_dir(self) -> Path:
        return self.run_dir / "labelsets"

    @property
    def results_dir(self) -> Path:
        return self.run_dir / "results"

    @property
    def report_dir(self) -> Path:
        return self.run_dir / "report"


def build_context(cfg: RunConfig) -> RunContext:
    try:
        ds = data.load_dataset(cfg.dataset_path, cfg.dataset_format)
        if cfg.keep_classes:
            ds = data.subset_classes(ds, cfg.keep_classes)
        ds = data.split_dataset(ds, data.SplitSpec(fractions=cfg.fractions, seed=cfg.seed_split))
    except (OSError, data.DatasetError) as e:
        raise ConfigError(f"dataset problem: {e}") from e

    if cfg.provider_kind == "synthetic":
        syn = dict(cfg.synthetic)
        try:
            syn_cfg = SyntheticConfig(
                num_classes=ds.num_classes,
                vocab_size=int(syn["vocab_size"]),
                planted_gold=tuple(syn["planted_gold"]),
                signal_strength=float(syn.get("signal_strength", 1.0)),
                noise_scale=float(syn.get("noise_scale", 0.0)),
                seed=int(syn.get("seed", 0)),
            )
        except (KeyError, ValueError) as e:
            raise ConfigError(f"invalid provider.synthetic block: {e}") from e
        class_of = {s.text: s.class_id for s in ds.sentences}
        provider = make_synthetic_provider(syn_cfg, class_of)
    else:
        endpoint = os.environ.get(ENDPOINT_ENV_VAR) or cfg.endpoint
        _require(bool(endpoint), f"http provider needs an endpoint (config or {ENDPOINT_ENV_VAR})")
        provider = HttpProvider(base_url=endpoint, timeout=cfg.timeout)

    vocab = fetch_vocabulary(provider, cfg.boundary_marker)
    run_dir = Path(cfg.output_dir)
    ctx = RunContext(config=cfg, dataset=ds, provider=provider, vocab=vocab, run_dir=run_dir)
    for d in (ctx.caches_dir, ctx.labelsets_dir, ctx.results_dir, ctx.report_dir):
        d.mkdir(parents=True, exist_ok=True)
    _write_run_manifest(ctx)
    return ctx


def _write_run_manifest(ctx: RunContext) -> None:
    manifest = {
        "config_hash": ctx.config.config_hash,
        "model_id": ctx.provider.capabilities().model_id,
        "vocab_fingerprint": ctx.vocab.provider_fingerprint,
        "template_fingerprint": ctx.config.template.fingerprint,
    }
    (ctx.run_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def label_set_id_for(k: int) -> str:
    return f"K{k:03d}"


def cmd_fit_labels(ctx: RunContext) -> list[dict]:
    """Fit one label set per K: sample the labeling examples, build or load
    the logit cache, hill-climb with restarts, and export the result."""
    cfg = ctx.config
    rows = []
    previous_ids = None
    for k in cfg.k_list:
        sample = data.sample_labeling(ctx.dataset, k, cfg.seed_labeling)
        classes = [s.class_id for s in sample]
        cpath = cache_path(ctx.caches_dir, ctx.vocab.provider_fingerprint,
                           cfg.template.fingerprint, k)
        matrix = None
        if cpath.exists():
            matrix = load_cache(cpath, vocab=ctx.vocab, template=cfg.template)
            if matrix.sentence_index != tuple(s.text for s in sample):
                matrix = None  # stale sample; rebuild below
        if matrix is None:
            matrix = build_logit_matrix(ctx.provider, sample, cfg.template, ctx.vocab)
            save_cache(matrix, cpath)
        result = optimize_labels(
            matrix, classes, restarts=cfg.restarts, seed=cfg.seed_optimizer,
            max_iterations=cfg.max_iterations, num_classes=ctx.dataset.num_classes,
        )
        out_path = ctx.labelsets_dir / f"{label_set_id_for(k)}.json"
        payload = export_fit_result(result, ctx.vocab, k, out_path)
        duplicate = previous_ids == tuple(payload["token_ids"])
        previous_ids = tuple(payload["token_ids"])
        rows.append({"K": k, "labels": payload["labels"],
                     "objective": payload["objective"], "duplicate_of_previous": duplicate})

    print(f"{'K':>5}  {'objective':>12}  labels")
    for row in rows:
        dup = "  (= previous K)" if row["duplicate_of_previous"] else ""
        print(f"{row['K']:>5}  {row['objective']:>12.4f}  {', '.join(row['labels'])}{dup}")
    return rows


def _load_label_sets(ctx: RunContext) -> list[tuple[str, int, object]]:
    files = sorted(ctx.labelsets_dir.glob("K*.json"))
    _require(bool(files), f"no label-set files in {ctx.labelsets_dir}; run fit-labels first")
    label_sets = []
    for path in files:
        assignment, payload = load_fit_export(path, ctx.vocab)
        label_sets.append((path.stem, int(payload["K"]), assignment))
    label_sets.sort(key=lambda t: t[1])
    return label_sets


def cmd_eval(ctx: RunContext) -> list:
    """Run the N-shot sweep over every fitted label set, streaming records
    to results/records.jsonl (resumable)."""
    cfg = ctx.config
    label_sets = _load_label_sets(ctx)
    demo_split = ctx.dataset.sentences_in(data.DEMO)
    test_split = ctx.dataset.sentences_in(data.TEST)
    records = run_sweep(
        ctx.provider, label_sets, demo_split, test_split, list(cfg.n_list),
        cfg.runs, cfg.seed_sweep, cfg.template, ctx.vocab,
        results_path=ctx.results_dir / "records.jsonl",
    )
    write_sweep_manifest(
        ctx.results_dir / "manifest.json", cfg.seed_sweep, cfg.template, ctx.vocab,
        ctx.provider.capabilities().model_id,
    )
    print(f"{len(records)} records in {ctx.results_dir / 'records.jsonl'}")
    return records


def cmd_report(ctx: RunContext) -> dict:
    """Compute tables and curve exports from the sweep records."""
    cfg = ctx.config
    records = read_records(ctx.results_dir / "records.jsonl")
    if not records:
        raise ReportError(f"no records at {ctx.results_dir / 'records.jsonl'}; run eval first")
    meta = []
    for path in sorted(ctx.labelsets_dir.glob("K*.json")):
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
        meta.append({"label_set_id": path.stem, "K": int(payload["K"]),
                     "token_ids": list(payload["token_ids"])})
    _require(bool(meta), "no label-set files; run fit-labels first")

    rank_ns = [n for n in cfg.n_list if n > 0]
    slope_ns = [n for n in cfg.n_list if n >= ctx.dataset.num_classes]
    if len(slope_ns) < 2:
        slope_ns = rank_ns
    manifest = export_report(
        records, meta, ctx.report_dir, rank_ns=rank_ns, slope_ns=slope_ns,
        n_boot=cfg.n_boot, seed=cfg.seed_sweep, window=cfg.window,
        extra_manifest={"config_hash": cfg.config_hash},
    )
    print(f"report written to {ctx.report_dir}")
    return manifest


def cmd_vocab(ctx: RunContext, out=None) -> int:
    """Dump the candidate vocabulary as JSONL."""
    lines = [json.dumps({"id": t.token_id, "text": t.text}, ensure_ascii=False)
             for t in ctx.vocab.tokens]
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return len(lines)


def cmd_score(ctx: RunContext, prompt: str, candidate_texts) -> list[float]:
    """One-off scoring of a prompt against named candidate tokens."""
    from .providers import score_label_position

    by_text = {t.text: t for t in ctx.vocab.tokens}
    unknown = [c for c in candidate_texts if c not in by_text]
    if unknown:
        raise ConfigError(f"tokens not in the candidate vocabulary: {unknown}")
    logits = score_label_position(ctx.provider, prompt, [by_text[c] for c in candidate_texts])
    print(json.dumps({"candidates": list(candidate_texts), "logits": list(map(float, logits))}))
    return list(map(float, logits))


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--dataset", help="override the dataset path")
    parser.add_argument("--output-dir", help="override the output directory")
    parser.add_argument("--endpoint", help="override the provider endpoint")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="labelforge")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("fit-labels", "fit one label set per K value"),
        ("eval", "run the N-shot accuracy sweep"),
        ("report", "export curves and correlation tables"),
        ("vocab", "dump the candidate vocabulary"),
        ("score", "score one prompt against candidate tokens"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "vocab":
            p.add_argument("--out", help="write JSONL here instead of stdout")
        if name == "score":
            p.add_argument("--prompt", required=True)
            p.add_argument("--candidates", nargs="+", required=True)
    args = parser.parse_args(argv)

    try:
        overrides = {}
        if args.dataset:
            overrides["dataset"] = args.dataset
        if args.output_dir:
            overrides["output_dir"] = args.output_dir
        cfg = load_config(args.config, overrides)
        if args.endpoint:
            cfg = replace(cfg, endpoint=args.endpoint)
        ctx = build_context(cfg)
        if args.command == "fit-labels":
            cmd_fit_labels(ctx)
        elif args.command == "eval":
            cmd_eval(ctx)
        elif args.command == "report":
            cmd_report(ctx)
        elif args.command == "vocab":
            cmd_vocab(ctx, out=args.out)
        elif args.command == "score":
            cmd_score(ctx, args.prompt, args.candidates)
        return EXIT_OK
    except (ConfigError, CacheError, data.DatasetError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProviderError, SweepError) as e:
        print(f"provider error: {e}", file=sys.stderr)
        return EXIT_PROVIDER
    except (ReportError, StatsError) as e:
        print(f"report error: {e}", file=sys.stderr)
        return EXIT_INCOMPLETE


if __name__ == "__main__":
    sys.exit(main())
