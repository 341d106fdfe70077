"""Operator command line: the whole landscaping pipeline, one command per stage.

Every command resolves its configuration (TOML file, then flag overrides),
writes machine-readable JSON plus any human-readable artifacts into the
output directory, and drops a resolved_config.json snapshot alongside them.
Re-running with identical inputs rewrites identical bytes.
"""

from __future__ import annotations

import dataclasses
import functools
import json
from pathlib import Path

import click

from .config import RunConfig
from .corpus import (
    CorpusStore,
    parse_jsonl,
    parse_labels_jsonl,
    parse_patentsview_tsv,
    serialize_jsonl,
)
from .errors import PatentscapeError
from .evaluation import (
    build_bundle,
    cohens_kappa,
    curve_to_csv,
    evaluate,
    format_reports_table,
    learning_curve,
)
from .features.embeddings import EmbeddingTable
from .graph import build_index, expand, sample_antiseeds
from .pipeline import (
    FeatureContext,
    FittedPipelineModel,
    fit_model,
    make_fit,
    parse_model_kind,
)


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_lines(path: Path, lines) -> None:
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")


def _load_corpus(cfg: RunConfig) -> CorpusStore:
    if not cfg.corpus.records:
        raise PatentscapeError("no corpus records path; set corpus.records or run ingest first")
    path = Path(cfg.corpus.records)
    if not path.exists():
        raise PatentscapeError(f"corpus file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        return CorpusStore(parse_jsonl(fh), source=str(path))


def _load_labels(cfg: RunConfig):
    if not cfg.corpus.labels:
        raise PatentscapeError("no labels path; set corpus.labels or pass --labels")
    path = Path(cfg.corpus.labels)
    if not path.exists():
        raise PatentscapeError(f"labels file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        return parse_labels_jsonl(fh)


def _read_seed_ids(cfg: RunConfig) -> list[str]:
    if not cfg.corpus.seeds:
        raise PatentscapeError("no seed file; set corpus.seeds or pass --seed-file")
    path = Path(cfg.corpus.seeds)
    if not path.exists():
        raise PatentscapeError(f"seed file not found: {path}")
    return [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def _build_context(cfg: RunConfig, corpus: CorpusStore) -> FeatureContext:
    embeddings = {}
    for name, path in cfg.embeddings.items():
        if not Path(path).exists():
            raise PatentscapeError(f"embedding table {name!r} not found: {path}")
        embeddings[name] = EmbeddingTable.load(path, name=name)
    titles = {}
    if cfg.corpus.cpc_titles:
        titles = json.loads(Path(cfg.corpus.cpc_titles).read_text(encoding="utf-8"))
    return FeatureContext(corpus, embeddings=embeddings, cpc_titles=titles)


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write_snapshot(out)
    return out


def run_command(f):
    """Resolve config + overrides, surface package errors as exit code 1."""

    @click.option("--config", "config_path", type=click.Path(), default=None,
                  help="TOML run configuration.")
    @click.option("--seed-file", type=click.Path(), default=None)
    @click.option("--out", type=click.Path(), default=None)
    @click.option("--rng-seed", type=int, default=None)
    @click.option("--model", "model_kind", default=None,
                  help="svm-tfidf|svm-w2v|svm-ft|svm-1hop|svm-tfidf-1hop|neural:<streams>")
    @click.option("--k", type=int, default=None, help="Cross-validation folds.")
    @click.option("--sizes", default=None, help="Comma-separated curve sizes.")
    @click.option("--threshold", type=float, default=None)
    @functools.wraps(f)
    def wrapper(config_path, seed_file, out, rng_seed, model_kind, k, sizes, threshold,
                **kwargs):
        try:
            cfg = RunConfig.load(config_path) if config_path else RunConfig()
            parsed_sizes = None
            if sizes is not None:
                parsed_sizes = tuple(int(s) for s in sizes.split(",") if s.strip())
            cfg = cfg.override(
                seed_file=seed_file, out=out, rng_seed=rng_seed, model=model_kind,
                k=k, sizes=parsed_sizes, threshold=threshold,
            )
            f(cfg, **kwargs)
        except PatentscapeError as e:
            raise click.ClickException(str(e)) from e

    return wrapper


@click.group()
def main():
    """Patent landscaping from seed set to scored landscape."""


@main.command()
@click.option("--records", type=click.Path(), default=None,
              help="Raw corpus: .jsonl, or a patents .tsv table.")
@click.option("--cpc", type=click.Path(), default=None, help="CPC assignment TSV.")
@click.option("--citations", type=click.Path(), default=None, help="Citation TSV.")
@run_command
def ingest(cfg: RunConfig, records, cpc, citations):
    """Normalize a raw corpus into the canonical JSONL form."""
    src = Path(records or cfg.corpus.records or "")
    if not src.name:
        raise PatentscapeError("no input; pass --records or set corpus.records")
    if not src.exists():
        raise PatentscapeError(f"input not found: {src}")
    warnings: list[str] = []
    if src.suffix == ".tsv":
        files = {"patents": src.open("rb")}
        if cpc:
            files["cpc"] = Path(cpc).open("rb")
        if citations:
            files["citations"] = Path(citations).open("rb")
        try:
            result = parse_patentsview_tsv(files)
        finally:
            for fh in files.values():
                fh.close()
        parsed = result.records
        warnings = result.warnings
    else:
        with src.open("r", encoding="utf-8") as fh:
            parsed = parse_jsonl(fh)
    store = CorpusStore(parsed, source=str(src))  # id uniqueness check
    out = _prepare_out(cfg)
    (out / "corpus.jsonl").write_text(serialize_jsonl(parsed), encoding="utf-8")
    _write_json(out / "ingest.json", {
        "records": len(parsed),
        "source": str(src),
        "warnings": warnings,
    })
    click.echo(f"ingested {len(store.ids())} records -> {out / 'corpus.jsonl'}")


@main.command("expand")
@run_command
def expand_cmd(cfg: RunConfig):
    """Seed set -> L1 (shared CPC or cited) -> L2 (family closure)."""
    corpus = _load_corpus(cfg)
    seeds = _read_seed_ids(cfg)
    index = build_index(corpus)
    result = expand(
        seeds, index,
        cpc_level=cfg.expansion.cpc_level,
        include_citing=cfg.expansion.include_citing,
    )
    out = _prepare_out(cfg)
    _write_lines(out / "l1.txt", sorted(result.l1))
    _write_lines(out / "l2.txt", sorted(result.l2))
    _write_lines(out / "antiseed_pool.txt", sorted(result.antiseed_pool))
    _write_json(out / "expand.json", {
        "seeds": len(result.seeds),
        "l1": len(result.l1),
        "l2": len(result.l2),
        "antiseed_pool": len(result.antiseed_pool),
        "cpc_level": cfg.expansion.cpc_level,
        "include_citing": cfg.expansion.include_citing,
    })
    click.echo(f"expanded {len(seeds)} seeds -> L1 {len(result.l1)}, L2 {len(result.l2)}")


@main.command()
@click.option("--count", type=int, default=None, help="Sample size; defaults to config.")
@run_command
def antiseed(cfg: RunConfig, count):
    """Sample anti-seed negatives from outside the L2 set."""
    corpus = _load_corpus(cfg)
    seeds = _read_seed_ids(cfg)
    result = expand(
        seeds, build_index(corpus),
        cpc_level=cfg.expansion.cpc_level,
        include_citing=cfg.expansion.include_citing,
    )
    n = cfg.expansion.antiseed_count if count is None else count
    sample = sample_antiseeds(result.antiseed_pool, n, cfg.eval.rng_seed)
    out = _prepare_out(cfg)
    _write_lines(out / "antiseeds.txt", sample)
    _write_json(out / "antiseed.json", {
        "pool": len(result.antiseed_pool),
        "sampled": len(sample),
        "rng_seed": cfg.eval.rng_seed,
    })
    click.echo(f"sampled {len(sample)} anti-seeds from a pool of {len(result.antiseed_pool)}")


@main.command()
@run_command
def featurize(cfg: RunConfig):
    """Write the model kind's feature vectors for every corpus patent."""
    family, _ = parse_model_kind(cfg.model_kind)
    if family != "svm":
        raise PatentscapeError("featurize covers the svm-* kinds; neural models featurize in-process")
    corpus = _load_corpus(cfg)
    context = _build_context(cfg, corpus)
    from .pipeline import _fit_svm_featurizer  # same fitting path train uses

    _, feature = _fit_svm_featurizer(cfg.model_kind, context, cfg.model, corpus.ids())
    out = _prepare_out(cfg)
    with (out / "features.jsonl").open("w", encoding="utf-8") as fh:
        for pid in corpus.ids():
            vec = feature(pid)
            fh.write(json.dumps({
                "patent_id": pid,
                "dimension": vec.dimension,
                "indices": vec.indices.tolist(),
                "values": [round(v, 9) for v in vec.values.tolist()],
            }, sort_keys=True) + "\n")
    _write_json(out / "featurize.json", {
        "model": cfg.model_kind,
        "patents": len(corpus.ids()),
    })
    click.echo(f"featurized {len(corpus.ids())} patents with {cfg.model_kind}")


@main.command()
@click.option("--labels", "labels_path", type=click.Path(), default=None)
@run_command
def train(cfg: RunConfig, labels_path):
    """Fit one model on a labeled-example file and save it."""
    if labels_path:
        cfg.corpus.labels = labels_path
    corpus = _load_corpus(cfg)
    labels = _load_labels(cfg)
    context = _build_context(cfg, corpus)
    fitted = fit_model(cfg.model_kind, context, labels, config=cfg.model)
    out = _prepare_out(cfg)
    fitted.save(out / "model")
    _write_json(out / "train.json", {
        "model": cfg.model_kind,
        "examples": len(labels),
        "threshold": fitted.threshold,
    })
    click.echo(f"trained {cfg.model_kind} on {len(labels)} examples -> {out / 'model'}")


@main.command("evaluate")
@click.option("--labels", "labels_path", type=click.Path(), default=None)
@run_command
def evaluate_cmd(cfg: RunConfig, labels_path):
    """k-fold metrics on the balanced set plus holdout recall."""
    if labels_path:
        cfg.corpus.labels = labels_path
    corpus = _load_corpus(cfg)
    labels = _load_labels(cfg)
    context = _build_context(cfg, corpus)
    bundle = build_bundle(labels, rng_seed=cfg.eval.rng_seed)
    report = evaluate(
        make_fit(cfg.model_kind, context, cfg.model), bundle, k=cfg.eval.k
    )
    out = _prepare_out(cfg)
    table = format_reports_table({cfg.model_kind: report})
    _write_json(out / "evaluate.json", report.to_dict())
    (out / "evaluate.txt").write_text(table + "\n", encoding="utf-8")
    click.echo(table)


@main.command()
@click.option("--labels", "labels_path", type=click.Path(), default=None)
@run_command
def curve(cfg: RunConfig, labels_path):
    """Learning curve: Overall score at each balanced-subset size."""
    if labels_path:
        cfg.corpus.labels = labels_path
    corpus = _load_corpus(cfg)
    labels = _load_labels(cfg)
    context = _build_context(cfg, corpus)
    bundle = build_bundle(labels, rng_seed=cfg.eval.rng_seed)
    points = learning_curve(
        make_fit(cfg.model_kind, context, cfg.model),
        bundle,
        sizes=cfg.eval.sizes,
        k=cfg.eval.k,
    )
    out = _prepare_out(cfg)
    csv = curve_to_csv(points)
    (out / "curve.csv").write_text(csv, encoding="utf-8")
    _write_json(out / "curve.json", {
        "model": cfg.model_kind,
        "points": {str(size): score for size, score in points.items()},
    })
    click.echo(csv.rstrip("\n"))


@main.command()
@click.option("--labels-a", type=click.Path(), required=True)
@click.option("--labels-b", type=click.Path(), required=True)
@run_command
def kappa(cfg: RunConfig, labels_a, labels_b):
    """Cohen's kappa between two annotators' label files."""

    def to_map(path):
        with Path(path).open("r", encoding="utf-8") as fh:
            return {ex.patent_id: ex.label for ex in parse_labels_jsonl(fh)}

    value = cohens_kappa(to_map(labels_a), to_map(labels_b))
    out = _prepare_out(cfg)
    _write_json(out / "kappa.json", {
        "labels_a": str(labels_a),
        "labels_b": str(labels_b),
        "kappa": value,
    })
    click.echo(f"kappa = {value:.4f}")


@main.command()
@click.option("--check", is_flag=True, help="Build the app and exit without binding.")
@run_command
def serve(cfg: RunConfig, check):
    """Run the annotation HTTP service."""
    from .service import create_app

    corpus = _load_corpus(cfg)
    app = create_app(corpus, cfg.serve.log_dir, cors_origins=cfg.serve.cors_origins)
    if check:
        click.echo(f"service ok: {len(corpus.ids())} patents, "
                   f"{len(app.state.sessions)} recovered sessions")
        return
    import uvicorn

    click.echo(f"serving on {cfg.serve.host}:{cfg.serve.port}")
    uvicorn.run(app, host=cfg.serve.host, port=cfg.serve.port, log_level="warning")


@main.command("export-landscape")
@click.option("--model-dir", type=click.Path(), required=True,
              help="Directory written by `train`.")
@run_command
def export_landscape(cfg: RunConfig, model_dir):
    """Score the L2 expansion with a trained model -> JSONL landscape."""
    corpus = _load_corpus(cfg)
    seeds = _read_seed_ids(cfg)
    result = expand(
        seeds, build_index(corpus),
        cpc_level=cfg.expansion.cpc_level,
        include_citing=cfg.expansion.include_citing,
    )
    context = _build_context(cfg, corpus)
    fitted = FittedPipelineModel.load(model_dir, context)
    if cfg.model.threshold is not None:
        fitted.config = dataclasses.replace(fitted.config, threshold=cfg.model.threshold)
    rows = fitted.score_landscape(sorted(result.l2))
    out = _prepare_out(cfg)
    with (out / "landscape.jsonl").open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    included = sum(r["included"] for r in rows)
    _write_json(out / "export.json", {
        "model": fitted.kind,
        "threshold": fitted.threshold,
        "scored": len(rows),
        "included": included,
    })
    click.echo(f"scored {len(rows)} L2 patents, {included} included")


if __name__ == "__main__":
    main()
