"""End-to-end model pipelines.

Every classifier the package trains is exposed here behind one interface: a
fit factory that turns labeled examples into a predict function, plus a
fitted wrapper that can be saved, reloaded, and used to score a landscape.

All featurization artifacts (vocabularies, projections, code spaces) are
fitted on the training split alone; test and holdout patents are only ever
pushed through frozen artifacts.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import neural, svm
from .corpus import CorpusStore, LabeledExample
from .errors import PatentscapeError
from .features.citations import build_code_space, build_pair_space
from .features.embeddings import EmbeddingTable, cpc_avg_embedding, mean_embedding
from .features.pca import PcaProjection, pca_fit, pca_project
from .features.sparse import SparseVector
from .features.text import Vocabulary, build_vocabulary, tfidf_vector, tokenize
from .graph import GraphIndex, build_index, khop_citation_codes

log = logging.getLogger(__name__)

SVM_KINDS = (
    "svm-tfidf",
    "svm-w2v",
    "svm-ft",
    "svm-1hop",
    "svm-tfidf-1hop",
)

NEURAL_PREFIX = "neural:"

# numeric aliases accepted in neural:<stream-spec>
STREAM_NUMBERS = {
    "1": "abstract_text",
    "2": "claims_text",
    "3": "description_text",
    "4": "citation_1hop",
    "5": "cpc_avg",
}

TEXT_FIELD_FOR_STREAM = {
    "abstract_text": "abstract",
    "claims_text": "claims",
    "description_text": "description",
}

MODEL_DIR_FORMAT = "patentscape-pipeline-model"
MODEL_DIR_VERSION = 1

FitFunction = Callable[[Sequence[LabeledExample]], Callable[[str], str]]


def parse_model_kind(kind: str) -> tuple[str, tuple[str, ...]]:
    """Validate a model-kind string.

    Returns ("svm", (base,)) for the five SVM baselines and
    ("neural", stream_kinds) for "neural:<stream-spec>", where the spec is a
    comma- or plus-separated list of stream numbers or names.
    """
    if kind in SVM_KINDS:
        return ("svm", (kind,))
    if kind.startswith(NEURAL_PREFIX):
        spec = kind[len(NEURAL_PREFIX) :]
        parts = [p.strip() for p in spec.replace("+", ",").split(",") if p.strip()]
        if not parts:
            raise PatentscapeError(f"empty stream spec in model kind {kind!r}")
        streams = []
        for part in parts:
            name = STREAM_NUMBERS.get(part, part)
            if name not in neural.STREAM_KINDS:
                raise PatentscapeError(
                    f"unknown stream {part!r} in model kind {kind!r}; "
                    f"use one of {sorted(STREAM_NUMBERS)} or {neural.STREAM_KINDS}"
                )
            if name in streams:
                raise PatentscapeError(f"duplicate stream {name!r} in model kind {kind!r}")
            streams.append(name)
        return ("neural", tuple(streams))
    raise PatentscapeError(
        f"unknown model kind {kind!r}; expected one of {SVM_KINDS} or neural:<streams>"
    )


@dataclass(frozen=True)
class PipelineConfig:
    """Hyperparameters shared by every fit factory.

    threshold=None means the kind-specific default: decision value 0.0 for
    SVMs, probability 0.5 for the neural model.
    """

    C: float = 10.0
    gamma: float = 1.0
    tolerance: float = 1e-3
    min_df: int = 1
    pca_components: int = 50
    abstract_tokens: int = 256
    claims_tokens: int = 512
    description_tokens: int = 512
    cpc_title_tokens: int = 16
    embedding: str = "w2v"
    epochs: int = 150
    batch_size: int = 32
    lr: float = 1e-3
    dropout: float = 0.4
    stream_width: int = 64
    combined_widths: tuple[int, int] = (300, 64)
    rng_seed: int = 0
    threshold: float | None = None

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "gamma": self.gamma,
            "tolerance": self.tolerance,
            "min_df": self.min_df,
            "pca_components": self.pca_components,
            "abstract_tokens": self.abstract_tokens,
            "claims_tokens": self.claims_tokens,
            "description_tokens": self.description_tokens,
            "cpc_title_tokens": self.cpc_title_tokens,
            "embedding": self.embedding,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "dropout": self.dropout,
            "stream_width": self.stream_width,
            "combined_widths": list(self.combined_widths),
            "rng_seed": self.rng_seed,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise PatentscapeError(f"unknown pipeline config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "combined_widths" in kwargs:
            kwargs["combined_widths"] = tuple(kwargs["combined_widths"])
        return cls(**kwargs)


class FeatureContext:
    """Corpus plus the read-only resources featurizers draw from.

    Tokenization and k-hop code counts are cached per patent; both depend
    only on the corpus, never on a training split, so sharing the cache
    across folds leaks nothing.
    """

    def __init__(
        self,
        corpus: CorpusStore,
        embeddings: Mapping[str, EmbeddingTable] | None = None,
        cpc_titles: Mapping[str, str] | None = None,
        index: GraphIndex | None = None,
    ):
        self.corpus = corpus
        self.embeddings = dict(embeddings or {})
        self.cpc_titles = dict(cpc_titles or {})
        self._index = index
        self._tokens: dict[tuple[str, str], list[str]] = {}
        self._khop: dict[tuple[str, int], dict] = {}

    @property
    def index(self) -> GraphIndex:
        if self._index is None:
            self._index = build_index(self.corpus)
        return self._index

    def table(self, name: str) -> EmbeddingTable:
        try:
            return self.embeddings[name]
        except KeyError:
            raise PatentscapeError(
                f"no embedding table named {name!r}; have {sorted(self.embeddings)}"
            ) from None

    def tokens(self, patent_id: str, fld: str) -> list[str]:
        key = (patent_id, fld)
        if key not in self._tokens:
            record = self.corpus.get(patent_id)
            self._tokens[key] = tokenize(getattr(record, fld))
        return self._tokens[key]

    def khop_codes(self, patent_id: str, k: int) -> dict:
        key = (patent_id, k)
        if key not in self._khop:
            self._khop[key] = khop_citation_codes(patent_id, k, self.index)
        return self._khop[key]


def _examples_to_ids(data: Sequence[LabeledExample]) -> list[str]:
    return [ex.patent_id for ex in data]


def _svm_labels(data: Sequence[LabeledExample]) -> list[int]:
    return [1 if ex.label == "positive" else -1 for ex in data]


def _count_vector(counts: Mapping, space: Sequence) -> SparseVector:
    pairs = []
    for i, key in enumerate(space):
        c = counts.get(key, 0)
        if c:
            pairs.append((i, float(c)))
    return SparseVector.from_pairs(len(space), pairs)


# ---------------------------------------------------------------------------
# SVM featurizers. Each returns (artifacts, feature_fn); artifacts is the
# JSON-serializable state needed to rebuild feature_fn at load time.


def _fit_tfidf_featurizer(context: FeatureContext, config: PipelineConfig, train_ids):
    vocab_a = build_vocabulary(
        (context.tokens(pid, "abstract") for pid in train_ids), min_df=config.min_df
    )
    vocab_c = build_vocabulary(
        (context.tokens(pid, "claims") for pid in train_ids), min_df=config.min_df
    )
    if len(vocab_a) == 0 and len(vocab_c) == 0:
        raise PatentscapeError("training split produced an empty tf-idf vocabulary")

    def feature(pid: str) -> SparseVector:
        va = tfidf_vector(context.tokens(pid, "abstract"), vocab_a)
        vc = tfidf_vector(context.tokens(pid, "claims"), vocab_c)
        return SparseVector.concat([va, vc]).l2_normalized()

    artifacts = {"vocab_abstract": vocab_a, "vocab_claims": vocab_c}
    return artifacts, feature


def _fit_embedding_featurizer(context: FeatureContext, config: PipelineConfig, train_ids, table_name: str):
    table = context.table(table_name)

    def dense(pid: str) -> np.ndarray:
        a = mean_embedding(context.tokens(pid, "abstract"), table, config.abstract_tokens)
        c = mean_embedding(context.tokens(pid, "claims"), table, config.claims_tokens)
        return np.concatenate([a, c])

    matrix = np.array([dense(pid) for pid in train_ids])
    k = min(config.pca_components, matrix.shape[0], matrix.shape[1])
    proj = pca_fit(matrix, k=k)

    def feature(pid: str) -> SparseVector:
        reduced = pca_project(dense(pid), proj)
        return SparseVector.from_dense(reduced).l2_normalized()

    return {"projection": proj, "table_name": table_name}, feature


def _fit_onehop_featurizer(context: FeatureContext, config: PipelineConfig, train_ids):
    code_space = build_code_space(context.index, train_ids)
    if not code_space:
        raise PatentscapeError("training split yields an empty citation code space")

    def feature(pid: str) -> SparseVector:
        counts = context.khop_codes(pid, 1)
        return _count_vector(counts, code_space).l2_normalized()

    return {"code_space": code_space}, feature


def _fit_svm_featurizer(base: str, context: FeatureContext, config: PipelineConfig, train_ids):
    if base == "svm-tfidf":
        return _fit_tfidf_featurizer(context, config, train_ids)
    if base == "svm-w2v":
        return _fit_embedding_featurizer(context, config, train_ids, "w2v")
    if base == "svm-ft":
        return _fit_embedding_featurizer(context, config, train_ids, "ft")
    if base == "svm-1hop":
        return _fit_onehop_featurizer(context, config, train_ids)
    if base == "svm-tfidf-1hop":
        tf_artifacts, tf_feature = _fit_tfidf_featurizer(context, config, train_ids)
        hop_artifacts, hop_feature = _fit_onehop_featurizer(context, config, train_ids)

        def feature(pid: str) -> SparseVector:
            return SparseVector.concat([tf_feature(pid), hop_feature(pid)]).l2_normalized()

        return {**tf_artifacts, **hop_artifacts}, feature
    raise PatentscapeError(f"unknown SVM baseline {base!r}")


# ---------------------------------------------------------------------------
# Neural stream inputs.


def _neural_spaces(stream_kinds, context: FeatureContext, train_ids) -> dict:
    spaces: dict = {}
    if "citation_1hop" in stream_kinds:
        spaces["code_space"] = build_code_space(context.index, train_ids)
        if not spaces["code_space"]:
            raise PatentscapeError("training split yields an empty citation code space")
    if "citation_2hop" in stream_kinds:
        spaces["pair_space"] = build_pair_space(context.index, train_ids)
        if not spaces["pair_space"]:
            raise PatentscapeError("training split yields an empty citation pair space")
    return spaces


def _neural_input_builder(kind: str, context: FeatureContext, config: PipelineConfig, spaces: dict):
    """(input_dim, fn) for one stream kind."""
    if kind in TEXT_FIELD_FOR_STREAM:
        table = context.table(config.embedding)
        fld = TEXT_FIELD_FOR_STREAM[kind]
        cap = {
            "abstract_text": config.abstract_tokens,
            "claims_text": config.claims_tokens,
            "description_text": config.description_tokens,
        }[kind]
        return table.dimension, lambda pid: mean_embedding(context.tokens(pid, fld), table, cap)
    if kind == "citation_1hop":
        space = spaces["code_space"]
        return len(space), lambda pid: np.array(
            [float(context.khop_codes(pid, 1).get(c, 0)) for c in space]
        )
    if kind == "citation_2hop":
        space = spaces["pair_space"]
        return len(space), lambda pid: np.array(
            [float(context.khop_codes(pid, 2).get(p, 0)) for p in space]
        )
    if kind == "cpc_avg":
        table = context.table(config.embedding)

        def cpc_mean(pid: str) -> np.ndarray:
            codes = context.corpus.get(pid).cpc_codes
            seq = cpc_avg_embedding(codes, context.cpc_titles, table, config.cpc_title_tokens)
            # collapse the slot sequence to its mean so the stream input is
            # a fixed d-vector regardless of title length
            return seq.mean(axis=0)

        return table.dimension, cpc_mean
    if kind == "cpc_seq":
        table = context.table(config.embedding)

        def cpc_flat(pid: str) -> np.ndarray:
            codes = context.corpus.get(pid).cpc_codes
            seq = cpc_avg_embedding(codes, context.cpc_titles, table, config.cpc_title_tokens)
            return seq.reshape(-1)

        return config.cpc_title_tokens * table.dimension, cpc_flat
    raise PatentscapeError(f"no input builder for stream kind {kind!r}")


def _neural_builders(stream_kinds, context, config, train_ids):
    spaces = _neural_spaces(stream_kinds, context, train_ids)
    builders = {}
    specs = []
    for kind in stream_kinds:
        dim, fn = _neural_input_builder(kind, context, config, spaces)
        builders[kind] = fn
        specs.append(neural.StreamSpec(kind, dim, width=config.stream_width))
    return spaces, builders, specs


# ---------------------------------------------------------------------------
# Fitted models.


@dataclass
class FittedPipelineModel:
    """A trained classifier bound to the feature context it was fitted in.

    predict returns "positive"/"negative"; score returns the raw decision
    value (SVM) or probability (neural). included(pid) applies the model's
    threshold, for landscape exports.
    """

    kind: str
    config: PipelineConfig
    context: FeatureContext
    artifacts: dict
    model: object
    stream_kinds: tuple[str, ...] = ()
    _feature: Callable[[str], SparseVector] | None = field(default=None, repr=False)
    _inputs: Callable[[str], dict] | None = field(default=None, repr=False)

    @property
    def family(self) -> str:
        return "neural" if self.kind.startswith(NEURAL_PREFIX) else "svm"

    @property
    def threshold(self) -> float:
        if self.config.threshold is not None:
            return self.config.threshold
        return 0.5 if self.family == "neural" else 0.0

    def score(self, patent_id: str) -> float:
        if self.family == "svm":
            return svm.decision_value(self.model, self._feature(patent_id))
        return neural.predict_proba(self.model, self._inputs(patent_id))

    def predict(self, patent_id: str) -> str:
        return "positive" if self.score(patent_id) >= self.threshold else "negative"

    def score_landscape(self, patent_ids: Sequence[str]) -> list[dict]:
        """One {patent_id, score, included} row per patent, input order kept."""
        rows = []
        for pid in patent_ids:
            s = self.score(pid)
            rows.append(
                {"patent_id": pid, "score": float(s), "included": bool(s >= self.threshold)}
            )
        return rows

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest: dict = {
            "format": MODEL_DIR_FORMAT,
            "version": MODEL_DIR_VERSION,
            "kind": self.kind,
            "config": self.config.to_dict(),
            "stream_kinds": list(self.stream_kinds),
            "artifacts": {},
        }
        art = manifest["artifacts"]
        for name in ("vocab_abstract", "vocab_claims"):
            if name in self.artifacts:
                (directory / f"{name}.json").write_text(
                    self.artifacts[name].to_json(), encoding="utf-8"
                )
                art[name] = f"{name}.json"
        if "projection" in self.artifacts:
            (directory / "projection.json").write_text(
                self.artifacts["projection"].to_json(), encoding="utf-8"
            )
            art["projection"] = "projection.json"
            art["table_name"] = self.artifacts["table_name"]
        if "code_space" in self.artifacts:
            art["code_space"] = self.artifacts["code_space"]
        if "pair_space" in self.artifacts:
            art["pair_space"] = [list(p) for p in self.artifacts["pair_space"]]
        if self.family == "svm":
            svm.save_model(self.model, directory / "model.json")
            manifest["model_file"] = "model.json"
        else:
            neural.save_checkpoint(self.model, directory / "model.nlcm")
            manifest["model_file"] = "model.nlcm"
        (directory / "pipeline.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
        )

    @classmethod
    def load(cls, directory: str | Path, context: FeatureContext) -> "FittedPipelineModel":
        directory = Path(directory)
        try:
            manifest = json.loads((directory / "pipeline.json").read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise PatentscapeError(f"{directory} is not a pipeline model directory") from None
        if (
            manifest.get("format") != MODEL_DIR_FORMAT
            or manifest.get("version") != MODEL_DIR_VERSION
        ):
            raise PatentscapeError(
                f"unsupported pipeline model: format={manifest.get('format')!r} "
                f"version={manifest.get('version')!r}"
            )
        config = PipelineConfig.from_dict(manifest["config"])
        artifacts: dict = {}
        art = manifest["artifacts"]
        for name in ("vocab_abstract", "vocab_claims"):
            if name in art:
                artifacts[name] = Vocabulary.load(directory / art[name])
        if "projection" in art:
            artifacts["projection"] = PcaProjection.load(directory / art["projection"])
            artifacts["table_name"] = art["table_name"]
        if "code_space" in art:
            artifacts["code_space"] = list(art["code_space"])
        if "pair_space" in art:
            artifacts["pair_space"] = [tuple(p) for p in art["pair_space"]]
        kind = manifest["kind"]
        stream_kinds = tuple(manifest.get("stream_kinds", ()))
        if kind.startswith(NEURAL_PREFIX):
            model = neural.load_checkpoint(directory / manifest["model_file"])
            fitted = cls(kind, config, context, artifacts, model, stream_kinds)
            fitted._inputs = _rebuild_neural_inputs(stream_kinds, context, config, artifacts)
        else:
            model = svm.load_model(directory / manifest["model_file"])
            fitted = cls(kind, config, context, artifacts, model)
            fitted._feature = _rebuild_svm_feature(kind, context, config, artifacts)
        return fitted


def _rebuild_svm_feature(base, context, config, artifacts):
    """Reassemble the feature function from frozen artifacts (no refitting)."""
    if base == "svm-tfidf":
        va, vc = artifacts["vocab_abstract"], artifacts["vocab_claims"]

        def feature(pid):
            return SparseVector.concat(
                [
                    tfidf_vector(context.tokens(pid, "abstract"), va),
                    tfidf_vector(context.tokens(pid, "claims"), vc),
                ]
            ).l2_normalized()

        return feature
    if base in ("svm-w2v", "svm-ft"):
        proj = artifacts["projection"]
        table = context.table(artifacts["table_name"])

        def feature(pid):
            a = mean_embedding(context.tokens(pid, "abstract"), table, config.abstract_tokens)
            c = mean_embedding(context.tokens(pid, "claims"), table, config.claims_tokens)
            return SparseVector.from_dense(
                pca_project(np.concatenate([a, c]), proj)
            ).l2_normalized()

        return feature
    if base == "svm-1hop":
        space = artifacts["code_space"]

        def feature(pid):
            return _count_vector(context.khop_codes(pid, 1), space).l2_normalized()

        return feature
    if base == "svm-tfidf-1hop":
        tf = _rebuild_svm_feature("svm-tfidf", context, config, artifacts)
        hop = _rebuild_svm_feature("svm-1hop", context, config, artifacts)

        def feature(pid):
            return SparseVector.concat([tf(pid), hop(pid)]).l2_normalized()

        return feature
    raise PatentscapeError(f"unknown SVM baseline {base!r}")


def _rebuild_neural_inputs(stream_kinds, context, config, artifacts):
    spaces = {k: artifacts[k] for k in ("code_space", "pair_space") if k in artifacts}
    builders = {}
    for kind in stream_kinds:
        _, fn = _neural_input_builder(kind, context, config, spaces)
        builders[kind] = fn

    def inputs(pid: str) -> dict:
        return {k: fn(pid) for k, fn in builders.items()}

    return inputs


# ---------------------------------------------------------------------------
# Fitting.


def fit_model(
    kind: str,
    context: FeatureContext,
    data: Sequence[LabeledExample],
    config: PipelineConfig | None = None,
) -> FittedPipelineModel:
    """Train one model of the given kind on the labeled examples."""
    config = config or PipelineConfig()
    family, detail = parse_model_kind(kind)
    if not data:
        raise PatentscapeError("no training examples")
    train_ids = _examples_to_ids(data)
    if family == "svm":
        base = detail[0]
        artifacts, feature = _fit_svm_featurizer(base, context, config, train_ids)
        train_data = list(zip((feature(pid) for pid in train_ids), _svm_labels(data)))
        model = svm.train_smo_rbf(
            train_data, C=config.C, gamma=config.gamma, tolerance=config.tolerance
        )
        fitted = FittedPipelineModel(kind, config, context, artifacts, model)
        fitted._feature = feature
        return fitted

    stream_kinds = detail
    spaces, builders, specs = _neural_builders(stream_kinds, context, config, train_ids)

    def inputs(pid: str) -> dict:
        return {k: fn(pid) for k, fn in builders.items()}

    dataset = [(inputs(ex.patent_id), 1 if ex.label == "positive" else 0) for ex in data]
    model, history = neural.train(
        specs,
        dataset,
        epochs=config.epochs,
        batch_size=config.batch_size,
        lr=config.lr,
        rng_seed=config.rng_seed,
        dropout=config.dropout,
        combined_widths=config.combined_widths,
    )
    log.info("neural fit: %d epochs, final loss %.4f", config.epochs, history[-1])
    fitted = FittedPipelineModel(
        kind, config, context, dict(spaces), model, stream_kinds=stream_kinds
    )
    fitted._inputs = inputs
    return fitted


def make_fit(
    kind: str,
    context: FeatureContext,
    config: PipelineConfig | None = None,
) -> FitFunction:
    """A fit function for the evaluation harness: examples -> predict."""
    parse_model_kind(kind)  # fail early on bad kinds

    def fit(data: Sequence[LabeledExample]) -> Callable[[str], str]:
        fitted = fit_model(kind, context, data, config=config)
        return fitted.predict

    return fit
