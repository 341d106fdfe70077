"""Run configuration: a single TOML file, strict keys, flag overrides.

Flags always win over file values, and every command writes the resolved
snapshot next to its outputs so a run can be reproduced from the artifacts
alone.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from .errors import ConfigError
from .pipeline import PipelineConfig, parse_model_kind


def _strict(cls, obj: Mapping, where: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {sorted(unknown)}")
    try:
        return cls(**obj)
    except TypeError as e:
        raise ConfigError(f"[{where}] {e}") from e


@dataclass
class CorpusSection:
    records: str | None = None
    labels: str | None = None
    seeds: str | None = None
    cpc_titles: str | None = None


@dataclass
class ExpansionSection:
    cpc_level: str = "subgroup"
    include_citing: bool = False
    antiseed_count: int = 200

    def __post_init__(self):
        if self.cpc_level not in ("subgroup", "subclass"):
            raise ConfigError(f"expansion.cpc_level must be subgroup or subclass, got {self.cpc_level!r}")
        if self.antiseed_count < 0:
            raise ConfigError("expansion.antiseed_count must be >= 0")


@dataclass
class EvalSection:
    k: int = 5
    sizes: tuple[int, ...] = (400, 200, 100, 48, 24)
    rng_seed: int = 0

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)


@dataclass
class ServeSection:
    host: str = "127.0.0.1"
    port: int = 8000
    cors_origins: tuple[str, ...] = ("*",)
    log_dir: str = "sessions"

    def __post_init__(self):
        self.cors_origins = tuple(self.cors_origins)


@dataclass
class RunConfig:
    corpus: CorpusSection = field(default_factory=CorpusSection)
    embeddings: dict[str, str] = field(default_factory=dict)
    expansion: ExpansionSection = field(default_factory=ExpansionSection)
    model_kind: str = "svm-tfidf"
    model: PipelineConfig = field(default_factory=PipelineConfig)
    eval: EvalSection = field(default_factory=EvalSection)
    output_dir: str = "out"
    serve: ServeSection = field(default_factory=ServeSection)

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunConfig":
        known = {"corpus", "embeddings", "expansion", "model", "eval", "output", "serve"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls()
        if "corpus" in data:
            cfg.corpus = _strict(CorpusSection, data["corpus"], "corpus")
        if "embeddings" in data:
            emb = data["embeddings"]
            if not all(isinstance(v, str) for v in emb.values()):
                raise ConfigError("[embeddings] values must be file paths")
            cfg.embeddings = dict(emb)
        if "expansion" in data:
            cfg.expansion = _strict(ExpansionSection, data["expansion"], "expansion")
        if "model" in data:
            model = dict(data["model"])
            cfg.model_kind = model.pop("kind", cfg.model_kind)
            try:
                cfg.model = PipelineConfig.from_dict(model)
            except Exception as e:
                raise ConfigError(f"[model] {e}") from e
        if "eval" in data:
            cfg.eval = _strict(EvalSection, data["eval"], "eval")
        if "output" in data:
            out = data["output"]
            unknown = set(out) - {"directory"}
            if unknown:
                raise ConfigError(f"[output] unknown keys: {sorted(unknown)}")
            cfg.output_dir = out.get("directory", cfg.output_dir)
        if "serve" in data:
            cfg.serve = _strict(ServeSection, data["serve"], "serve")
        parse_model_kind(cfg.model_kind)
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            raw = Path(path).read_bytes()
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
        return cls.from_dict(data)

    def override(
        self,
        seed_file: str | None = None,
        out: str | None = None,
        rng_seed: int | None = None,
        model: str | None = None,
        k: int | None = None,
        sizes: tuple[int, ...] | None = None,
        threshold: float | None = None,
    ) -> "RunConfig":
        """Apply command-line flags; flags win over file values."""
        cfg = dataclasses.replace(self)
        cfg.corpus = dataclasses.replace(self.corpus)
        cfg.eval = dataclasses.replace(self.eval)
        if seed_file is not None:
            cfg.corpus.seeds = seed_file
        if out is not None:
            cfg.output_dir = out
        if rng_seed is not None:
            cfg.eval = dataclasses.replace(cfg.eval, rng_seed=rng_seed)
            cfg.model = dataclasses.replace(cfg.model, rng_seed=rng_seed)
        if model is not None:
            parse_model_kind(model)
            cfg.model_kind = model
        if k is not None:
            cfg.eval = dataclasses.replace(cfg.eval, k=k)
        if sizes is not None:
            cfg.eval = dataclasses.replace(cfg.eval, sizes=tuple(sizes))
        if threshold is not None:
            cfg.model = dataclasses.replace(cfg.model, threshold=threshold)
        return cfg

    def resolved(self) -> dict:
        """The full effective configuration, for the run snapshot."""
        return {
            "corpus": dataclasses.asdict(self.corpus),
            "embeddings": dict(self.embeddings),
            "expansion": dataclasses.asdict(self.expansion),
            "model": {"kind": self.model_kind, **self.model.to_dict()},
            "eval": {
                "k": self.eval.k,
                "sizes": list(self.eval.sizes),
                "rng_seed": self.eval.rng_seed,
            },
            "output": {"directory": self.output_dir},
            "serve": {
                "host": self.serve.host,
                "port": self.serve.port,
                "cors_origins": list(self.serve.cors_origins),
                "log_dir": self.serve.log_dir,
            },
        }

    def write_snapshot(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "resolved_config.json"
        path.write_text(
            json.dumps(self.resolved(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return path
