"""INI run configuration.

A complete annotated example lives in ``configs/wedge.ini`` at the repo
root. Every value has a default except where noted; environment variables
are never consulted.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .model import TrainConfig
from .search import SearchConfig
from .smoothing import SmoothingConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataSpec:
    kind: str = "wedge"
    dim: int = 2
    n_train: int = 2000
    n_test: int = 200
    seed: int = 0
    n_classes: int = 2
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None


@dataclass(frozen=True)
class RunConfig:
    data: DataSpec = field(default_factory=DataSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    checkpoint: Path = Path("out/model.json")
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    sigmas: tuple[float, ...] = (0.5, 1.0)
    output_dir: Path = Path("out")
    seed: int = 0
    workers: int = 1
    record_timing: bool = False

    def with_sigma(self, sigma: float) -> "RunConfig":
        return replace(self, smoothing=replace(self.smoothing, sigma=sigma))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read(path)
        return _parse(cp, path.parent)
    except (configparser.Error, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse(cp: configparser.ConfigParser, root: Path) -> RunConfig:
    known = {"data", "train", "model", "smoothing", "search", "run"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")

    def sec(name):
        return cp[name] if cp.has_section(name) else {}

    def rel(value):
        p = Path(value)
        return p if p.is_absolute() else root / p

    d = sec("data")
    data = DataSpec(
        kind=d.get("kind", "wedge"),
        dim=int(d.get("dim", 2)),
        n_train=int(d.get("n_train", 2000)),
        n_test=int(d.get("n_test", 200)),
        seed=int(d.get("seed", 0)),
        n_classes=int(d.get("n_classes", 10 if d.get("kind") == "idx" else 2)),
        **{k: str(rel(d[k])) for k in ("train_images", "train_labels", "test_images", "test_labels") if k in d},
    )
    if data.kind not in ("blobs", "wedge", "annulus", "idx"):
        raise ConfigError(f"unknown data kind {data.kind!r}")

    t = sec("train")
    train = TrainConfig(
        epochs=int(t.get("epochs", 60)),
        batch_size=int(t.get("batch_size", 32)),
        learning_rate=float(t.get("learning_rate", 0.1)),
        sigma_train=float(t.get("sigma_train", 0.25)),
        seed=int(t.get("seed", 0)),
        hidden=_ints(t.get("hidden", "32, 32")),
    )

    s = sec("smoothing")
    smoothing = SmoothingConfig(
        sigma=float(s.get("sigma", 0.5)),
        n_samples=int(s.get("n_samples", 1000)),
        alpha=float(s.get("alpha", 0.001)),
        tau=float(s.get("tau", 1.0)),
        mode=s.get("mode", "argmax"),
        batch_size=int(s.get("batch_size", 2048)),
    )

    q = sec("search")
    bools = configparser.ConfigParser.BOOLEAN_STATES

    def flag(section, key, default):
        raw = section.get(key)
        if raw is None:
            return default
        if raw.lower() not in bools:
            raise ConfigError(f"{key}: not a boolean: {raw!r}")
        return bools[raw.lower()]

    search = SearchConfig(
        iterations=int(q.get("iterations", 20)),
        gamma0=float(q.get("gamma0", 0.01)),
        s_grid=int(q.get("s_grid", 11)),
        mode=q.get("mode", "approx"),
        search_n_samples=int(q.get("search_n_samples", smoothing.n_samples)),
        final_n_samples=int(q.get("final_n_samples", smoothing.n_samples)),
        enable_double=flag(q, "enable_double", True),
        enable_boundary=flag(q, "enable_boundary", True),
        golden_steps=int(q.get("golden_steps", 6)),
    )

    r = sec("run")
    sigmas = _floats(r.get("sigmas", "0.5, 1.0"))
    if not sigmas:
        raise ConfigError("sigma list is empty")
    workers = int(r.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return RunConfig(
        data=data,
        train=train,
        checkpoint=rel(sec("model").get("checkpoint", "out/model.json")),
        smoothing=smoothing,
        search=search,
        sigmas=sigmas,
        output_dir=rel(r.get("output_dir", "out")),
        seed=int(r.get("seed", 0)),
        workers=workers,
        record_timing=flag(r, "record_timing", False),
    )
