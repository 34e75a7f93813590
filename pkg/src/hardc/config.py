"""Run configuration: ``key = value`` text files with ``[section]`` headers.

Keys flatten to ``section.key``. Every key must appear in :data:`SCHEMA`;
anything else is a :class:`ConfigError` naming the line. Keys written
before any section header are looked up bare first, then under
``preprocess.`` (so pipeline settings may be given unqualified).
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

from .cgan import GanHyper, GanSpec
from .dsp.pipeline import PipelineConfig
from .errors import ConfigError
from .model.spec import ModelSpec
from .model.train import TrainHyper


def _schema() -> dict[str, tuple[type, object]]:
    s: dict[str, tuple[type, object]] = {"seed": (int, 0)}
    types = {"int": int, "float": float, "bool": bool, "str": str}
    for f in fields(PipelineConfig):
        s[f"preprocess.{f.name}"] = (types[f.type], f.default)
    s["data.train_fraction"] = (float, 0.8)
    s["data.demo_beats"] = (int, 150)
    s["data.demo_noise"] = (float, 0.02)
    for f in fields(ModelSpec):
        if f.name != "segment_len":  # always taken from the beat file
            s[f"model.{f.name}"] = (types[f.type], f.default)
    for f in fields(TrainHyper):
        if f.name != "seed":
            s[f"train.{f.name}"] = (float if f.name == "target_accuracy" else types[f.type], f.default)
    for f in fields(GanSpec):
        if f.name not in ("segment_len", "classes"):
            s[f"gan.{f.name}"] = (int, f.default)
    for f in fields(GanHyper):
        if f.name != "seed":
            s[f"gan.{f.name}"] = (types[f.type], f.default)
    s["gan.balance"] = (str, "match_majority")
    s["bench.width"] = (int, 8)
    s["bench.levels"] = (int, 3)
    s["bench.channels"] = (int, 32)
    s["bench.length"] = (int, 360)
    s["bench.iters"] = (int, 1000)
    s["bench.repeats"] = (int, 3)
    s["report.plots"] = (bool, True)
    return s


SCHEMA = _schema()


def _convert(key: str, raw, line: int | None):
    typ, default = SCHEMA[key]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if key == "train.target_accuracy" and text.lower() in ("", "none"):
            return None
        if typ is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return typ(text)
    except ValueError:
        raise ConfigError(line, f"{key}: cannot read {text!r} as {typ.__name__}") from None


def _resolve(key: str, bare: bool, line: int | None) -> str:
    if key in SCHEMA:
        return key
    if bare and f"preprocess.{key}" in SCHEMA:
        return f"preprocess.{key}"
    raise ConfigError(line, f"unknown key {key!r}")


class RunConfig:
    """Typed, validated settings; unset keys fall back to their defaults."""

    def __init__(self, values: dict | None = None):
        self._values: dict[str, object] = {}
        for k, v in (values or {}).items():
            self.set(k, v)

    def set(self, key: str, value, line: int | None = None) -> None:
        key = _resolve(key, "." not in key, line)
        self._values[key] = _convert(key, value, line)

    def get(self, key: str):
        if key not in SCHEMA:
            raise KeyError(key)
        return self._values.get(key, SCHEMA[key][1])

    def __getitem__(self, key: str):
        return self.get(key)

    def explicit(self) -> dict[str, object]:
        return dict(self._values)

    def section(self, name: str) -> dict[str, object]:
        pre = name + "."
        return {k[len(pre) :]: self.get(k) for k in SCHEMA if k.startswith(pre)}

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(**self.section("preprocess"))

    def model_spec(self, segment_len: int) -> ModelSpec:
        return ModelSpec(segment_len=segment_len, **self.section("model"))

    def train_hyper(self) -> TrainHyper:
        return TrainHyper(seed=self.get("seed"), **self.section("train"))

    def gan_spec(self, segment_len: int) -> GanSpec:
        names = {f.name for f in fields(GanSpec)}
        return GanSpec(segment_len=segment_len, **{k: v for k, v in self.section("gan").items() if k in names})

    def gan_hyper(self) -> GanHyper:
        names = {f.name for f in fields(GanHyper)}
        return GanHyper(seed=self.get("seed"), **{k: v for k, v in self.section("gan").items() if k in names})

    def balance_target(self):
        raw = self.get("gan.balance").strip()
        if raw == "match_majority":
            return raw
        try:
            return [int(v) for v in raw.split(",")]
        except ValueError:
            raise ConfigError(None, f"gan.balance must be 'match_majority' or comma-separated counts, got {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(lineno, f"malformed section header {raw.strip()!r}")
            section = line[1:-1].strip()
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(lineno, "expected 'key = value'")
        key = key.strip()
        if not key:
            raise ConfigError(lineno, "empty key")
        full = f"{section}.{key}" if section else key
        cfg.set(_resolve(full, section is None, lineno), value, lineno)
    return cfg


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(None, f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
