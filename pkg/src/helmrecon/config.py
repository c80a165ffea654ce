"""Flat ``key = value`` experiment configuration with a fixed schema.

Lines starting with ``#`` are comments.  Coefficient truths are given per
level as ``c<ell> = x, y, amplitude, width; x, y, amplitude, width`` (or
``none``) and are scaled by ``amplitude`` at run time.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Iterable

MODES = ("oracle", "full")
MAX_LEVEL = 6

# default truth: bumps near the origin keep the spectra smooth on the 2*pi
# lattice, which the interpolation step relies on
DEFAULT_BUMPS: dict[int, list[tuple[float, float, float, float]]] = {
    1: [(0.03, 0.0, 0.5, 0.2)],
    2: [(-0.03, 0.03, 0.5, 0.12)],
    3: [(0.0, -0.03, 0.5, 0.1)],
}
_FALLBACK_BUMP = (0.0, 0.0, 0.5, 0.1)


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def parse_bumps(s: str) -> list[tuple[float, float, float, float]]:
    s = s.strip()
    if s.lower() in ("", "none", "zero"):
        return []
    out = []
    for chunk in s.split(";"):
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 4:
            raise ValueError(f"bump needs x, y, amplitude, width: {chunk!r}")
        out.append(tuple(float(p) for p in parts))
    return out


def format_bumps(bumps) -> str:
    if not bumps:
        return "none"
    return "; ".join(", ".join(repr(float(v)) for v in b) for b in bumps)


@dataclass
class ExperimentConfig:
    k: float = 20.0
    m: int = 2
    forward_n: int = 201
    inverse_n: int = 191
    amplitude: float = 0.25
    mode: str = "full"
    interpolation: str = "bilinear"
    fill: str = "extrapolate"
    margin: int = 2
    workers: int = 1
    noise: float = 0.0
    seed: int = 0
    out: str = "runs/default"
    support_radius: float = 0.35
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    images: bool = True
    bumps: dict[int, list[tuple[float, float, float, float]]] = field(default_factory=dict)

    def truth_bumps(self, ell: int) -> list[tuple[float, float, float, float]]:
        if ell in self.bumps:
            return self.bumps[ell]
        return DEFAULT_BUMPS.get(ell, [_FALLBACK_BUMP])

    def problems(self) -> list[str]:
        out = []
        if self.k <= 0:
            out.append(f"k must be positive (got {self.k})")
        if self.m < 2:
            out.append(f"m must be >= 2 (got {self.m})")
        if self.m > MAX_LEVEL:
            out.append(f"m must be <= {MAX_LEVEL} (got {self.m})")
        for key in ("forward_n", "inverse_n"):
            if getattr(self, key) < 4:
                out.append(f"{key} must be >= 4 (got {getattr(self, key)})")
        if self.mode not in MODES:
            out.append(f"mode must be one of {MODES} (got {self.mode!r})")
        if self.mode == "full" and self.forward_n == self.inverse_n:
            out.append("forward_n must differ from inverse_n in full mode (inverse crime)")
        if self.amplitude < 0:
            out.append(f"amplitude must be >= 0 (got {self.amplitude})")
        if self.interpolation not in ("bilinear", "bicubic"):
            out.append(f"interpolation must be bilinear or bicubic (got {self.interpolation!r})")
        if self.fill not in ("extrapolate", "nearest"):
            out.append(f"fill must be extrapolate or nearest (got {self.fill!r})")
        if self.margin < 0:
            out.append(f"margin must be >= 0 (got {self.margin})")
        if self.workers < 1:
            out.append(f"workers must be >= 1 (got {self.workers})")
        if self.noise < 0:
            out.append(f"noise must be >= 0 (got {self.noise})")
        if not 0 < self.support_radius < 0.5:
            out.append(f"support_radius must lie in (0, 0.5) (got {self.support_radius})")
        if self.picard_tol <= 0:
            out.append("picard_tol must be positive")
        if self.picard_max_iters < 1:
            out.append("picard_max_iters must be >= 1")
        extra = sorted(ell for ell in self.bumps if ell > self.m)
        if extra:
            out.append(f"truth given for levels {extra} above m = {self.m}")
        return out

    def validate(self) -> "ExperimentConfig":
        probs = self.problems()
        if probs:
            raise ConfigError(probs)
        return self

    def echo(self) -> str:
        """Canonical text form; parsing it reproduces this config."""
        lines = []
        for f in fields(self):
            if f.name == "bumps":
                continue
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        for ell in range(1, self.m + 1):
            lines.append(f"c{ell} = {format_bumps(self.truth_bumps(ell))}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.echo().encode()).hexdigest()


_SCALAR_FIELDS = {f.name: f for f in fields(ExperimentConfig) if f.name != "bumps"}


def _convert(name: str, raw: str):
    default = getattr(ExperimentConfig(), name)
    if isinstance(default, bool):
        return _parse_bool(raw)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def parse_pairs(pairs: Iterable[tuple[str, str]], base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    values = {n: getattr(cfg, n) for n in _SCALAR_FIELDS}
    bumps = dict(cfg.bumps)
    problems = []
    for key, raw in pairs:
        key = key.strip()
        try:
            if key in _SCALAR_FIELDS:
                values[key] = _convert(key, raw)
            elif key.startswith("c") and key[1:].isdigit() and 1 <= int(key[1:]) <= MAX_LEVEL:
                bumps[int(key[1:])] = parse_bumps(raw)
            else:
                problems.append(f"unknown key {key!r}")
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(**values, bumps=bumps)


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    pairs = []
    problems = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected key = value")
            continue
        key, raw = line.split("=", 1)
        pairs.append((key, raw))
    if problems:
        raise ConfigError(problems)
    return parse_pairs(pairs, base)


def parse_override(s: str) -> tuple[str, str]:
    if "=" not in s:
        raise ConfigError([f"override {s!r} is not KEY=VALUE"])
    key, raw = s.split("=", 1)
    return key, raw


def preset_names() -> list[str]:
    root = resources.files("helmrecon") / "presets"
    return sorted(p.name[: -len(".cfg")] for p in root.iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    res = resources.files("helmrecon") / "presets" / f"{name}.cfg"
    if not res.is_file():
        raise ConfigError([f"unknown preset {name!r} (available: {', '.join(preset_names())})"])
    return res.read_text()


def load_config(source: str | None = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Read a config file path or a preset name, then apply ``KEY=VALUE`` overrides."""
    if source is None:
        cfg = ExperimentConfig()
    elif Path(source).is_file():
        cfg = parse_config_text(Path(source).read_text())
    else:
        cfg = parse_config_text(preset_text(source))
    return parse_pairs([parse_override(o) for o in overrides], cfg)
