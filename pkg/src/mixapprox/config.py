"""Flat key-value experiment configuration.

Config files are plain text, one `key = value` per line, `#` comments.  Keys
use dotted names (`density.name`, `grid.points_per_axis`, ...); list values
are comma separated.  Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

__all__ = ["ConfigError", "ExperimentConfig", "parse_config_text", "load_config"]

STUDIES = ("conv-rate", "mix-rate", "mle-risk", "bounds", "check-identity")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


def _int_list(raw: str):
    return tuple(int(v.strip()) for v in raw.split(",") if v.strip())


def _float_list(raw: str):
    return tuple(float(v.strip()) for v in raw.split(",") if v.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    study: str = "conv-rate"
    density_name: str = "tent"
    density_dim: int = 1
    kernel_name: str = "gaussian"
    grid_points_per_axis: int = 0          # 0: per-dim default
    grid_rule: str = "simpson"
    grid_truncation_tolerance: float = 1e-9
    k_list: tuple = (2, 4, 8, 16, 32)
    n_list: tuple = (1, 2, 4, 8, 16, 32)
    N_list: tuple = (250, 1000, 4000)
    deltas: tuple = (0.25, 0.5, 1.0)
    replications: int = 20
    epsilon: float = 0.01
    seed: int = 20240801
    out_path: str = ""
    out_format: str = "csv"
    strict: bool = False
    interior_margin: float = 0.1
    objective: str = "l2"
    means_per_axis: int = 257
    fit_k_grid: tuple = (4, 8, 16)
    fit_restarts: int = 1
    fit_max_iters: int = 500
    fit_tol: float = 1e-8
    fit_mean_box: tuple = ()               # empty: density support
    heldout_n: int = 8
    heldout_N: int = 2000

    def validate(self) -> "ExperimentConfig":
        if self.study not in STUDIES:
            raise ConfigError(f"unknown study {self.study!r}; expected one of {STUDIES}")
        if self.density_dim not in (1, 2, 3):
            raise ConfigError("density.dim must be 1, 2, or 3")
        if self.out_format not in ("csv", "json"):
            raise ConfigError("out.format must be csv or json")
        if self.grid_rule not in ("trapezoid", "simpson"):
            raise ConfigError("grid.rule must be trapezoid or simpson")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.objective not in ("l2", "kl"):
            raise ConfigError("objective must be l2 or kl")
        needs = {
            "conv-rate": ("k_list",),
            "check-identity": ("k_list", "deltas"),
            "mix-rate": ("k_list", "n_list"),
            "mle-risk": ("n_list", "N_list"),
            "bounds": ("k_list", "n_list", "N_list"),
        }[self.study]
        for name in needs:
            if not getattr(self, name):
                raise ConfigError(f"study {self.study!r} needs a nonempty {name}")
        if any(k < 1 for k in self.k_list) or any(n < 1 for n in self.n_list):
            raise ConfigError("k.list and n.list entries must be positive integers")
        return self


_KEYS = {
    "study": ("study", str),
    "density.name": ("density_name", str),
    "density.dim": ("density_dim", int),
    "kernel.name": ("kernel_name", str),
    "grid.points_per_axis": ("grid_points_per_axis", int),
    "grid.rule": ("grid_rule", str),
    "grid.truncation_tolerance": ("grid_truncation_tolerance", float),
    "k.list": ("k_list", _int_list),
    "n.list": ("n_list", _int_list),
    "N.list": ("N_list", _int_list),
    "deltas.list": ("deltas", _float_list),
    "replications": ("replications", int),
    "epsilon": ("epsilon", float),
    "seed": ("seed", int),
    "out.path": ("out_path", str),
    "out.format": ("out_format", str),
    "strict": ("strict", lambda v: v.lower() in ("1", "true", "yes")),
    "interior.margin": ("interior_margin", float),
    "objective": ("objective", str),
    "dictionary.means_per_axis": ("means_per_axis", int),
    "fit.k_grid": ("fit_k_grid", _int_list),
    "fit.restarts": ("fit_restarts", int),
    "fit.max_iters": ("fit_max_iters", int),
    "fit.tol": ("fit_tol", float),
    "fit.mean_box": ("fit_mean_box", _float_list),
    "heldout.n": ("heldout_n", int),
    "heldout.N": ("heldout_N", int),
}


def parse_config_text(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, conv = _KEYS[key]
        try:
            values[attr] = conv(val)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return ExperimentConfig(**values).validate()


def load_config(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())
