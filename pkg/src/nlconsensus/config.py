"""Line-oriented ``key=value`` experiment configs.

Example::

    # noiseless tanh consensus, figure 1 preset
    graph=random_geometric:75:0.4
    transmit=tanh:0.01:0
    alpha=constant:1.5
    noise=none
    theta=76
    target_mean=76
    steps=500
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from nlconsensus.dynamics import NoiseModel, init_measurements, parse_noise, parse_schedule
from nlconsensus.graph import FAMILIES, Topology, generate, read_edgelist
from nlconsensus.rng import DEFAULT_SEED
from nlconsensus.transmit import parse_designator


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    graph: str
    transmit: str
    alpha: str
    steps: int
    noise: str = "none"
    graph_seed: int | None = None
    theta: float = 0.0
    sensing_std: float = 10.0
    target_mean: float | None = None
    seed: int = DEFAULT_SEED
    stride: int = 1
    trials: int = 1
    window: int = 100
    out: str = "nlc"

    def topology(self) -> Topology:
        return build_graph(self.graph, self.seed if self.graph_seed is None else self.graph_seed)

    def transmit_function(self):
        return parse_designator(self.transmit)

    def schedule(self):
        return parse_schedule(self.alpha)

    def noise_model(self) -> NoiseModel:
        return parse_noise(self.noise, self.seed)

    def initial_state(self, n=None):
        n = self.topology().n if n is None else n
        return init_measurements(n, self.theta, self.sensing_std, self.target_mean, self.seed)

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


REQUIRED = ("graph", "transmit", "alpha", "steps")
KEYS = tuple(f.name for f in fields(ExperimentConfig))


def canonical_graph(text: str) -> str:
    parts = [p.strip() for p in text.strip().split(":")]
    fam = parts[0]
    if fam == "file":
        if len(parts) < 2 or not parts[1]:
            raise ValueError("file graph needs a path: file:<path>")
        return "file:" + ":".join(parts[1:])
    if fam not in FAMILIES:
        raise ValueError(f"unknown graph family {fam!r}")
    if len(parts) < 2:
        raise ValueError(f"graph {fam!r} needs a node count")
    n = int(parts[1])
    if n < 1:
        raise ValueError("node count must be >= 1")
    extra = {"random_geometric": 1, "erdos_renyi": 1, "grid": (0, 1)}.get(fam, 0)
    allowed = extra if isinstance(extra, tuple) else (extra,)
    if len(parts) - 2 not in allowed:
        raise ValueError(f"graph {fam!r} takes {extra} extra parameter(s), got {text!r}")
    if fam == "grid":
        return f"grid:{n}" + (f":{int(parts[2])}" if len(parts) == 3 else "")
    if fam in ("random_geometric", "erdos_renyi"):
        return f"{fam}:{n}:{float(parts[2])!r}"
    return f"{fam}:{n}"


def build_graph(text: str, seed: int) -> Topology:
    parts = canonical_graph(text).split(":")
    fam = parts[0]
    if fam == "file":
        return read_edgelist(":".join(parts[1:]))
    n = int(parts[1])
    params = {}
    if fam == "random_geometric":
        params["radius"] = float(parts[2])
    elif fam == "erdos_renyi":
        params["p"] = float(parts[2])
    elif fam == "grid" and len(parts) == 3:
        params["cols"] = int(parts[2])
    return generate(fam, n, params, seed)


def canonical_transmit(text: str) -> str:
    parse_designator(text)
    parts = [p.strip() for p in text.strip().split(":")]
    if parts[0] == "linear":
        return "linear"
    s = f"{parts[0]}:{float(parts[1])!r}:{float(parts[2])!r}"
    return s + ":normalized" if len(parts) == 4 else s


def _int(v):
    if v.strip().lstrip("-").isdigit():
        return int(v)
    raise ValueError(f"expected an integer, got {v!r}")


def _float(v):
    x = float(v)
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {v!r}")
    return x


def _opt(conv):
    return lambda v: None if v.strip().lower() == "none" else conv(v)


def _seed(v):
    s = _int(v)
    if not 0 <= s < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return s


def _positive(v):
    n = _int(v)
    if n < 1:
        raise ValueError(f"expected a positive integer, got {v!r}")
    return n


def _nonneg(v):
    n = _int(v)
    if n < 0:
        raise ValueError(f"expected a non-negative integer, got {v!r}")
    return n


def _sensing(v):
    x = _float(v)
    if x < 0:
        raise ValueError("sensing_std must be >= 0")
    return x


CONVERTERS = {
    "graph": canonical_graph,
    "transmit": canonical_transmit,
    "alpha": lambda v: parse_schedule(v).designator(),
    "noise": lambda v: parse_noise(v).designator(),
    "steps": _nonneg,
    "graph_seed": _opt(_seed),
    "theta": _float,
    "sensing_std": _sensing,
    "target_mean": _opt(_float),
    "seed": _seed,
    "stride": _positive,
    "trials": _positive,
    "window": _positive,
    "out": lambda v: v.strip(),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config, reporting every problem with its line number."""
    values, errors, seen = {}, [], {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key=value, got {raw.strip()!r}")
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONVERTERS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in seen:
            errors.append(f"line {lineno}: duplicate key {key!r} (first on line {seen[key]})")
            continue
        seen[key] = lineno
        try:
            values[key] = CONVERTERS[key](val)
        except (ValueError, IndexError) as exc:
            errors.append(f"line {lineno}: bad value for {key!r}: {exc}")
    for key in REQUIRED:
        if key not in seen:
            errors.append(f"missing required key {key!r}")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(**values)


def render_config(cfg: ExperimentConfig) -> str:
    lines = []
    for key in KEYS:
        v = getattr(cfg, key)
        if v is None:
            s = "none"
        elif isinstance(v, float):
            s = repr(v)
        else:
            s = str(v)
        lines.append(f"{key}={s}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
