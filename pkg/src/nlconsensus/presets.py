"""Experiment presets for the eight reference figures.

Each preset fixes N, the transmit map, omega, rho, the step rule, the noise
level and the target average. The reference setups leave the network open,
so every preset pins a seeded random geometric graph on the unit square:
radius 0.4 for N = 75 and radius 0.5 for N = 10. Transient shapes are not
expected to match the reference curves; the qualitative behaviour is
(convergence, the power cap, speed orderings).
"""

from __future__ import annotations

from nlconsensus.config import ExperimentConfig
from nlconsensus.rng import DEFAULT_SEED

LARGE_GRAPH = "random_geometric:75:0.4"
SMALL_GRAPH = "random_geometric:10:0.5"
DEFAULT_TRIALS = 500


def _cfg(**kw) -> ExperimentConfig:
    kw.setdefault("seed", DEFAULT_SEED)
    kw.setdefault("graph_seed", DEFAULT_SEED)
    kw.setdefault("sensing_std", 10.0)
    return ExperimentConfig(**kw)


def _noiseless(transmit, alpha, xbar, steps=500):
    return _cfg(
        graph=LARGE_GRAPH, transmit=transmit, alpha=f"constant:{alpha!r}", noise="none",
        theta=xbar, target_mean=xbar, steps=steps,
    )


def figure_configs(n: int, trials: int | None = None) -> list[tuple[str, ExperimentConfig]]:
    """Labelled configs behind figure ``n``."""
    trials = DEFAULT_TRIALS if trials is None else trials
    if n == 1:
        return [("tanh", _noiseless("tanh:0.01:0.0", 1.5, 76.0))]
    if n == 2:
        kinds = ["tanh:0.01:0.0", "arctan:0.01:0.0:normalized", "gudermannian:0.01:0.0",
                 "algebraic_sigmoid:0.01:0.0"]
        return [(k.split(":")[0], _noiseless(k, 1.5, 76.0)) for k in kinds]
    if n == 3:
        return [
            (f"alpha_{a}", _noiseless("gudermannian:0.005:0.0", float(a), 114.0))
            for a in (2, 4, 6, 8)
        ]
    if n == 4:
        return [("tanh", _cfg(
            graph=SMALL_GRAPH, transmit="tanh:0.05:10.0", alpha="inverse_t", noise="per_edge:1.0",
            theta=36.24, target_mean=36.24, steps=1000,
        ))]
    if n == 5:
        return [("tanh", _cfg(
            graph=LARGE_GRAPH, transmit="tanh:0.005:7.5", alpha="inverse_t", noise="per_edge:0.1",
            theta=102.0, target_mean=102.0, steps=500,
        ))]
    if n == 6:
        out = []
        for xbar in (162.0, 202.0):
            for label, tx in (("arctan", "arctan:0.005:7.5"), ("tanh", "tanh:0.005:7.5")):
                out.append((f"{label}_xbar{xbar:g}", _cfg(
                    graph=LARGE_GRAPH, transmit=tx, alpha="inverse_t", noise="vector:1.0",
                    theta=xbar, target_mean=xbar, steps=500, stride=5, trials=trials,
                )))
        return out
    if n == 7:
        kinds = ["arctan:0.04:5.0:normalized", "gudermannian:0.04:5.0", "tanh:0.04:5.0",
                 "algebraic_sigmoid:0.04:5.0"]
        return [(k.split(":")[0], _cfg(
            graph=SMALL_GRAPH, transmit=k, alpha="inverse_t", noise="vector:1.0",
            theta=36.24, target_mean=36.24, steps=300, trials=trials,
        )) for k in kinds]
    if n == 8:
        return [(f"rho_{r}dB", _cfg(
            graph=LARGE_GRAPH, transmit=f"algebraic_sigmoid:0.006:{r!r}", alpha="inverse_t",
            noise="vector:1.0", theta=77.0, target_mean=77.0, steps=80, trials=trials,
        )) for r in (0.0, 2.5, 5.0, 7.5, 10.0)]
    raise ValueError(f"no preset for figure {n}; expected 1..8")


FIG8_TIMES = (20, 40, 60, 80)
