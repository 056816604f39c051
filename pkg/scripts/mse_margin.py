"""Where the empirical MSE of the consensus limit sits relative to its bound.

On a regular graph the aggregated-noise second moment equals N d_max sigma^2,
so the bound is attained in expectation and a single Monte Carlo estimate
lands on either side of it. This script prints the expected value (exact, from
the martingale variance) next to several independent estimates, for a regular
graph and for a non-regular one where the bound has slack.
"""

import argparse
import math

import numpy as np

from nlconsensus.analysis import monte_carlo, mse_bound
from nlconsensus.dynamics import NoiseModel, Schedule, init_measurements
from nlconsensus.graph import generate
from nlconsensus.transmit import TransmitFunction


def expected_mse(topo, T, window):
    # x_bar(t) is a martingale with increments alpha(t) 1^T n(t) / N
    inc = topo.degrees.sum() / topo.n**2 / (np.arange(T) + 1.0) ** 2
    var = np.concatenate([[0.0], np.cumsum(inc)])
    ts = np.arange(T + 1 - window, T + 1)
    # Cov(x_bar(s), x_bar(u)) = Var(x_bar(min(s, u)))
    return float(np.mean(var[np.minimum.outer(ts, ts)]))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seeds", type=int, nargs="*", default=[101, 102, 103, 104, 105])
    args = p.parse_args()

    f = TransmitFunction("tanh", 0.05, 10.0)
    sched = Schedule.inverse_t()
    for name, topo in (("K10", generate("complete", 10)), ("RGG10", generate("random_geometric", 10, {"radius": 0.5}, 7))):
        bound = mse_bound(topo, sched, 1.0)
        exp = expected_mse(topo, args.steps, 100)
        print(f"{name}: bound {bound:.5f}, expected MSE {exp:.5f} ({exp / bound:.4f} of bound)")
        for seed in args.seeds:
            x0 = init_measurements(topo.n, 36.24, 10.0, 36.24, seed)
            s, _ = monte_carlo(topo, f, sched, NoiseModel("per_edge_gaussian", 1.0, seed), x0, args.steps, args.trials)
            z = (s.empirical_mse - exp) / (exp * math.sqrt(2.0 / args.trials))
            print(f"  seed {seed}: MSE {s.empirical_mse:.5f}  within bound {s.empirical_mse <= bound}  z {z:+.2f}")


if __name__ == "__main__":
    main()
