"""Command-line experiment runner.

Subcommands: ``spectrum``, ``run``, ``mc``, ``covariance``, ``figure``.
Exit status is 0 on success, 1 on validation errors and 2 on numerical
failure or divergence.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from nlconsensus import analysis, presets
from nlconsensus.config import ConfigError, ExperimentConfig, build_graph, load_config, render_config
from nlconsensus.dynamics import (
    ConfigWarning,
    DivergenceError,
    NoiseModel,
    Schedule,
    Trajectory,
    peak_power_audit,
    run,
    step_bound,
    thread_count,
    write_trajectory_csv,
)
from nlconsensus.graph import GraphGenerationError, NumericalError, is_connected, laplacian, spectrum
from nlconsensus.rng import DEFAULT_SEED
from nlconsensus.transmit import TransmitFunction, parse_designator

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


def _f17(v) -> str:
    return f"{float(v):.17g}"


def _write(path, lines) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", newline="\n")
    return path


def _curve_csv(path, times, columns: dict):
    header = ",".join(["t", *columns])
    rows = [
        ",".join([str(int(t))] + [_f17(c[i]) for c in columns.values()])
        for i, t in enumerate(times)
    ]
    return _write(path, [header, *rows])


def spectrum_report(topology, tol=1e-9):
    connected = is_connected(topology)
    lines = [f"nodes = {topology.n}", f"edges = {len(topology.edges)}", f"d_max = {topology.d_max}"]
    if topology.n >= 2:
        sp = spectrum(laplacian(topology))
        lines.append("eigenvalues = " + " ".join(_f17(v) for v in sp.eigenvalues))
        lines.append(f"lambda_2 = {_f17(sp.fiedler)}")
        lines.append(f"lambda_N = {_f17(sp.lambda_max)}")
        zeros = int(np.sum(np.abs(sp.eigenvalues) <= tol * max(1.0, sp.lambda_max)))
        lines.append(f"zero_eigenvalues = {zeros}")
    lines.append("connectivity = " + ("connected" if connected else "disconnected"))
    return connected, lines


def execute_run(cfg: ExperimentConfig, out=None):
    """Run one trajectory; returns ``(trajectory, summary_lines)`` and writes CSVs if ``out``."""
    topo = cfg.topology()
    f = cfg.transmit_function()
    sched = cfg.schedule()
    noise = cfg.noise_model()
    x0 = cfg.initial_state(topo.n)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConfigWarning)
        traj = run(topo, f, sched, noise, x0, cfg.steps, cfg.stride)
    lines = ["# config", *render_config(cfg).splitlines(), "# result"]
    lines += [f"warning = {w.message}" for w in caught if issubclass(w.category, ConfigWarning)]
    lines += [
        f"graph_retries = {topo.retries}",
        f"x_bar0 = {_f17(traj.target)}",
        f"final_avg = {_f17(traj.avg[-1])}",
        f"final_err_norm = {_f17(traj.err_norm[-1])}",
    ]
    if f.bounded:
        lines.append(f"peak_power = {_f17(peak_power_audit(traj, f))}")
        lines.append(f"power_cap = {_f17(f.power_cap)}")
    if out is not None:
        write_trajectory_csv(traj, f"{out}_trajectory.csv")
        _write(f"{out}_summary.txt", lines)
    return traj, lines


def execute_mc(cfg: ExperimentConfig, out=None, threads=None):
    topo = cfg.topology()
    f = cfg.transmit_function()
    sched = cfg.schedule()
    noise = cfg.noise_model()
    x0 = cfg.initial_state(topo.n)
    summary, batch = analysis.monte_carlo(
        topo, f, sched, noise, x0, cfg.steps, cfg.trials,
        window=cfg.window, record_every=cfg.stride, threads=threads,
    )
    lines = ["# config", *render_config(cfg).splitlines(), "# result", *summary.summary_lines()]
    if out is not None:
        _curve_csv(f"{out}_mean_error.csv", summary.times, {"mean_err_norm": summary.mean_error_curve})
        _write(f"{out}_summary.txt", lines)
    return summary, lines


def covariance_report(topology, f: TransmitFunction, theta0, sigma2_v, a=None):
    """Returns ``(valid, lines)``."""
    sp = spectrum(laplacian(topology))
    a_star = analysis.optimal_gain(sp, f, theta0)
    a = a_star if a is None else a
    cov = analysis.asymptotic_covariance(sp, f, theta0, a, sigma2_v)
    lines = [
        f"lambda_2 = {_f17(sp.fiedler)}",
        f"h_prime_theta0 = {_f17(cov.h_prime_theta0)}",
        f"a_star = {_f17(a_star)}",
        f"a = {_f17(a)}",
        f"condition 2 a lambda_2(L) h'(theta0) = {_f17(cov.condition)} (must exceed 1)",
    ]
    if not cov.valid:
        lines.append("valid = False: 2 a lambda_2(L) h'(theta0) > 1 is violated")
        return False, lines
    quad = np.array([
        analysis.mode_variance_quadrature(a, cov.h_prime_theta0, lam, sigma2_v, sp.fiedler)
        for lam in sp.eigenvalues[1:]
    ])
    resid = float(np.max(np.abs(quad - cov.S_diag) / cov.S_diag))
    lines += [
        "valid = True",
        "S_diag = " + " ".join(_f17(s) for s in cov.S_diag),
        f"spectral_norm = {_f17(cov.spectral_norm)}",
        f"optimal_norm = {_f17(analysis.optimal_covariance_norm(sp, f, theta0, sigma2_v))}",
        f"quadrature_max_rel_residual = {resid:.3e}",
    ]
    return True, lines


def run_figure(n: int, out: str, trials=None, seed=None, threads=None):
    """Run the preset for figure ``n``; returns (written paths, summary lines)."""
    configs = presets.figure_configs(n, trials)
    if seed is not None:
        configs = [(lab, c.with_overrides(seed=seed, graph_seed=seed)) for lab, c in configs]
    written, lines = [], [f"figure = {n}"]
    prefix = f"{out}_fig{n}"

    if n in (1, 2, 3, 4, 5):
        errs, times = {}, None
        for label, cfg in configs:
            traj, summ = execute_run(cfg, f"{prefix}_{label}")
            written += [Path(f"{prefix}_{label}_trajectory.csv"), Path(f"{prefix}_{label}_summary.txt")]
            errs[label] = traj.err_norm
            times = traj.times
            lines += [f"[{label}]", *summ[summ.index("# result") + 1 :]]
        if n in (2, 3):
            written.append(_curve_csv(f"{prefix}_err_norm.csv", times, errs))
        if n == 5:
            cfg = configs[0][1]
            f = cfg.transmit_function()
            cap = f.power_cap
            power = np.max(f.transmit_power(traj.states), axis=1)
            written.append(_curve_csv(
                f"{prefix}_power_audit.csv", traj.times,
                {"max_power": power, "cap": np.full(len(power), cap)},
            ))
            base = linear_baseline_audit(cfg)
            lines.append(f"linear_baseline_peak_power = {_f17(base)}")
        return written, lines

    curves, times = {}, None
    for label, cfg in configs:
        summary, summ = execute_mc(cfg, f"{prefix}_{label}", threads=threads)
        written += [Path(f"{prefix}_{label}_mean_error.csv"), Path(f"{prefix}_{label}_summary.txt")]
        curves[label] = summary.mean_error_curve
        times = summary.times
        lines.append(f"[{label}] final_mean_err_norm = {_f17(summary.mean_error_curve[-1])}")
    if n == 8:
        rows = ["rho_db," + ",".join(f"err_t{t}" for t in presets.FIG8_TIMES)]
        for label, cfg in configs:
            rho_db = cfg.transmit.split(":")[2]
            idx = [int(np.flatnonzero(times == t)[0]) for t in presets.FIG8_TIMES]
            rows.append(rho_db + "," + ",".join(_f17(curves[label][i]) for i in idx))
        written.append(_write(f"{prefix}_err_vs_rho.csv", rows))
    else:
        written.append(_curve_csv(f"{prefix}_mean_error.csv", times, curves))
    if n == 7:
        for label, cfg in configs:
            f = cfg.transmit_function()
            lines.append(f"[{label}] h_prime_xbar = {_f17(f.derivative(cfg.target_mean))}")
    return written, lines


def linear_baseline_audit(cfg: ExperimentConfig) -> float:
    """Peak h^2 of noiseless LDAC (h(x) = x, alpha = 1/lambda_N) from the same start."""
    topo = cfg.topology()
    sp = spectrum(laplacian(topo))
    lin = TransmitFunction("linear")
    traj = run(topo, lin, Schedule.constant(1.0 / sp.lambda_max), NoiseModel(), cfg.initial_state(topo.n),
               cfg.steps, check=False)
    return peak_power_audit(traj, lin)


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors (exit 1); exit 2 is kept for numerics
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _parser():
    p = _Parser(prog="nlc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="key=value experiment config file")
        sp.add_argument("--out", help="output path prefix")
        sp.add_argument("--seed", type=int, help="override the master seed")
        sp.add_argument("--trials", type=int, help="override the trial count")

    s = sub.add_parser("spectrum", help="Laplacian spectrum and connectivity")
    common(s)
    s.add_argument("--graph", help="graph designator, e.g. complete:10 or file:edges.txt")

    s = sub.add_parser("run", help="single trajectory")
    common(s)
    s = sub.add_parser("mc", help="Monte Carlo trials")
    common(s)

    s = sub.add_parser("covariance", help="asymptotic covariance and optimal gain")
    common(s)
    s.add_argument("--graph")
    s.add_argument("--transmit", default="linear")
    s.add_argument("--theta0", type=float, default=0.0)
    s.add_argument("--sigma2v", type=float, default=1.0)
    s.add_argument("--a", type=float)

    s = sub.add_parser("figure", help="run a figure preset")
    s.add_argument("n", type=int, choices=range(1, 9))
    common(s, config=False)
    return p


def _load(args):
    if not args.config:
        raise ConfigError(["--config is required"])
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, trials=args.trials, out=args.out)


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _dispatch(args)
    except (ConfigError, ValueError, FileNotFoundError, GraphGenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DivergenceError, NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _graph_from_args(args):
    seed = DEFAULT_SEED if args.seed is None else args.seed
    if args.graph:
        return build_graph(args.graph, seed)
    if args.config:
        return _load(args).topology()
    raise ConfigError(["either --graph or --config is required"])


def _dispatch(args) -> int:
    if args.command == "spectrum":
        connected, lines = spectrum_report(_graph_from_args(args))
        print("\n".join(lines))
        if args.out:
            _write(f"{args.out}_spectrum.txt", lines)
        return EXIT_OK if connected else EXIT_INVALID

    if args.command == "run":
        cfg = _load(args)
        if cfg.trials != 1:
            raise ConfigError([f"run expects trials=1, got {cfg.trials}; use mc"])
        _, lines = execute_run(cfg, cfg.out)
        print("\n".join(lines))
        return EXIT_OK

    if args.command == "mc":
        cfg = _load(args)
        if cfg.trials < 2:
            raise ConfigError(["mc needs trials >= 2"])
        _, lines = execute_mc(cfg, cfg.out, threads=thread_count())
        print("\n".join(lines))
        return EXIT_OK

    if args.command == "covariance":
        topo = _graph_from_args(args)
        f = parse_designator(args.transmit)
        if args.config:
            f = _load(args).transmit_function()
        valid, lines = covariance_report(topo, f, args.theta0, args.sigma2v, args.a)
        print("\n".join(lines))
        if args.out:
            _write(f"{args.out}_covariance.txt", lines)
        if not valid:
            print("error: invalid gain: 2 a lambda_2(L) h'(theta0) > 1 must hold", file=sys.stderr)
            return EXIT_INVALID
        return EXIT_OK

    if args.command == "figure":
        out = args.out or "nlc"
        written, lines = run_figure(args.n, out, args.trials, args.seed, threads=thread_count())
        print("\n".join(lines))
        print("wrote " + " ".join(str(p) for p in written))
        return EXIT_OK
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
