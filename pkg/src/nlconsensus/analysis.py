"""Closed-form covariance theory and Monte Carlo estimators that test it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nlconsensus.dynamics import Coupling, NoiseModel, Schedule, run_trials
from nlconsensus.graph import Spectrum, Topology, jacobi_eigh
from nlconsensus.transmit import TransmitFunction

CONNECTED_TOL = 1e-9


class ValidityError(ValueError):
    """Raised when the stability condition 2 a h'(theta0) lambda_2 > 1 fails."""


def error_norm(x, target) -> float:
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64) - target))


def phi_diagnostic(topology: Topology, f: TransmitFunction, x) -> dict:
    """The Lyapunov drift term 2 x^T L h(x), as a matrix form and as an edge sum."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(f.evaluate(x))
    quadratic = 2.0 * float(x @ Coupling.from_topology(topology).apply(h))
    if topology.edges:
        e = np.array(topology.edges)
        i, j = e[:, 0], e[:, 1]
        pairwise = 2.0 * math.fsum((x[i] - x[j]) * (h[i] - h[j]))
    else:
        pairwise = 0.0
    return {"quadratic": quadratic, "pairwise": pairwise}


def noise_second_moment_bound(topology: Topology, sigma2: float) -> float:
    """mu <= N d_max sigma^2 for per-link noise of variance sigma^2."""
    return topology.n * topology.d_max * sigma2


def mse_bound(topology: Topology, schedule: Schedule, sigma2: float, T=None) -> float:
    mu = noise_second_moment_bound(topology, sigma2)
    if mu == 0:
        return 0.0
    return mu / topology.n**2 * schedule.sum_squares(T)


@dataclass
class McSummary:
    trials: int
    x_bar0: float
    theta_hat: np.ndarray
    mean_final_avg: float
    empirical_mse: float
    mse_bound: float
    times: np.ndarray
    mean_error_curve: np.ndarray
    sample_cov_scaled: np.ndarray
    peak_power: float

    @property
    def stderr(self) -> float:
        return float(np.std(self.theta_hat, ddof=1) / math.sqrt(self.trials))

    @property
    def bias(self) -> float:
        return float(np.mean(self.theta_hat) - self.x_bar0)

    @property
    def rounding_slack(self) -> float:
        """Bias attributable to float rounding of the averages alone."""
        return 64.0 * np.finfo(np.float64).eps * max(1.0, abs(self.x_bar0))

    @property
    def within_bound(self) -> bool:
        return self.empirical_mse <= self.mse_bound + self.rounding_slack**2

    @property
    def unbiased(self) -> bool:
        return abs(self.bias) <= 4.0 * self.stderr + self.rounding_slack

    def summary_lines(self) -> list[str]:
        return [
            f"trials = {self.trials}",
            f"x_bar0 = {self.x_bar0:.17g}",
            f"mean_final_avg = {self.mean_final_avg:.17g}",
            f"mean_theta_hat = {float(np.mean(self.theta_hat)):.17g}",
            f"stderr_theta_hat = {self.stderr:.17g}",
            f"empirical_mse = {self.empirical_mse:.17g}",
            f"mse_bound = {self.mse_bound:.17g}",
            f"mse_within_bound = {self.within_bound}",
            f"unbiased_4se = {self.unbiased}",
            f"final_mean_err_norm = {float(self.mean_error_curve[-1]):.17g}",
            f"peak_power = {self.peak_power:.17g}",
        ]


def monte_carlo(
    topology,
    f,
    schedule,
    noise,
    x0,
    T,
    trials,
    window=100,
    record_every=1,
    keep_states=False,
    threads=None,
):
    """Run independent noisy trials and summarize the limit estimate.

    The per-trial estimate of the consensus limit is the mean network average
    over the last ``window`` recorded steps. Returns ``(summary, batch)``.
    """
    if trials < 2:
        raise ValueError("Monte Carlo needs at least 2 trials")
    batch = run_trials(
        topology, f, schedule, noise, x0, T, trials,
        record_every=record_every, keep_states=keep_states, threads=threads,
    )
    x_bar0 = float(np.mean(x0))
    w = min(window, batch.avgs.shape[1])
    theta_hat = batch.avgs[:, -w:].mean(axis=1)
    mean_err = np.linalg.norm(batch.mean_states - x_bar0, axis=1)

    t_final = max(int(batch.times[-1]), 1)
    dev = math.sqrt(t_final) * (batch.final - theta_hat[:, None])
    cov = np.cov(dev, rowvar=False)

    sigma2 = noise.sigma2 if noise.kind == "per_edge_gaussian" else 0.0
    if noise.kind == "vector_gaussian" and noise.active:
        # i.i.d. N-vector noise: E||n||^2 = N sigma_v^2
        bound = topology.n * noise.sigma2 / topology.n**2 * schedule.sum_squares(T)
    else:
        bound = mse_bound(topology, schedule, sigma2 if noise.active else 0.0, T)
    summary = McSummary(
        trials=trials,
        x_bar0=x_bar0,
        theta_hat=theta_hat,
        mean_final_avg=float(np.mean(batch.avgs[:, -1])),
        empirical_mse=float(np.mean((theta_hat - x_bar0) ** 2)),
        mse_bound=bound,
        times=batch.times,
        mean_error_curve=mean_err,
        sample_cov_scaled=cov,
        peak_power=batch.peak_power,
    )
    return summary, batch


def mean_error_gap(states_a, states_b, target):
    """Gap between two mean-error curves and its delta-method standard error.

    ``states_*`` have shape (trials, times, N) and should share noise draws.
    Returns ``(curve_a - curve_b, se)`` per recorded time, where the curves
    are ``||mean_k X_k(t) - target 1||``.
    """
    da = states_a - target
    db = states_b - target
    ma, mb = da.mean(axis=0), db.mean(axis=0)
    na = np.linalg.norm(ma, axis=1)
    nb = np.linalg.norm(mb, axis=1)
    ua = ma / np.where(na > 0, na, 1.0)[:, None]
    ub = mb / np.where(nb > 0, nb, 1.0)[:, None]
    z = np.einsum("ktn,tn->kt", da, ua) - np.einsum("ktn,tn->kt", db, ub)
    se = z.std(axis=0, ddof=1) / math.sqrt(states_a.shape[0])
    return na - nb, se


@dataclass
class AsymptoticCovariance:
    a: float
    theta0: float
    h_prime_theta0: float
    sigma2_v: float
    eigenvalues: np.ndarray
    valid: bool
    S_diag: np.ndarray | None = None
    C: np.ndarray | None = None
    spectral_norm: float | None = None

    @property
    def condition(self) -> float:
        """2 a h'(theta0) lambda_2; must exceed 1."""
        return 2.0 * self.a * self.h_prime_theta0 * float(self.eigenvalues[1])


def _require_connected(spec: Spectrum):
    if spec.n < 2:
        raise ValueError("need at least 2 nodes")
    if spec.fiedler <= CONNECTED_TOL:
        raise ValueError(f"graph is disconnected (lambda_2 = {spec.fiedler:.3e})")


def asymptotic_covariance(spec: Spectrum, f, theta0, a, sigma2_v) -> AsymptoticCovariance:
    """Limit covariance of sqrt(t) (X(t) - theta0 1) under alpha(t) = a / t.

    C = a^2 sigma_v^2 / N 11^T + Phi S Phi^T / N with
    S_ii = a^2 sigma_v^2 / (2 a h'(theta0) lambda_{i+1} - 1).
    """
    _require_connected(spec)
    hp = float(f.derivative(theta0))
    lam = spec.eigenvalues
    res = AsymptoticCovariance(a, theta0, hp, sigma2_v, lam, valid=False)
    if not 2.0 * a * hp * lam[1] > 1.0:
        return res
    n = spec.n
    S = a * a * sigma2_v / (2.0 * a * hp * lam[1:] - 1.0)
    Phi = spec.phi
    C = (a * a * sigma2_v / n) * np.ones((n, n)) + (Phi * S) @ Phi.T / n
    C = (C + C.T) / 2.0
    w, _, _ = jacobi_eigh(C)
    res.valid = True
    res.S_diag = S
    res.C = C
    res.spectral_norm = float(np.max(np.abs(w)))
    return res


def covariance_integrand(a, h_prime, lam, sigma2_v):
    k = 0.5 - a * h_prime * lam
    return lambda t: math.exp(2.0 * k * t) * a * a * sigma2_v


def adaptive_simpson(fn, lo, hi, rtol=1e-10, max_depth=60) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""

    def simpson(fa, fm, fb, width):
        return width / 6.0 * (fa + 4.0 * fm + fb)

    fa, fb, fm = fn(lo), fn(hi), fn(0.5 * (lo + hi))
    whole = simpson(fa, fm, fb, hi - lo)
    scale = abs(whole) if whole else 1.0
    total = 0.0
    stack = [(lo, hi, fa, fm, fb, whole, rtol * scale, 0)]
    while stack:
        x0, x1, f0, fmid, f1, est, tol, depth = stack.pop()
        m = 0.5 * (x0 + x1)
        fl, fr = fn(0.5 * (x0 + m)), fn(0.5 * (m + x1))
        left = simpson(f0, fl, fmid, m - x0)
        right = simpson(fmid, fr, f1, x1 - m)
        diff = left + right - est
        if depth >= max_depth or abs(diff) <= 15.0 * tol:
            total += left + right + diff / 15.0
        else:
            stack.append((m, x1, fmid, fr, f1, right, tol / 2.0, depth + 1))
            stack.append((x0, m, f0, fl, fmid, left, tol / 2.0, depth + 1))
    return total


def mode_variance_quadrature(a, h_prime, lam, sigma2_v, lam2=None, rtol=1e-10) -> float:
    """S_ii from the Lyapunov integral, truncated where the integrand is ~e^-50 of its peak."""
    lam2 = lam if lam2 is None else lam2
    margin = 2.0 * a * h_prime * lam2 - 1.0
    if not margin > 0:
        raise ValidityError("2 a lambda_2(L) h'(theta0) > 1 is required")
    upper = 50.0 / margin
    return adaptive_simpson(covariance_integrand(a, h_prime, lam, sigma2_v), 0.0, upper, rtol)


def optimal_gain(spec: Spectrum, f, theta0) -> float:
    _require_connected(spec)
    hp = float(f.derivative(theta0))
    n = spec.n
    return (n + 1) / (2.0 * n * spec.fiedler * hp)


def optimal_covariance_norm(spec: Spectrum, f, theta0, sigma2_v) -> float:
    _require_connected(spec)
    hp = float(f.derivative(theta0))
    n = spec.n
    return ((n + 1) / (2.0 * n)) ** 2 * (sigma2_v / spec.fiedler**2) / hp**2


def finite_time_mode_variance(a, h_prime, lam, sigma2_v, T, t0=1.0) -> float:
    """Exact T * Var of one linearized mode after T steps of alpha(t) = a / (t + t0).

    The mode obeys y(t+1) = (1 - alpha(t) h' lam) y(t) - alpha(t) e(t) with
    Var e = sigma_v^2 and a deterministic start.
    """
    v = 0.0
    for t in range(T):
        al = a / (t + t0)
        v = (1.0 - al * h_prime * lam) ** 2 * v + al * al * sigma2_v
    return T * v


@dataclass
class NormalityReport:
    eigenvalues: np.ndarray
    S_theory: np.ndarray
    S_empirical: np.ndarray
    S_finite_T: np.ndarray
    theta0: float
    T: int
    trials: int

    @staticmethod
    def _rel(emp, ref):
        gap = emp - ref
        return np.divide(gap, ref, out=np.where(gap == 0, 0.0, np.inf), where=ref != 0)

    @property
    def rel_dev(self) -> np.ndarray:
        return self._rel(self.S_empirical, self.S_theory)

    @property
    def max_rel_dev(self) -> float:
        return float(np.max(np.abs(self.rel_dev)))

    @property
    def rel_dev_finite_T(self) -> np.ndarray:
        return self._rel(self.S_empirical, self.S_finite_T)

    def csv(self) -> str:
        lines = ["mode,lambda,S_theory,S_empirical,rel_dev"]
        for i, (lam, st, se, rd) in enumerate(
            zip(self.eigenvalues, self.S_theory, self.S_empirical, self.rel_dev), 1
        ):
            lines.append(f"{i},{lam:.17g},{st:.17g},{se:.17g},{rd:.17g}")
        return "\n".join(lines) + "\n"


def normality_check(topology, spec, f, a, sigma2_v, T, trials, x0, seed, threads=None):
    """Compare per-mode variances of sqrt(T) Phi^T (X(T) - theta* 1) with S_ii.

    Runs ``alpha(t) = a / (t + 1)`` with i.i.d. N(0, sigma_v^2 I) noise.
    """
    _require_connected(spec)
    x0 = np.asarray(x0, dtype=np.float64)
    hp0 = float(f.derivative(np.mean(x0)))
    if not 2.0 * a * hp0 * spec.fiedler > 1.0:
        raise ValidityError(
            f"2 a lambda_2(L) h'(theta0) > 1 violated: 2*{a}*{spec.fiedler:.6g}*{hp0:.6g} "
            f"= {2 * a * spec.fiedler * hp0:.6g}"
        )
    noise = NoiseModel("vector_gaussian", sigma2_v, seed)
    batch = run_trials(
        topology, f, Schedule.harmonic(a), noise, x0, T, trials,
        record_every=T if T > 0 else 1, threads=threads,
    )
    theta_hat = batch.final.mean(axis=1)
    theta0 = float(np.mean(theta_hat))
    hp = float(f.derivative(theta0))
    lam = spec.eigenvalues[1:]
    proj = math.sqrt(T) * (batch.final - theta_hat[:, None]) @ spec.phi
    emp = proj.var(axis=0, ddof=1)
    theory = a * a * sigma2_v / (2.0 * a * hp * lam - 1.0)
    finite = np.array([finite_time_mode_variance(a, hp, l, sigma2_v, T) for l in lam])
    return NormalityReport(lam, theory, emp, finite, theta0, T, trials)
