"""The consensus recursion X(t+1) = X(t) - alpha(t) [L h(X(t)) + n(t)]."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import polygamma

from nlconsensus.graph import Topology, is_connected, laplacian, spectrum
from nlconsensus.rng import EDGE_NOISE, INIT, VECTOR_NOISE, stream
from nlconsensus.transmit import TransmitFunction

DIVERGENCE_LIMIT = 1e12
TRIAL_CHUNK = 64
NOISE_BLOCK = 128

SCHEDULE_KINDS = ("constant", "inverse_t", "harmonic", "custom_a_over_t")
NOISE_KINDS = ("none", "per_edge_gaussian", "vector_gaussian")


class DivergenceError(RuntimeError):
    def __init__(self, step, trials=None):
        self.step = step
        self.trials = trials
        msg = f"state diverged (non-finite or |x| > {DIVERGENCE_LIMIT:g}) at step {step}"
        if trials:
            msg += f" in trial(s) {trials}"
        super().__init__(msg)


class ConfigWarning(UserWarning):
    """A run configuration outside the regime where convergence is guaranteed."""


@dataclass(frozen=True)
class Schedule:
    kind: str
    alpha: float | None = None
    a: float | None = None
    t0: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant" and not (self.alpha is not None and self.alpha > 0):
            raise ValueError("constant schedule needs alpha > 0")
        if self.kind in ("harmonic", "custom_a_over_t") and not (self.a is not None and self.a > 0):
            raise ValueError(f"{self.kind} schedule needs a > 0")
        if not self.t0 > 0:
            raise ValueError("t0 must be > 0")

    @classmethod
    def constant(cls, alpha):
        return cls("constant", alpha=alpha)

    @classmethod
    def inverse_t(cls):
        return cls("inverse_t")

    @classmethod
    def harmonic(cls, a):
        return cls("harmonic", a=a)

    @classmethod
    def a_over_t(cls, a, t0):
        return cls("custom_a_over_t", a=a, t0=t0)

    @property
    def decreasing(self) -> bool:
        """True for the kinds with sum alpha = inf and sum alpha^2 < inf."""
        return self.kind != "constant"

    @property
    def gain(self) -> float:
        if self.kind == "constant":
            return self.alpha
        return 1.0 if self.kind == "inverse_t" else self.a

    @property
    def offset(self) -> float:
        return self.t0 if self.kind == "custom_a_over_t" else 1.0

    def __call__(self, t):
        if self.kind == "constant":
            return self.alpha
        return self.gain / (t + self.offset)

    def values(self, T) -> np.ndarray:
        t = np.arange(T, dtype=np.float64)
        if self.kind == "constant":
            return np.full(T, self.alpha)
        return self.gain / (t + self.offset)

    def sum_squares(self, T=None) -> float:
        """sum_{t<T} alpha(t)^2; ``T=None`` means the infinite series."""
        if T is None:
            if self.kind == "constant":
                raise ValueError("sum of squared constant steps diverges for an infinite horizon")
            return self.gain**2 * float(polygamma(1, self.offset))
        return math.fsum(self.values(T) ** 2)

    def designator(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.alpha!r}"
        if self.kind == "inverse_t":
            return "inverse_t"
        if self.kind == "harmonic":
            return f"harmonic:{self.a!r}"
        return f"a_over_t:{self.a!r}:{self.t0!r}"


def parse_schedule(text: str) -> Schedule:
    parts = [p.strip() for p in text.strip().split(":")]
    kind, args = parts[0], parts[1:]
    try:
        vals = [float(v) for v in args]
    except ValueError:
        raise ValueError(f"non-numeric schedule parameter in {text!r}") from None
    expected = {"constant": 1, "inverse_t": 0, "harmonic": 1, "a_over_t": 2}
    if kind not in expected:
        raise ValueError(f"unknown schedule {kind!r}; expected one of {sorted(expected)}")
    if len(vals) != expected[kind]:
        raise ValueError(f"schedule {kind!r} takes {expected[kind]} parameter(s), got {text!r}")
    if kind == "constant":
        return Schedule.constant(vals[0])
    if kind == "inverse_t":
        return Schedule.inverse_t()
    if kind == "harmonic":
        return Schedule.harmonic(vals[0])
    return Schedule.a_over_t(*vals)


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    sigma2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma2 < 0:
            raise ValueError("noise variance must be >= 0")

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.sigma2 > 0

    def designator(self) -> str:
        if self.kind == "none":
            return "none"
        short = "per_edge" if self.kind == "per_edge_gaussian" else "vector"
        return f"{short}:{self.sigma2!r}"


def parse_noise(text: str, seed: int = 0) -> NoiseModel:
    parts = [p.strip() for p in text.strip().split(":")]
    if parts == ["none"]:
        return NoiseModel("none", 0.0, seed)
    kinds = {"per_edge": "per_edge_gaussian", "vector": "vector_gaussian"}
    if len(parts) != 2 or parts[0] not in kinds:
        raise ValueError(f"expected none | per_edge:sigma2 | vector:sigma2, got {text!r}")
    try:
        s2 = float(parts[1])
    except ValueError:
        raise ValueError(f"non-numeric noise variance in {text!r}") from None
    return NoiseModel(kinds[parts[0]], s2, seed)


def init_measurements(n, theta, sensing_std, target_mean=None, seed=0) -> np.ndarray:
    """Initial readings theta + N(0, sensing_std^2), optionally re-centred on target_mean."""
    if sensing_std < 0:
        raise ValueError("sensing_std must be >= 0")
    x = theta + sensing_std * stream(seed, INIT).standard_normal(n)
    if target_mean is not None:
        x = x + (target_mean - x.mean())
        x = _nudge_mean(x, target_mean)
    return x


def _nudge_mean(x, target, steps=256):
    """Walk single entries ulp by ulp until ``x.mean() == target``.

    The float mean is not always able to hit ``target`` exactly (tiny means
    over large entries); the closest vector seen is returned then.
    """
    best, best_gap = x, abs(target - x.mean())
    order = [len(x) - 1, *np.argsort(np.abs(x))[:7]]
    for k in order:
        y = x.copy()
        for _ in range(steps):
            gap = target - y.mean()
            if abs(gap) < best_gap:
                best, best_gap = y.copy(), abs(gap)
            if gap == 0.0:
                return y
            y[k] = np.nextafter(y[k], np.inf if gap > 0 else -np.inf)
    return best


def receiver_incidence(topology: Topology) -> np.ndarray:
    """N x K matrix mapping per-link draws (sorted (receiver, sender)) to node noise."""
    pairs = topology.ordered_pairs()
    R = np.zeros((topology.n, len(pairs)))
    R[pairs[:, 0], np.arange(len(pairs))] = -1.0
    return R


def aggregate_noise(topology: Topology, draws) -> np.ndarray:
    """n_i = -sum_{j in N_i} n_ij for draws ordered as ``topology.ordered_pairs()``.

    ``draws`` may carry leading batch axes; the last axis indexes links.
    """
    draws = np.asarray(draws, dtype=np.float64)
    k = 2 * len(topology.edges)
    if draws.shape[-1] != k:
        raise ValueError(f"expected {k} per-link draws, got {draws.shape[-1]}")
    return draws @ receiver_incidence(topology).T


class Coupling:
    """Applies L to node values as sum_{j in N_i} (h_i - h_j).

    Each edge term is exactly zero on the consensus line, so constant
    states stay bit-for-bit constant (a dense ``L @ h`` leaves rounding
    residue). Works on the last axis, so a batch of states costs the same
    code path as a single one.
    """

    def __init__(self, n, receivers, senders):
        self.n = int(n)
        self.receivers = np.asarray(receivers, dtype=np.int64)
        self.senders = np.asarray(senders, dtype=np.int64)
        self.nodes, self.starts = np.unique(self.receivers, return_index=True)

    @classmethod
    def from_topology(cls, topology: Topology):
        pairs = topology.ordered_pairs()
        return cls(topology.n, pairs[:, 0], pairs[:, 1])

    @classmethod
    def from_laplacian(cls, lap):
        lap = np.asarray(lap, dtype=np.float64)
        n = lap.shape[0]
        if lap.ndim != 2 or lap.shape != (n, n):
            raise ValueError(f"expected a square Laplacian, got shape {lap.shape}")
        off = lap - np.diag(np.diag(lap))
        if not (np.all((off == 0) | (off == -1)) and np.array_equal(off, off.T)
                and np.array_equal(np.diag(lap), -off.sum(axis=1))):
            raise ValueError("expected an unweighted graph Laplacian D - A")
        recv, send = np.nonzero(off)
        return cls(n, recv, send)

    def apply(self, h):
        h = np.asarray(h, dtype=np.float64)
        out = np.zeros(h.shape)
        if len(self.receivers):
            diffs = h[..., self.receivers] - h[..., self.senders]
            out[..., self.nodes] = np.add.reduceat(diffs, self.starts, axis=-1)
        return out


def _coupling(lap) -> Coupling:
    if isinstance(lap, Coupling):
        return lap
    if isinstance(lap, Topology):
        return Coupling.from_topology(lap)
    return Coupling.from_laplacian(lap)


def step(x, lap, f: TransmitFunction, alpha_t, noise=None, t=None) -> np.ndarray:
    """One update ``x - alpha_t * (L h(x) + noise)``.

    ``lap`` is a Topology, its Laplacian matrix, or a prebuilt Coupling.
    """
    coup = _coupling(lap)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != coup.n:
        raise ValueError(f"state of length {x.shape[-1]} does not match a {coup.n}-node graph")
    drive = coup.apply(f.evaluate(x))
    if noise is not None:
        drive = drive + noise
    out = x - alpha_t * drive
    if not np.all(np.abs(out) <= DIVERGENCE_LIMIT):
        raise DivergenceError(t)
    return out


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    target: float
    config: dict = field(default_factory=dict)

    @property
    def err_norm(self) -> np.ndarray:
        return np.linalg.norm(self.states - self.target, axis=1)

    @property
    def avg(self) -> np.ndarray:
        return self.states.mean(axis=1)

    def to_csv(self, path) -> None:
        write_trajectory_csv(self, path)


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = traj.states.shape[1]
    header = ["t"] + [f"x_{i + 1}" for i in range(n)] + ["err_norm", "avg"]
    lines = [",".join(header)]
    for t, row, e, a in zip(traj.times, traj.states, traj.err_norm, traj.avg):
        lines.append(",".join([str(int(t))] + [_fmt(v) for v in row] + [_fmt(e), _fmt(a)]))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_trajectory_csv(path):
    rows = Path(path).read_text().strip().split("\n")
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    return data[:, 0].astype(int), data[:, 1:-2], data[:, -2], data[:, -1]


def check_run_config(topology, f, schedule, noise, spec=None):
    """Warn about configurations outside the guaranteed-convergence regime."""
    if topology.n >= 2 and not is_connected(topology):
        warnings.warn("graph is disconnected; consensus cannot be reached", ConfigWarning, stacklevel=3)
    if noise.active and not schedule.decreasing:
        warnings.warn(
            "noisy run with a constant step: steps must decrease with sum alpha = inf "
            "and sum alpha^2 < inf for convergence",
            ConfigWarning,
            stacklevel=3,
        )
    if not noise.active and schedule.kind == "constant" and topology.n >= 2:
        spec = spec or spectrum(laplacian(topology))
        bound = step_bound(f, spec)
        if schedule.alpha >= bound:
            warnings.warn(
                f"constant step {schedule.alpha} violates alpha < 2/(c lambda_N) = {bound:.6g}",
                ConfigWarning,
                stacklevel=3,
            )


def step_bound(f: TransmitFunction, spec) -> float:
    lam = spec.lambda_max
    return math.inf if lam <= 0 else 2.0 / (f.c * lam)


def _noise_source(topology, noise, trial):
    """Callable drawing the aggregated noise for the next ``count`` steps."""
    if not noise.active:
        return None
    sd = math.sqrt(noise.sigma2)
    if noise.kind == "vector_gaussian":
        rng = stream(noise.seed, VECTOR_NOISE, trial)
        return lambda count: sd * rng.standard_normal((count, topology.n))
    rng = stream(noise.seed, EDGE_NOISE, trial)
    R = receiver_incidence(topology).T
    k = R.shape[0]
    return lambda count: (sd * rng.standard_normal((count, k))) @ R


def run(topology, f, schedule, noise, x0, T, record_every=1, trial=0, check=True) -> Trajectory:
    """Run one trajectory for T steps, recording every ``record_every``-th state."""
    x = np.array(x0, dtype=np.float64)
    if x.shape != (topology.n,):
        raise ValueError(f"initial state has shape {x.shape}, expected ({topology.n},)")
    if T < 0 or record_every < 1:
        raise ValueError("need T >= 0 and record_every >= 1")
    if check:
        check_run_config(topology, f, schedule, noise)
    lap = Coupling.from_topology(topology)
    draw = _noise_source(topology, noise, trial)
    alphas = schedule.values(T)

    times, states = [0], [x.copy()]
    block = None
    for t in range(T):
        nt = None
        if draw is not None:
            if t % NOISE_BLOCK == 0:
                block = draw(min(NOISE_BLOCK, T - t))
            nt = block[t % NOISE_BLOCK]
        x = step(x, lap, f, alphas[t], nt, t=t)
        if (t + 1) % record_every == 0:
            times.append(t + 1)
            states.append(x.copy())
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        target=float(np.mean(x0)),
        config={
            "n": topology.n,
            "edges": len(topology.edges),
            "transmit": f.designator(),
            "schedule": schedule.designator(),
            "noise": noise.designator(),
            "seed": noise.seed,
            "trial": trial,
        },
    )


def peak_power_audit(traj: Trajectory, f: TransmitFunction) -> float:
    """max over recorded nodes and steps of h(x_i(t))^2."""
    return float(np.max(f.transmit_power(traj.states)))


@dataclass
class BatchResult:
    """Per-trial aggregates of a set of independent trials.

    ``sum_states`` holds the trial sum of each recorded state (for the mean
    trajectory); ``avgs`` is the network average of every trial at every
    recorded step; ``states`` is filled only when requested.
    """

    times: np.ndarray
    trials: int
    sum_states: np.ndarray
    avgs: np.ndarray
    final: np.ndarray
    peak_power: float
    states: np.ndarray | None = None

    @property
    def mean_states(self) -> np.ndarray:
        return self.sum_states / self.trials


def _run_chunk(lap, topology, f, schedule, noise, x0, T, record_every, trial_ids, keep_states):
    m = len(trial_ids)
    X = np.tile(x0, (m, 1))
    draws = [_noise_source(topology, noise, k) for k in trial_ids]
    alphas = schedule.values(T)
    n_rec = T // record_every + 1
    sums = np.empty((n_rec, topology.n))
    avgs = np.empty((m, n_rec))
    kept = np.empty((m, n_rec, topology.n)) if keep_states else None
    peak = float(np.max(f.transmit_power(X)))
    sums[0] = X.sum(axis=0)
    avgs[:, 0] = X.mean(axis=1)
    if kept is not None:
        kept[:, 0] = X
    block = None
    r = 1
    for t in range(T):
        if draws[0] is not None and t % NOISE_BLOCK == 0:
            count = min(NOISE_BLOCK, T - t)
            block = np.stack([d(count) for d in draws], axis=1)
        H = np.asarray(f.evaluate(X))
        drive = lap.apply(H)
        if block is not None:
            drive += block[t % NOISE_BLOCK]
        X = X - alphas[t] * drive
        ok = np.all(np.abs(X) <= DIVERGENCE_LIMIT, axis=1)
        if not ok.all():
            raise DivergenceError(t, [int(trial_ids[i]) for i in np.flatnonzero(~ok)])
        if f.bounded:
            peak = max(peak, float(np.max(f.transmit_power(X))))
        if (t + 1) % record_every == 0:
            sums[r] = X.sum(axis=0)
            avgs[:, r] = X.mean(axis=1)
            if kept is not None:
                kept[:, r] = X
            r += 1
    if not f.bounded:
        peak = float("nan")
    return sums, avgs, X, peak, kept


def thread_count() -> int:
    raw = os.environ.get("NLC_THREADS", "").strip()
    if not raw:
        return 0
    n = int(raw)
    if n < 0:
        raise ValueError("NLC_THREADS must be >= 0")
    return n


def run_trials(
    topology,
    f,
    schedule,
    noise,
    x0,
    T,
    trials,
    record_every=1,
    keep_states=False,
    threads=None,
    check=True,
) -> BatchResult:
    """Run ``trials`` independent trajectories from a common initial state.

    Trial k draws its noise from stream k of ``noise.seed``. Trials are
    processed in fixed-size chunks whose results are reduced in trial order,
    so the output does not depend on ``threads`` (default ``NLC_THREADS``).
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (topology.n,):
        raise ValueError(f"initial state has shape {x0.shape}, expected ({topology.n},)")
    if check:
        check_run_config(topology, f, schedule, noise)
    lap = Coupling.from_topology(topology)
    ids = np.arange(trials)
    chunks = [ids[i : i + TRIAL_CHUNK] for i in range(0, trials, TRIAL_CHUNK)]
    threads = thread_count() if threads is None else threads

    def work(chunk):
        return _run_chunk(lap, topology, f, schedule, noise, x0, T, record_every, chunk, keep_states)

    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]

    sum_states = parts[0][0].copy()
    for p in parts[1:]:
        sum_states += p[0]
    peaks = [p[3] for p in parts]
    return BatchResult(
        times=np.arange(T // record_every + 1) * record_every,
        trials=trials,
        sum_states=sum_states,
        avgs=np.concatenate([p[1] for p in parts]),
        final=np.concatenate([p[2] for p in parts]),
        peak_power=float(max(peaks)) if f.bounded else float("nan"),
        states=np.concatenate([p[4] for p in parts]) if keep_states else None,
    )
