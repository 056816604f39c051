"""Undirected topologies, Laplacians and a cyclic Jacobi eigensolver."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from nlconsensus.rng import GRAPH, stream

FAMILIES = (
    "path",
    "cycle",
    "complete",
    "star",
    "grid",
    "random_geometric",
    "erdos_renyi",
)
MAX_RETRIES = 1000


class NumericalError(RuntimeError):
    """Raised when an iterative numerical routine fails."""


class GraphGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Topology:
    """Undirected simple graph on nodes ``0..n-1``.

    Edges are stored as sorted ``(i, j)`` tuples with ``i < j``.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    retries: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be >= 1, got {self.n}")
        canon = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            e = (min(i, j), max(i, j))
            if e in canon:
                raise ValueError(f"duplicate edge {e}")
            canon.add(e)
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    @property
    def d_max(self) -> int:
        return int(self.degrees.max())

    def neighbors(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return [sorted(x) for x in nbrs]

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=np.int64)
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1
        return A

    def ordered_pairs(self) -> np.ndarray:
        """(receiver, sender) pairs for every directed use of an edge, sorted."""
        pairs = [(i, j) for i, j in self.edges] + [(j, i) for i, j in self.edges]
        pairs.sort()
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def fiedler(self) -> float:
        if self.n < 2:
            raise ValueError("algebraic connectivity is undefined for N < 2")
        return float(self.eigenvalues[1])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def phi(self) -> np.ndarray:
        return self.eigenvectors[:, 1:]


def laplacian(topology: Topology) -> np.ndarray:
    """L = D - A built in integer arithmetic, returned as float64."""
    L = np.zeros((topology.n, topology.n), dtype=np.int64)
    for i, j in topology.edges:
        L[i, j] = L[j, i] = -1
        L[i, i] += 1
        L[j, j] += 1
    return L.astype(np.float64)


@numba.njit(cache=True)
def _jacobi_sweeps(A, V, target, max_sweeps):
    # Row-cyclic Jacobi, in place. Returns (sweeps, residual); sweeps = -1 on failure.
    n = A.shape[0]
    sweeps = 0
    while True:
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += A[i, j] * A[i, j]
        off = np.sqrt(off)
        if off <= target:
            return sweeps, off
        if sweeps >= max_sweeps:
            return -1, off
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                sgn = 1.0 if theta >= 0.0 else -1.0
                # hypot keeps theta**2 from overflowing when apq is tiny
                t = sgn / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
        sweeps += 1


def jacobi_eigh(A, rel_tol=1e-12, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps visit the pairs (p, q), p < q, in row order and stop once the
    off-diagonal Frobenius mass is at most ``rel_tol * ||A||_F``.

    Returns ``(eigenvalues, eigenvectors, sweeps)`` with eigenvalues ascending
    and each eigenvector column signed so its largest-magnitude entry is
    positive.
    """
    A = np.array(A, dtype=np.float64, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    V = np.eye(n)
    target = rel_tol * float(np.linalg.norm(A))
    sweeps, off = _jacobi_sweeps(A, V, target, max_sweeps)
    if sweeps < 0:
        raise NumericalError(
            f"Jacobi failed to converge in {max_sweeps} sweeps "
            f"(off-diagonal residual {off:.3e}, target {target:.3e})"
        )

    w = A.diagonal().copy()
    order = np.argsort(w, kind="stable")
    w, V = w[order], V[:, order]
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(n)] < 0.0, -1.0, 1.0)
    return w, V * signs, int(sweeps)


def spectrum(L, tol=1e-9) -> Spectrum:
    L = np.asarray(L, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {L.shape}")
    asym = float(np.max(np.abs(L - L.T))) if L.size else 0.0
    if asym > tol:
        raise ValueError(f"matrix is not symmetric (max |L - L^T| = {asym:.3e} > {tol:g})")
    w, V, sweeps = jacobi_eigh((L + L.T) / 2.0)
    return Spectrum(eigenvalues=w, eigenvectors=V, sweeps=sweeps)


def components(topology: Topology) -> list[list[int]]:
    """Connected components by breadth-first search."""
    nbrs = topology.neighbors()
    seen = [False] * topology.n
    comps = []
    for root in range(topology.n):
        if seen[root]:
            continue
        seen[root] = True
        comp, queue = [], deque([root])
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in nbrs[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def is_connected(topology: Topology) -> bool:
    return len(components(topology)) == 1


def _deterministic(family, n, params):
    if family == "path":
        return [(i, i + 1) for i in range(n - 1)]
    if family == "cycle":
        if n < 3:
            return [(i, i + 1) for i in range(n - 1)]
        return [(i, (i + 1) % n) for i in range(n)]
    if family == "complete":
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    if family == "star":
        return [(0, i) for i in range(1, n)]
    if family == "grid":
        cols = int(params.get("cols", math.ceil(math.sqrt(n))))
        if cols < 1:
            raise ValueError("grid cols must be >= 1")
        edges = []
        for k in range(n):
            if (k + 1) % cols and k + 1 < n:
                edges.append((k, k + 1))
            if k + cols < n:
                edges.append((k, k + cols))
        return edges
    raise ValueError(f"unknown graph family {family!r}")


def _random_edges(family, n, params, rng):
    if family == "random_geometric":
        r = float(params["radius"])
        pts = rng.random((n, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        close = np.sum(diff * diff, axis=-1) <= r * r
        iu, ju = np.nonzero(np.triu(close, k=1))
        return list(zip(iu.tolist(), ju.tolist()))
    p = float(params["p"])
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def generate(family: str, n: int, params: dict | None = None, seed: int = 0) -> Topology:
    """Build a graph of the given family.

    Random families are redrawn from successive sub-streams of ``seed`` until
    connected; the number of redraws is kept in ``Topology.retries``.
    """
    params = dict(params or {})
    if n < 1:
        raise ValueError(f"node count must be >= 1, got {n}")
    if family not in FAMILIES:
        raise ValueError(f"unknown graph family {family!r}; expected one of {FAMILIES}")
    if family not in ("random_geometric", "erdos_renyi"):
        return Topology(n, tuple(_deterministic(family, n, params)))

    if family == "random_geometric":
        r = params.get("radius")
        if r is None or not (0.0 < float(r) <= math.sqrt(2.0)):
            raise ValueError(f"random_geometric radius must lie in (0, sqrt(2)], got {r}")
    else:
        p = params.get("p")
        if p is None or not (0.0 < float(p) <= 1.0):
            raise ValueError(f"erdos_renyi p must lie in (0, 1], got {p}")

    for attempt in range(MAX_RETRIES + 1):
        rng = stream(seed, GRAPH, attempt)
        topo = Topology(n, tuple(_random_edges(family, n, params, rng)), retries=attempt)
        if is_connected(topo):
            return topo
    raise GraphGenerationError(
        f"could not generate connected graph: family={family}, n={n}, params={params}, "
        f"seed={seed}, {MAX_RETRIES} retries exhausted"
    )


def smallest_connecting_radius(n, seed, start=0.15, step=0.05):
    """Smallest radius on the grid start, start+step, ... whose first draw is connected."""
    k = 0
    while True:
        r = round(start + k * step, 10)
        if r > math.sqrt(2.0):
            raise GraphGenerationError(f"no connecting radius up to sqrt(2) for n={n}, seed={seed}")
        rng = stream(seed, GRAPH, 0)
        if is_connected(Topology(n, tuple(_random_edges("random_geometric", n, {"radius": r}, rng)))):
            return r
        k += 1


def write_edgelist(topology: Topology, path) -> None:
    lines = [f"nodes {topology.n}"] + [f"{i} {j}" for i, j in topology.edges]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_edgelist(path) -> Topology:
    return parse_edgelist(Path(path).read_text())


def parse_edgelist(text: str) -> Topology:
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if n is None:
            if len(tok) != 2 or tok[0] != "nodes":
                raise ValueError(f"line {lineno}: expected header 'nodes N', got {raw!r}")
            n = int(tok[1])
            continue
        if len(tok) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {raw!r}")
        edges.append((int(tok[0]), int(tok[1])))
    if n is None:
        raise ValueError("missing 'nodes N' header")
    return Topology(n, tuple(edges))
