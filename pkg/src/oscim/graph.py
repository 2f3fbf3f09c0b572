"""Problem instances, MaxCut/Ising conventions and the exhaustive oracle.

Convention used everywhere in oscim: a MaxCut edge is an antiferromagnetic
coupling ``W[i, j] = -1``.  With ``H(s) = -1/2 s^T W s`` this gives

    cut(s) = (|edges| - H(s)) / 2

so a larger cut is a lower Ising energy.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BudgetExceededError, ConventionError, DimensionError, InvalidInstanceError

MAXCUT_WEIGHT = -1.0
ORACLE_MAX_N = 24
_ORACLE_CHUNK = 1 << 15
_REGULAR_MAX_ATTEMPTS = 100_000


@dataclass(frozen=True, eq=False)
class IsingInstance:
    """Symmetric, zero-diagonal coupling matrix plus its edge list."""

    n: int
    weights: np.ndarray
    edges: tuple = field(default=())
    seed: int | None = None
    kind: str = "explicit"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if self.n < 2:
            raise InvalidInstanceError(f"need n >= 2, got {self.n}")
        if w.shape != (self.n, self.n):
            raise InvalidInstanceError(f"weights shape {w.shape} does not match n={self.n}")
        if not np.array_equal(w, w.T):
            raise InvalidInstanceError("weights must be symmetric")
        if np.any(np.diag(w) != 0):
            raise InvalidInstanceError("weights must have a zero diagonal")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if not self.edges:
            object.__setattr__(self, "edges", _edges_from_weights(w))
        else:
            edges = tuple((int(i), int(j), float(x)) for i, j, x in self.edges)
            if edges != _edges_from_weights(w):
                raise InvalidInstanceError("edge list and weight matrix disagree")
            object.__setattr__(self, "edges", edges)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @classmethod
    def from_edges(cls, n, edges, seed=None, kind="explicit") -> "IsingInstance":
        w = np.zeros((n, n))
        for i, j, x in edges:
            i, j = int(i), int(j)
            if not (0 <= i < j < n):
                raise InvalidInstanceError(f"edge ({i}, {j}) must satisfy 0 <= i < j < n")
            if w[i, j] != 0:
                raise InvalidInstanceError(f"duplicate edge ({i}, {j})")
            w[i, j] = w[j, i] = float(x)
        return cls(n=n, weights=w, seed=seed, kind=kind)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "kind": self.kind,
            "seed": self.seed,
            "edges": [[i, j, _json_number(x)] for i, j, x in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "IsingInstance":
        try:
            n = int(d["n"])
            edges = d.get("edges", [])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInstanceError(f"malformed instance: {exc}") from exc
        return cls.from_edges(n, edges, seed=d.get("seed"), kind=d.get("kind", "explicit"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "IsingInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def content_hash(self) -> str:
        """sha256 of the canonical JSON form, truncated like a git short hash."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:12]


def _json_number(x: float):
    return int(x) if float(x).is_integer() else float(x)


def _edges_from_weights(w: np.ndarray) -> tuple:
    iu, ju = np.triu_indices(w.shape[0], k=1)
    nz = w[iu, ju] != 0
    return tuple((int(i), int(j), float(x)) for i, j, x in zip(iu[nz], ju[nz], w[iu, ju][nz]))


def generate_er_graph(n: int, p: float, seed: int) -> IsingInstance:
    """Erdős–Rényi G(n, p) with every edge weighted -1."""
    if n < 2:
        raise InvalidInstanceError(f"need n >= 2, got {n}")
    if not 0.0 <= p <= 1.0:
        raise InvalidInstanceError(f"edge probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    w = np.zeros((n, n))
    w[iu[keep], ju[keep]] = MAXCUT_WEIGHT
    w = w + w.T
    return IsingInstance(n=n, weights=w, seed=seed, kind=f"erdos_renyi({p:g})")


def generate_regular_graph(n: int, degree: int, seed: int) -> IsingInstance:
    """Random ``degree``-regular graph by the pairing (configuration) model.

    Pairings containing a self-loop or a repeated edge are rejected and the
    draw is retried with the sub-seed ``[seed, attempt]``.
    """
    if n < 2:
        raise InvalidInstanceError(f"need n >= 2, got {n}")
    if degree < 0 or degree >= n:
        raise InvalidInstanceError(f"degree must satisfy 0 <= degree < n, got {degree}")
    if (n * degree) % 2:
        raise InvalidInstanceError(f"n * degree must be even, got {n} * {degree}")
    stubs = np.repeat(np.arange(n), degree)
    for attempt in range(_REGULAR_MAX_ATTEMPTS):
        rng = np.random.default_rng([seed, attempt])
        pairs = rng.permutation(stubs).reshape(-1, 2)
        a, b = pairs.min(axis=1), pairs.max(axis=1)
        if np.any(a == b):
            continue
        keys = a * n + b
        if np.unique(keys).size != keys.size:
            continue
        w = np.zeros((n, n))
        w[a, b] = MAXCUT_WEIGHT
        w = w + w.T
        return IsingInstance(n=n, weights=w, seed=seed, kind=f"regular({degree})")
    raise InvalidInstanceError(
        f"no simple {degree}-regular graph on {n} nodes after {_REGULAR_MAX_ATTEMPTS} pairings"
    )


def _as_spins(s, n=None) -> np.ndarray:
    s = np.asarray(s)
    if n is not None and s.shape[-1] != n:
        raise DimensionError(f"spin vector length {s.shape[-1]} does not match n={n}")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spins must be exactly +1 or -1")
    return s.astype(float)


def ising_energy(weights, s):
    """``-1/2 s^T W s``; ``s`` may carry leading batch axes."""
    w = np.asarray(weights, dtype=float)
    s = np.asarray(s, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or s.shape[-1] != w.shape[0]:
        raise DimensionError(f"cannot evaluate weights {w.shape} on spins {s.shape}")
    return -0.5 * np.einsum("...i,ij,...j->...", s, w, s)


def cut_value(instance: IsingInstance, s) -> int:
    """Number of edges whose endpoints carry opposite spins."""
    if any(abs(x) != 1 for _, _, x in instance.edges):
        raise ConventionError("cut_value needs unit-magnitude edge weights")
    s = _as_spins(s, instance.n)
    if not instance.edges:
        return 0
    e = np.asarray([(i, j) for i, j, _ in instance.edges])
    return int(np.count_nonzero(s[..., e[:, 0]] != s[..., e[:, 1]]))


def brute_force_ground_state(instance: IsingInstance, weights=None):
    """Exhaustive minimum of ``ising_energy`` with ``s[0]`` pinned to +1.

    Candidates are visited in lexicographic order of ``s[1:]`` with +1 before
    -1; the first minimiser is returned.
    """
    w = instance.weights if weights is None else np.asarray(weights, dtype=float)
    n = w.shape[0]
    if n > ORACLE_MAX_N:
        raise BudgetExceededError(f"brute force is limited to n <= {ORACLE_MAX_N}, got {n}")
    if w.shape != (instance.n, instance.n):
        raise DimensionError(f"weights {w.shape} do not match instance size {instance.n}")
    total = 1 << (n - 1)
    shifts = np.arange(n - 2, -1, -1, dtype=np.int64)
    best_e, best_s = np.inf, None
    for start in range(0, total, _ORACLE_CHUNK):
        idx = np.arange(start, min(start + _ORACLE_CHUNK, total), dtype=np.int64)
        bits = (idx[:, None] >> shifts) & 1
        spins = np.ones((idx.size, n))
        spins[:, 1:] = 1.0 - 2.0 * bits
        e = ising_energy(w, spins)
        k = int(np.argmin(e))
        if e[k] < best_e:
            best_e, best_s = float(e[k]), spins[k].astype(int)
    return best_s, best_e
