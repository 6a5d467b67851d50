"""Method-name embeddings trained on the aggregated call graph.

The objective pulls every method's vector towards the mean of its
callees' vectors and every vector's norm towards 1::

    L = alpha * sum_{m: C(m) nonempty} |v(m) - mean_{c in C(m)} v(c)|^2
        + (1 - alpha) * sum_m (1 - |v(m)|)^2

It is minimised by minibatch SGD; after each gradient step the batch
methods are nudged towards the orthogonal complement of a few randomly
drawn, unconnected names (negative samples).

Worked by hand on nodes {a, b}, edge a -> b, dim 1, v(a) = 0.5,
v(b) = 1.0, alpha = 0.5::

    L        = 0.5 * (0.5 - 1.0)^2 + 0.5 * ((1 - 0.5)^2 + (1 - 1.0)^2) = 0.25
    dL/dv(a) = 2 * 0.5 * (0.5 - 1.0) + 0.5 * (-2) * (1 - 0.5) * (+1)  = -1.0
    dL/dv(b) = -2 * 0.5 * (0.5 - 1.0) / 1 + 0                          = +0.5

The first gradient term of v(b) is the caller coupling: b is averaged
into a's callee mean, so moving b moves a's residual.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import IO, NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .acg import AggregatedCallGraph, UnknownNodeError

logger = logging.getLogger(__name__)

NORM_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    pass


class EmbeddingTable:
    """Name -> vector association, rows in lexicographic name order."""

    def __init__(self, names: Sequence[str], vectors: np.ndarray, dim: Optional[int] = None):
        vectors = np.asarray(vectors, dtype=np.float64)
        names = tuple(names)
        if vectors.ndim != 2:
            if vectors.size == 0 and dim is not None:
                vectors = vectors.reshape(0, dim)
            else:
                raise ValueError(f"vectors must be 2-D, got shape {vectors.shape}")
        if dim is not None and vectors.shape[1] != dim:
            raise ValueError(f"dimension mismatch: vectors have {vectors.shape[1]}, expected {dim}")
        if vectors.shape[0] != len(names):
            raise ValueError(f"{len(names)} names but {vectors.shape[0]} vectors")
        if vectors.shape[1] < 1:
            raise ValueError("dim must be >= 1")
        if any(a >= b for a, b in zip(names, names[1:])):
            raise ValueError("names must be unique and in lexicographic order")
        self.names = names
        self.vectors = vectors
        self.index = {name: i for i, name in enumerate(names)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def __getitem__(self, name: str) -> np.ndarray:
        return self.vectors[self.index[name]]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return (
            self.names == other.names
            and self.vectors.shape == other.vectors.shape
            and self.vectors.tobytes() == other.vectors.tobytes()
        )

    def __repr__(self) -> str:
        return f"EmbeddingTable(n={len(self)}, dim={self.dim})"

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.names, self.vectors.copy())


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 100
    loops: int = 5000
    batch_size: int = 200
    negatives: int = 10
    lr0: float = 0.75
    lr_decay: float = 0.04
    alpha: float = 0.5
    seed: int = 0
    # "epoch": lr *= (1 - lr_decay) after each pass over all nodes; "step": after every minibatch
    decay_per: str = "epoch"
    # "step": ``loops`` counts minibatch steps; "epoch": it counts passes over the node set
    loop_unit: str = "step"
    # full-graph loss is recorded every ``trace_every`` steps (0 = start and end only)
    trace_every: int = 100
    # step size of each negative update: "lr/k" splits one learning-rate step over the
    # k negatives of a method, "lr" applies the full rate per negative
    negative_eta: str = "lr/k"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.loops < 0:
            raise ValueError("loops must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.negatives < 0:
            raise ValueError("negatives must be >= 0")
        if not self.lr0 > 0:
            raise ValueError("lr0 must be > 0")
        if not 0 <= self.lr_decay < 1:
            raise ValueError("lr_decay must lie in [0, 1)")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.decay_per not in ("epoch", "step"):
            raise ValueError("decay_per must be 'epoch' or 'step'")
        if self.loop_unit not in ("step", "epoch"):
            raise ValueError("loop_unit must be 'step' or 'epoch'")
        if self.negative_eta not in ("lr/k", "lr"):
            raise ValueError("negative_eta must be 'lr/k' or 'lr'")

    def to_dict(self) -> dict:
        return asdict(self)


def init_embeddings(g: AggregatedCallGraph, dim: int, seed: int) -> EmbeddingTable:
    """Uniform draws in [-1, 1] / sqrt(dim), rows in canonical name order."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    vectors = rng.uniform(-1.0, 1.0, size=(len(g.nodes), dim)) / math.sqrt(dim)
    return EmbeddingTable(g.nodes, vectors, dim=dim)


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------


def _aligned(t: EmbeddingTable, g: AggregatedCallGraph) -> np.ndarray:
    if t.names == g.nodes:
        return t.vectors
    try:
        rows = [t.index[v] for v in g.nodes]
    except KeyError as exc:
        raise ValueError(f"embedding table has no vector for node {exc.args[0]!r}") from None
    return t.vectors[rows]


def callee_mean_operator(g: AggregatedCallGraph) -> sp.csr_matrix:
    """Sparse matrix A with ``(A @ V)[m]`` the mean callee vector of m
    (a zero row when m has no callees)."""
    indptr, indices = g.csr()
    deg = np.diff(indptr)
    weights = np.repeat(1.0 / np.maximum(deg, 1), deg)
    n = len(g.nodes)
    return sp.csr_matrix((weights, indices, indptr), shape=(n, n))


def _residuals(V: np.ndarray, g: AggregatedCallGraph, A=None) -> tuple[np.ndarray, sp.csr_matrix]:
    if A is None:
        A = callee_mean_operator(g)
    R = V - A @ V
    leaf = np.diff(g.csr()[0]) == 0
    R[leaf] = 0.0
    return R, A


def loss_matrix(V: np.ndarray, g: AggregatedCallGraph, alpha: float) -> float:
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != len(g.nodes):
        raise ValueError(f"dimension mismatch: {V.shape} for a graph of {len(g.nodes)} nodes")
    R, _ = _residuals(V, g)
    norms = np.linalg.norm(V, axis=1)
    return float(alpha * np.sum(R * R) + (1.0 - alpha) * np.sum((1.0 - norms) ** 2))


def loss(t: EmbeddingTable, g: AggregatedCallGraph, alpha: float) -> float:
    """Value of the objective for table ``t`` on graph ``g``."""
    return loss_matrix(_aligned(t, g), g, alpha)


def _norm_grad(v: np.ndarray, alpha: float) -> np.ndarray:
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    safe = np.where(norms < NORM_EPS, 1.0, norms)
    grad = -2.0 * (1.0 - alpha) * (1.0 - norms) * v / safe
    return np.where(norms < NORM_EPS, 0.0, grad)


def gradient_matrix(V: np.ndarray, g: AggregatedCallGraph, alpha: float) -> np.ndarray:
    """Full analytic gradient, one row per node."""
    V = np.asarray(V, dtype=np.float64)
    R, A = _residuals(V, g)
    return 2.0 * alpha * (R - A.T @ R) + _norm_grad(V, alpha)


def gradient(t: EmbeddingTable, g: AggregatedCallGraph, alpha: float, name: str) -> np.ndarray:
    """Partial derivative of the objective with respect to ``v(name)``.

    Three contributions: the pull of ``name`` towards its own callee
    mean, the coupling through each caller p (``name`` is one of the
    vectors averaged into p's callee mean), and the norm penalty.
    """
    if name not in g:
        raise UnknownNodeError(name)
    if name not in t:
        raise ValueError(f"embedding table has no vector for {name!r}")

    def callee_mean(m: str) -> np.ndarray:
        return np.mean([t[c] for c in g.callees(m)], axis=0)

    v = t[name]
    grad = np.zeros_like(v)
    if g.callees(name):
        grad += 2.0 * alpha * (v - callee_mean(name))
    for p in g.callers(name):
        grad -= 2.0 * alpha / len(g.callees(p)) * (t[p] - callee_mean(p))
    return grad + _norm_grad(v, alpha)


# ---------------------------------------------------------------------------
# Negative sampling
# ---------------------------------------------------------------------------


def sample_negatives(
    g: AggregatedCallGraph, name: str, k: int, rng: np.random.Generator
) -> list[str]:
    """Draw up to ``k`` distinct names not adjacent to ``name`` (in
    either direction) and different from it, uniformly without
    replacement."""
    if name not in g:
        raise UnknownNodeError(name)
    excluded = {name, *g.callees(name), *g.callers(name)}
    pool = [v for v in g.nodes if v not in excluded]
    if k <= 0 or not pool:
        return []
    if k >= len(pool):
        return [pool[i] for i in rng.permutation(len(pool))]
    return [pool[i] for i in rng.choice(len(pool), size=k, replace=False)]


def negative_update(v_m: np.ndarray, v_n: np.ndarray, eta: float) -> np.ndarray:
    """Remove a fraction ``eta`` of v_m's component along v_n."""
    v_m = np.asarray(v_m, dtype=np.float64)
    norm = float(np.linalg.norm(v_n))
    if norm == 0.0:
        return v_m.copy()
    n_hat = np.asarray(v_n, dtype=np.float64) / norm
    return v_m - eta * float(v_m @ n_hat) * n_hat


class _NegativeSampler:
    """Vectorised negative sampling for a whole minibatch.

    Candidates are drawn uniformly and redrawn while they hit the method
    itself, one of its neighbours, or an earlier pick in the same row;
    the accepted set is a uniform draw without replacement from the
    eligible pool.  Rows whose pool is small fall back to explicit
    enumeration.
    """

    MAX_ROUNDS = 64

    def __init__(self, g: AggregatedCallGraph):
        n = len(g.nodes)
        self.n = n
        indptr, indices = g.csr()
        src = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
        keys = np.concatenate([
            src * n + indices,
            indices * n + src,
            np.arange(n, dtype=np.int64) * (n + 1),
        ])
        self.keys = np.unique(keys)
        owner = self.keys // n
        # excluded count per node = self + distinct neighbours
        self.eligible = n - np.bincount(owner, minlength=n)
        self._pools: dict[int, np.ndarray] = {}

    def _blocked(self, rows: np.ndarray, cand: np.ndarray) -> np.ndarray:
        q = rows[:, None] * self.n + cand
        pos = np.searchsorted(self.keys, q)
        pos = np.minimum(pos, len(self.keys) - 1)
        return self.keys[pos] == q

    def _pool(self, m: int) -> np.ndarray:
        pool = self._pools.get(m)
        if pool is None:
            lo = np.searchsorted(self.keys, m * self.n)
            hi = np.searchsorted(self.keys, (m + 1) * self.n)
            blocked = self.keys[lo:hi] - m * self.n
            mask = np.ones(self.n, dtype=bool)
            mask[blocked] = False
            pool = np.flatnonzero(mask)
            self._pools[m] = pool
        return pool

    def sample(self, batch: np.ndarray, k: int, rng: np.random.Generator):
        b = len(batch)
        out = np.zeros((b, k), dtype=np.int64)
        valid = np.zeros((b, k), dtype=bool)
        if k == 0 or b == 0:
            return out, valid
        elig = self.eligible[batch]
        fast = (elig > k) & (elig * 4 >= self.n)
        slow_rows = list(np.flatnonzero(~fast))

        rows = np.flatnonzero(fast)
        if len(rows):
            ms = batch[rows]
            cand = rng.integers(0, self.n, size=(len(rows), k))
            for _ in range(self.MAX_ROUNDS):
                bad = self._blocked(ms, cand)
                order = np.argsort(cand, axis=1, kind="stable")
                srt = np.take_along_axis(cand, order, axis=1)
                dup_sorted = np.zeros_like(bad)
                dup_sorted[:, 1:] = srt[:, 1:] == srt[:, :-1]
                dup = np.zeros_like(bad)
                np.put_along_axis(dup, order, dup_sorted, axis=1)
                bad |= dup
                if not bad.any():
                    break
                cand[bad] = rng.integers(0, self.n, size=int(bad.sum()))
            else:
                still = np.flatnonzero(bad.any(axis=1))
                slow_rows.extend(rows[still].tolist())
                keep = np.ones(len(rows), dtype=bool)
                keep[still] = False
                rows, cand = rows[keep], cand[keep]
            out[rows] = cand
            valid[rows] = True

        for r in sorted(slow_rows):
            pool = self._pool(int(batch[r]))
            if len(pool) == 0:
                continue
            if len(pool) <= k:
                pick = pool[rng.permutation(len(pool))]
            else:
                pick = pool[rng.choice(len(pool), size=k, replace=False)]
            out[r, : len(pick)] = pick
            valid[r, : len(pick)] = True
        return out, valid


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


class TrainResult(NamedTuple):
    table: EmbeddingTable
    loss_trace: list  # (step, full loss) pairs


def _gather_callees(indptr, indices, batch):
    starts = indptr[batch]
    lengths = indptr[batch + 1] - starts
    total = int(lengths.sum())
    owner = np.repeat(np.arange(len(batch)), lengths)
    offsets = np.arange(total) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    flat = indices[np.repeat(starts, lengths) + offsets]
    return flat, owner, lengths


def train(g: AggregatedCallGraph, cfg: TrainConfig) -> TrainResult:
    """Minibatch SGD with negative sampling.

    Each step takes the next ``batch_size`` names of a seeded epoch
    permutation, descends on the objective terms owned by those names
    (their callee-mean term and norm term, which touch the name and its
    callees), then applies ``negative_update`` for ``negatives`` samples
    per batch name.  Batch names are processed in lockstep, one negative
    at a time, with negatives read after the gradient step.  Returns the
    table and a ``(step, loss)`` trace.
    """
    # overflow is detected explicitly and reported as divergence
    with np.errstate(over="ignore", invalid="ignore"):
        return _train(g, cfg)


def _train(g: AggregatedCallGraph, cfg: TrainConfig) -> TrainResult:
    n = len(g.nodes)
    if n == 0:
        raise ValueError("cannot train on an empty graph")
    table = init_embeddings(g, cfg.dim, cfg.seed)
    V = table.vectors.copy()
    alpha = cfg.alpha
    rng = np.random.default_rng([cfg.seed, 1])
    sampler = _NegativeSampler(g) if cfg.negatives > 0 else None
    indptr, indices = g.csr()
    A = callee_mean_operator(g)

    def full_loss() -> float:
        R, _ = _residuals(V, g, A)
        norms = np.linalg.norm(V, axis=1)
        return float(alpha * np.sum(R * R) + (1.0 - alpha) * np.sum((1.0 - norms) ** 2))

    trace = [(0, full_loss())]
    bs = min(cfg.batch_size, n)
    steps_per_epoch = -(-n // bs)
    total_steps = cfg.loops * steps_per_epoch if cfg.loop_unit == "epoch" else cfg.loops

    lr = cfg.lr0
    perm = rng.permutation(n)
    pos = 0
    for step in range(1, total_steps + 1):
        batch = perm[pos : pos + bs]
        pos += len(batch)

        flat, owner, lengths = _gather_callees(indptr, indices, batch)
        Vb = V[batch]
        has = lengths > 0
        R = np.zeros_like(Vb)
        if len(flat):
            seg = (np.cumsum(lengths) - lengths)[has]
            sums = np.add.reduceat(V[flat], seg, axis=0)
            R[has] = Vb[has] - sums / lengths[has, None]
        norms = np.linalg.norm(Vb, axis=1)
        batch_loss = alpha * np.sum(R * R) + (1.0 - alpha) * np.sum((1.0 - norms) ** 2)
        if not np.isfinite(batch_loss):
            raise TrainingDivergedError(f"non-finite loss at step {step} (lr={lr:.3g})")

        own = 2.0 * alpha * R + _norm_grad(Vb, alpha)
        coupled = -2.0 * alpha * R[owner] / lengths[owner, None]
        touched, inverse = np.unique(np.concatenate([batch, flat]), return_inverse=True)
        G = np.zeros((len(touched), V.shape[1]))
        np.add.at(G, inverse, np.concatenate([own, coupled]))
        V[touched] -= lr * G

        if sampler is not None:
            neg, valid = sampler.sample(batch, cfg.negatives, rng)
            vn = V[neg]
            nn = np.linalg.norm(vn, axis=2)
            usable = valid & (nn > 0)
            n_hat = np.divide(vn, nn[:, :, None], out=np.zeros_like(vn), where=usable[:, :, None])
            eta = lr / cfg.negatives if cfg.negative_eta == "lr/k" else lr
            vm = V[batch]
            for j in range(neg.shape[1]):
                proj = np.einsum("bd,bd->b", vm, n_hat[:, j])
                vm -= eta * proj[:, None] * n_hat[:, j]
            V[batch] = vm

        if not np.all(np.isfinite(V[batch])):
            raise TrainingDivergedError(f"non-finite embedding at step {step} (lr={lr:.3g})")

        if cfg.decay_per == "step":
            lr *= 1.0 - cfg.lr_decay
        if pos >= n:
            if cfg.decay_per == "epoch":
                lr *= 1.0 - cfg.lr_decay
            perm = rng.permutation(n)
            pos = 0

        if step == total_steps or (cfg.trace_every and step % cfg.trace_every == 0):
            value = full_loss()
            if not math.isfinite(value):
                raise TrainingDivergedError(f"non-finite loss at step {step} (lr={lr:.3g})")
            trace.append((step, value))
            logger.debug("step %d loss %.6g lr %.4g", step, value, lr)

    return TrainResult(EmbeddingTable(g.nodes, V), trace)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def write_table(t: EmbeddingTable, fp: IO[str]) -> None:
    fp.write(f"{len(t)} {t.dim}\n")
    for name, row in zip(t.names, t.vectors.tolist()):
        fp.write(name)
        for x in row:
            fp.write(" ")
            fp.write(repr(x))
        fp.write("\n")


def read_table(fp: IO[str]) -> EmbeddingTable:
    header = fp.readline()
    parts = header.split()
    try:
        count, dim = int(parts[0]), int(parts[1])
        if len(parts) != 2 or count < 0 or dim < 1:
            raise ValueError
    except (ValueError, IndexError):
        raise ValueError(f"line 1: expected '<count> <dim>', got {header.rstrip()!r}") from None
    names = []
    rows = []
    lineno = 1
    for lineno, line in enumerate(fp, 2):
        if len(names) == count:
            if line.strip():
                raise ValueError(f"line {lineno}: unexpected data after {count} vectors")
            continue
        fields = line.split()
        if len(fields) != dim + 1:
            raise ValueError(f"line {lineno}: expected name and {dim} values, got {len(fields)} fields")
        try:
            row = [float(x) for x in fields[1:]]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if not all(math.isfinite(x) for x in row):
            raise ValueError(f"line {lineno}: non-finite component")
        if names and fields[0] <= names[-1]:
            raise ValueError(f"line {lineno}: names not in strictly increasing order")
        names.append(fields[0])
        rows.append(row)
    if len(names) != count:
        raise ValueError(
            f"line {lineno + 1}: file ends after {len(names)} of {count} vectors"
        )
    return EmbeddingTable(names, np.asarray(rows, dtype=np.float64).reshape(count, dim), dim=dim)


def save(t: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        write_table(t, fp)


def load(path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fp:
        return read_table(fp)
