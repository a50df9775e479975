"""Finite-state Markov chain representation, matrix powers and sampling."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ChainError, DimensionMismatch, HorizonExceeded, NegativeEntry, NoConvergence, RowSumError

ROW_SUM_TOL = 1e-9
STATIONARY_MAX_ITER = 1_000_000


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def validate(transition, loss=None) -> tuple[np.ndarray, np.ndarray | None]:
    """Check a transition (and optional loss) matrix; return renormalized copies.

    Rows within ``ROW_SUM_TOL`` of one are rescaled so that they sum to one
    to machine precision.
    """
    P = np.asarray(transition, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionMismatch(f"transition matrix must be square, got shape {P.shape}")
    K = P.shape[0]
    if K < 2:
        raise DimensionMismatch(f"need at least 2 states, got {K}")
    if not np.all(np.isfinite(P)):
        raise ChainError("transition matrix has non-finite entries")
    if np.any(P < 0):
        i, j = np.argwhere(P < 0)[0]
        raise NegativeEntry(f"transition[{i},{j}] = {P[i, j]} is negative")
    if np.any(P > 1):
        i, j = np.argwhere(P > 1)[0]
        raise RowSumError(f"transition[{i},{j}] = {P[i, j]} exceeds 1")
    sums = P.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        i = bad[0]
        raise RowSumError(f"row {i} sums to {sums[i]!r}, not 1")
    P = P / sums[:, None]

    L = None
    if loss is not None:
        L = np.asarray(loss, dtype=float)
        if L.shape != (K, K):
            raise DimensionMismatch(f"loss matrix shape {L.shape} does not match {K} states")
        if not np.all(np.isfinite(L)):
            raise ChainError("loss matrix has non-finite entries")
        if np.any(L < 0):
            i, j = np.argwhere(L < 0)[0]
            raise NegativeEntry(f"loss[{i},{j}] = {L[i, j]} is negative")
        if np.any(np.diag(L) != 0):
            raise ChainError("loss matrix must have a zero diagonal")
    return P, L


@dataclass(frozen=True)
class ChainSpec:
    """Ground-truth world model: transition matrix plus prediction loss matrix.

    ``loss[j, k]`` is the cost of predicting state ``k`` while the true
    state is ``j``.
    """

    transition: np.ndarray
    loss: np.ndarray
    _cum: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        P, L = validate(self.transition, self.loss)
        object.__setattr__(self, "transition", _frozen(P))
        object.__setattr__(self, "loss", _frozen(L))
        object.__setattr__(self, "_cum", tuple(_cumulative_row(row) for row in P))

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    def table(self, horizon: int) -> NStepTable:
        return NStepTable.build(self.transition, horizon)


def _cumulative_row(row: np.ndarray) -> list[float]:
    cum = np.cumsum(row)
    # u in [0, 1) must never land on a zero-probability tail state
    last = int(np.flatnonzero(row > 0)[-1])
    cum[last:] = 1.0
    return cum.tolist()


@dataclass(frozen=True)
class NStepTable:
    """Precomputed matrix powers ``P^0 .. P^horizon`` (index n holds P^n)."""

    powers: np.ndarray

    @classmethod
    def build(cls, transition, horizon: int) -> NStepTable:
        P = np.asarray(transition, dtype=float)
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        K = P.shape[0]
        out = np.empty((horizon + 1, K, K))
        out[0] = np.eye(K)
        out[1] = P
        for n in range(2, horizon + 1):
            out[n] = out[n - 1] @ P
        return cls(_frozen(out))

    @property
    def horizon(self) -> int:
        return self.powers.shape[0] - 1

    @property
    def num_states(self) -> int:
        return self.powers.shape[1]

    @property
    def transition(self) -> np.ndarray:
        return self.powers[1]

    def power(self, n: int) -> np.ndarray:
        if n < 0 or n > self.horizon:
            raise HorizonExceeded(f"n={n} outside precomputed horizon 0..{self.horizon}")
        return self.powers[n]


def n_step_probs(spec: ChainSpec, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.linalg.matrix_power(spec.transition, n)


def closed_classes(transition) -> list[np.ndarray]:
    """Return the closed (recurrent) communicating classes of a chain."""
    P = np.asarray(transition)
    ncomp, labels = connected_components(P > 0, directed=True, connection="strong")
    classes = []
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        outside = np.setdiff1d(np.arange(P.shape[0]), members)
        if not np.any(P[np.ix_(members, outside)] > 0):
            classes.append(members)
    return classes


def stationary_distribution(spec_or_matrix, tol: float = 1e-12, max_iter: int = STATIONARY_MAX_ITER) -> np.ndarray:
    """Stationary distribution by power iteration.

    Iterates the lazy chain ``(I + P) / 2``, which shares the stationary
    distribution of ``P`` and is aperiodic.  Raises ``NoConvergence`` when
    the chain has more than one closed class (no unique answer) or when the
    residual ``||pi P - pi||_inf`` has not dropped below ``tol`` in time.
    """
    P = spec_or_matrix.transition if isinstance(spec_or_matrix, ChainSpec) else np.asarray(spec_or_matrix, dtype=float)
    K = P.shape[0]
    if len(closed_classes(P)) > 1:
        raise NoConvergence("chain has several closed classes; stationary distribution is not unique")
    lazy = 0.5 * (np.eye(K) + P)
    pi = np.full(K, 1.0 / K)
    for _ in range(max_iter):
        pi = pi @ lazy
        pi /= pi.sum()
        if np.max(np.abs(pi @ P - pi)) <= tol:
            return pi
    raise NoConvergence(f"power iteration did not reach tol={tol} in {max_iter} iterations")


def sample_next(spec: ChainSpec, current: int, rng: np.random.Generator) -> int:
    """Draw the next state from row ``current``; consumes one uniform variate."""
    return bisect_right(spec._cum[current], rng.random())


def sample_path(spec: ChainSpec, start: int, length: int, rng: np.random.Generator) -> np.ndarray:
    """State trajectory ``X_0 = start, X_1, ..., X_{length-1}``.

    Uses one uniform per transition, so it reproduces repeated
    ``sample_next`` calls on the same generator.
    """
    u = rng.random(max(length - 1, 0)).tolist()
    cum = spec._cum
    out = [0] * length
    if length:
        out[0] = x = start
        for t in range(1, length):
            x = bisect_right(cum[x], u[t - 1])
            out[t] = x
    return np.asarray(out, dtype=np.int64)


def random_chain(K: int, rng: np.random.Generator) -> np.ndarray:
    """Random transition matrix: i.i.d. Uniform(0,1) entries, rows normalized."""
    if K < 2:
        raise DimensionMismatch("need at least 2 states")
    M = rng.random((K, K))
    return M / M.sum(axis=1, keepdims=True)


def distance_loss(K: int) -> np.ndarray:
    """Loss ``|j - k|``: predicting a state m positions away costs m."""
    idx = np.arange(K)
    return np.abs(idx[:, None] - idx[None, :]).astype(float)


def unit_loss(K: int) -> np.ndarray:
    """Loss 1 for any wrong prediction, 0 for a correct one."""
    return 1.0 - np.eye(K)


FIVE_STATE_TRANSITION = np.array([
    [0.5, 0.5, 0.0, 0.0, 0.0],
    [0.1, 0.1, 0.6, 0.2, 0.0],
    [0.2, 0.1, 0.0, 0.5, 0.2],
    [0.1, 0.2, 0.2, 0.0, 0.5],
    [0.1, 0.1, 0.2, 0.3, 0.3],
])

# s_1 jumps to s_2 or s_3 with equal odds; both are absorbing
ABSORBING_TRANSITION = np.array([
    [0.0, 0.5, 0.5],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
])


def five_state_chain() -> ChainSpec:
    """Doubly-stochastic 5-state benchmark chain with distance loss."""
    return ChainSpec(FIVE_STATE_TRANSITION, distance_loss(5))


def absorbing_chain() -> ChainSpec:
    """3-state idempotent chain with two absorbing states and unit loss."""
    return ChainSpec(ABSORBING_TRANSITION, unit_loss(3))
