"""Joint law of absorption time ``Y`` and E+ visit count ``N``.

States ``0..k-1`` of the base chain form E+ (each entry increments ``N``) and
``k..p-1`` form E0. Counting is tracked by stacking copies ("levels") of the
state space: level ``L`` holds paths that have made ``L + 1`` entries into E+,
and absorption from level ``L`` realizes ``N = L + 1``.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConditioningError,
    ConvergenceDomainError,
    DomainError,
    NonConvergenceError,
)
from .matrixnum import mat_inv, row_exp, solve
from .phasetype import DphRep, PhRep, embedded_chain

__all__ = [
    "JointModel",
    "AugmentedRep",
    "ConditionalRep",
    "MixedMomentReport",
    "ErlangApproxParams",
    "marginal_n",
    "marginal_y",
    "augment",
    "joint_density",
    "joint_cdf",
    "conditional_rep",
    "conditional_density",
    "conditional_cdf",
    "conditional_mean",
    "mgf",
    "mixed_moment",
    "mixed_moment_report",
    "erlang_approximation",
]

ALPHA_ZERO_TOL = 1e-10
MAX_TERMS = 1_000_000


@dataclass(frozen=True, eq=False)
class JointModel:
    """Base representation plus the size of E+ (the leading ``eplus_size`` states)."""

    ph: PhRep
    eplus_size: int

    def __post_init__(self):
        k = int(self.eplus_size)
        p = self.ph.dim
        if not 1 <= k <= p:
            raise DomainError(f"eplus_size must lie in [1, {p}], got {self.eplus_size}")
        object.__setattr__(self, "eplus_size", k)
        if self.ph.alpha[k:].sum() > ALPHA_ZERO_TOL:
            raise DomainError("initial vector must put zero mass on E0 states")
        if k < p and self.ph.alpha[k:].any():
            alpha = self.ph.alpha.copy()
            alpha[k:] = 0.0
            object.__setattr__(self, "ph", PhRep(alpha / alpha.sum(), self.ph.t_mat))

    @classmethod
    def from_arrays(cls, alpha, t_mat, eplus_size):
        return cls(PhRep(alpha, t_mat), eplus_size)

    @classmethod
    def from_partition(cls, alpha, t_mat, eplus):
        """Build from an arbitrary labeling; ``eplus`` lists the E+ state indices.

        States are reordered so that E+ comes first (relative order kept).
        """
        alpha = np.asarray(alpha, dtype=float)
        t_mat = np.asarray(t_mat, dtype=float)
        p = t_mat.shape[0]
        eplus = sorted({int(i) for i in eplus})
        if not eplus or eplus[0] < 0 or eplus[-1] >= p:
            raise DomainError("E+ must be a non-empty subset of the state indices")
        order = eplus + [i for i in range(p) if i not in set(eplus)]
        return cls(PhRep(alpha[order], t_mat[np.ix_(order, order)]), len(eplus))

    @property
    def p(self):
        return self.ph.dim

    @property
    def alpha(self):
        return self.ph.alpha

    @property
    def t_mat(self):
        return self.ph.t_mat

    @property
    def exit_vector(self):
        return self.ph.exit_vector

    @property
    def reward(self):
        """Indicator of E+ membership (the count reward)."""
        r = np.zeros(self.p)
        r[: self.eplus_size] = 1.0
        return r

    def level_blocks(self):
        """``(D, U)``: within-level and level-raising blocks of the augmentation."""
        k = self.eplus_size
        t = self.t_mat
        d = t.copy()
        d[:, :k] = 0.0
        d[np.arange(k), np.arange(k)] = np.diag(t)[:k]
        u = np.zeros_like(t)
        u[:, :k] = t[:, :k]
        u[np.arange(k), np.arange(k)] = 0.0
        return d, u


@dataclass(frozen=True, eq=False)
class AugmentedRep:
    """Level-stacked representation for counts up to ``n_max``.

    ``exit_family[n - 1]`` is the exit vector for ``N = n`` and ``overflow`` the
    exit vector for ``N > n_max``; together they add up to ``-t_aug e``.
    """

    n_max: int
    p: int
    alpha_aug: np.ndarray
    t_aug: np.ndarray
    exit_family: np.ndarray
    overflow: np.ndarray

    @property
    def dim(self):
        return self.t_aug.shape[0]

    def exit_for(self, n):
        if not 1 <= n <= self.n_max:
            raise DomainError(f"count {n} outside 1..{self.n_max}")
        return self.exit_family[n - 1]

    def leading(self, levels):
        """``(alpha, T)`` restricted to the first ``levels`` levels.

        Levels never feed back into lower ones, so this is the exact law of the
        process while the count stays at most ``levels``.
        """
        d = self.p * levels
        return self.alpha_aug[:d], self.t_aug[:d, :d]


def marginal_y(model):
    return model.ph


def marginal_n(model):
    """DPH law of ``N`` from the jump chain censored to E+."""
    k = model.eplus_size
    q, _ = embedded_chain(model.ph)
    alpha = model.alpha
    if k == model.p:
        return DphRep(alpha, q)
    q_pp, q_p0 = q[:k, :k], q[:k, k:]
    q_0p, q_00 = q[k:, :k], q[k:, k:]
    through = solve(np.eye(model.p - k) - q_00, q_0p)
    q_tilde = q_pp + q_p0 @ through
    a_tilde = alpha[:k] + alpha[k:] @ through
    return DphRep(a_tilde, np.clip(q_tilde, 0.0, 1.0))


def _stack(model, levels):
    """``(alpha, T, level exit)`` for levels ``0..levels-1`` with the top level open.

    The top level keeps the split (entering E+ leaves the block), so the
    returned matrix is the leading sub-block of any larger augmentation.
    """
    p = model.p
    d, u = model.level_blocks()
    dim = p * levels
    t = np.zeros((dim, dim))
    for lev in range(levels):
        s = slice(lev * p, (lev + 1) * p)
        t[s, s] = d
        if lev + 1 < levels:
            t[s, (lev + 1) * p : (lev + 2) * p] = u
    alpha = np.zeros(dim)
    alpha[:p] = model.alpha
    return alpha, t


def _level_exit(model, levels, level):
    out = np.zeros(model.p * levels)
    out[level * model.p : (level + 1) * model.p] = model.exit_vector
    return out


def augment(model, n_max):
    """Augmented representation with ``n_max + 1`` levels (last one absorbs overflow)."""
    if int(n_max) != n_max or n_max < 1:
        raise DomainError(f"n_max must be an integer >= 1, got {n_max!r}")
    n_max = int(n_max)
    p = model.p
    levels = n_max + 1
    alpha, t = _stack(model, levels)
    last = slice(n_max * p, levels * p)
    t[last, last] = model.t_mat
    family = np.stack([_level_exit(model, levels, lev) for lev in range(n_max)])
    overflow = _level_exit(model, levels, n_max)
    for arr in (alpha, t, family, overflow):
        arr.setflags(write=False)
    return AugmentedRep(n_max, p, alpha, t, family, overflow)


def _check_y(y):
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise DomainError("time argument must be finite and non-negative")
    return y


def _check_n(n):
    n = np.asarray(n)
    if n.dtype.kind == "f":
        if np.any(n != np.round(n)):
            raise DomainError("count argument must be integral")
        n = n.astype(np.int64)
    if np.any(n < 1):
        raise DomainError("count argument must be >= 1")
    return n


def joint_density(model, y, n):
    """``f(y, n) = alpha~ exp(T~ y) t~(n)``; broadcasts over ``y`` and ``n``."""
    y = _check_y(y)
    n = _check_n(n)
    y_b, n_b = np.broadcast_arrays(y, n)
    out = np.zeros(y_b.shape)
    for level_count in np.unique(n_b):
        mask = n_b == level_count
        alpha, t = _stack(model, int(level_count))
        rows = row_exp(alpha, t, y_b[mask])
        exit = model.exit_vector
        out[mask] = rows[:, -model.p :] @ exit
    out = np.clip(out, 0.0, None)
    return float(out) if out.ndim == 0 else out


def joint_cdf(model, y, n):
    """``P(Y < y, N < n)``."""
    y = float(_check_y(y))
    n = int(_check_n(n))
    if n == 1:
        return 0.0
    levels = n - 1
    alpha, t = _stack(model, levels)
    exits = np.tile(model.exit_vector, levels)
    w = solve(-t, exits)
    row = row_exp(alpha, t, [y])[0]
    return float(np.clip(alpha @ w - row @ w, 0.0, 1.0))


def _reach(adj, start):
    seen = np.zeros(adj.shape[0], dtype=bool)
    stack = list(np.flatnonzero(start))
    seen[stack] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return seen


@dataclass(frozen=True, eq=False)
class ConditionalRep:
    """PH law of ``Y`` given ``N = n`` on a reduced, time-reversed state set.

    ``states`` lists the augmented indices kept; ``mass`` is ``P(N = n)``.
    Density ``gamma exp(A y) a`` with ``a = -A e``.
    """

    n: int
    gamma: np.ndarray
    a_mat: np.ndarray
    a_exit: np.ndarray
    states: np.ndarray
    mass: float

    def as_ph(self):
        return PhRep(self.gamma, self.a_mat)


def conditional_rep(model, n):
    n = int(_check_n(n))
    alpha, t = _stack(model, n)
    exit = _level_exit(model, n, n - 1)
    pi = solve(-t, alpha, left=True)
    mass = float(pi @ exit)
    if not mass > 1e-300:
        raise ConditioningError(f"P(N = {n}) is numerically zero ({mass:.3e})")
    adj = t != 0
    np.fill_diagonal(adj, False)
    fwd = _reach(adj, alpha > 0)
    back = _reach(adj.T, exit > 0)
    keep = np.flatnonzero(fwd & back & (pi > 0))
    pi_k = pi[keep]
    t_k = t[np.ix_(keep, keep)]
    gamma = pi_k * exit[keep] / mass
    a_mat = t_k.T * pi_k[None, :] / pi_k[:, None]
    a_exit = alpha[keep] / pi_k
    gamma = np.clip(gamma, 0.0, None)
    gamma /= gamma.sum()
    return ConditionalRep(n, gamma, a_mat, a_exit, keep, mass)


def conditional_density(model, y, n, rep=None):
    rep = rep or conditional_rep(model, n)
    y = _check_y(y)
    rows = row_exp(rep.gamma, rep.a_mat, np.atleast_1d(y))
    out = np.clip(rows @ rep.a_exit, 0.0, None)
    return float(out[0]) if y.ndim == 0 else out.reshape(y.shape)


def conditional_cdf(model, y, n, rep=None):
    rep = rep or conditional_rep(model, n)
    y = _check_y(y)
    rows = row_exp(rep.gamma, rep.a_mat, np.atleast_1d(y))
    out = np.clip(1.0 - rows.sum(axis=1), 0.0, 1.0)
    out[np.atleast_1d(y).ravel() == 0] = 0.0
    return float(out[0]) if y.ndim == 0 else out.reshape(y.shape)


def conditional_mean(model, n):
    rep = conditional_rep(model, n)
    return float(rep.gamma @ solve(-rep.a_mat, np.ones(rep.gamma.size)))


def mgf(model, theta1, theta2):
    """Joint MGF ``E[exp(theta1 Y + theta2 N)]``."""
    s = model.t_mat
    damp = np.exp(-theta2 * model.reward)
    c = theta1 * damp
    m = -np.diag(c) - (s - np.diag(np.diag(s)) + np.diag(np.diag(s) * damp))
    eig = np.linalg.eigvals(m)
    if not np.all(np.isfinite(eig)) or eig.real.min() <= 0:
        raise ConvergenceDomainError(
            f"MGF diverges at ({theta1}, {theta2}); smallest eigenvalue real part "
            f"{eig.real.min():.3e}"
        )
    return float(model.alpha @ solve(m, model.exit_vector))


@dataclass(frozen=True)
class MixedMomentReport:
    value: float
    terms: int
    tail_prob: float
    residual: float


def mixed_moment_report(model, tail_tol=1e-12):
    """``E[Y N]`` as a sum over count levels, stopped once ``P(N > n) < tail_tol``.

    ``residual`` is the part of ``E[Y N]`` carried by ``N > terms`` (computed from
    the closed-form total, so it is only indicative when tiny).
    """
    if not 0 < tail_tol <= 1e-3:
        raise DomainError(f"tail_tol must lie in (0, 1e-3], got {tail_tol}")
    d, u = model.level_blocks()
    neg_d = -d
    exit = model.exit_vector
    pi = solve(neg_d, model.alpha, left=True)
    rho = solve(neg_d, pi, left=True)
    total = 0.0
    n = 0
    tail = 1.0
    while True:
        n += 1
        total += n * float(rho @ exit)
        enter = pi @ u
        tail = float(enter.sum())
        if tail < tail_tol:
            break
        if n >= MAX_TERMS:
            raise NonConvergenceError(
                f"mixed moment needs more than {MAX_TERMS} count levels (tail {tail:.3e})"
            )
        pi_next = solve(neg_d, enter, left=True)
        rho = solve(neg_d, pi_next + rho @ u, left=True)
        pi = pi_next
    residual = _mixed_moment_closed(model) - total
    return MixedMomentReport(total, n, tail, residual)


def mixed_moment(model, tail_tol=1e-12):
    return mixed_moment_report(model, tail_tol).value


def _mixed_moment_closed(model):
    # E[YN] = sum over E+ entries of expected remaining plus elapsed time.
    green = mat_inv(-model.t_mat)
    lam = -np.diag(model.t_mat)
    r = model.reward
    a = model.alpha @ green
    w = green @ (lam * r)
    return float(a @ w + (a * lam * r) @ green.sum(axis=1) - a @ r)


@dataclass
class ErlangApproxParams:
    """Target for the Erlang-block construction.

    ``cond_cdfs[i - 1]`` is the conditional CDF of ``Y`` given ``N = i`` and
    ``count_probs[i - 1]`` is ``P(N = i)``; only the first ``b`` are used.
    """

    l: float
    m: int
    b: int
    cond_cdfs: Sequence[Callable[[np.ndarray], np.ndarray]]
    count_probs: Sequence[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.l > 0 or self.m < 1 or self.b < 1:
            raise DomainError("need l > 0, m >= 1 and b >= 1")
        if len(self.cond_cdfs) < self.b or len(self.count_probs) < self.b:
            raise DomainError(f"need conditional CDFs and count probabilities for 1..{self.b}")


def erlang_approximation(params):
    """Block-diagonal MMPH* model approximating a target joint law.

    Block ``i`` forces ``N = i``: it mixes Erlang chains of length
    ``max(k, i)`` and rate ``l`` whose first ``i`` stages are in E+.
    """
    l, m, b = float(params.l), int(params.m), int(params.b)
    probs = np.asarray(params.count_probs[:b], dtype=float)
    if probs.sum() <= 0 or np.any(probs < 0):
        raise DomainError("count probabilities must be non-negative with positive sum")
    probs = probs / probs.sum()
    grid = np.arange(m + 1) / l

    chains = []  # (initial weight, length, eplus stages)
    for i in range(1, b + 1):
        if probs[i - 1] == 0:
            continue
        cdf = np.asarray(params.cond_cdfs[i - 1](grid), dtype=float)
        cdf[0] = max(cdf[0], 0.0)
        top = cdf[m]
        if not top > 0:
            raise ConditioningError(f"block {i} is empty: F(m/l) = 0")
        weights = np.clip(np.diff(cdf), 0.0, None) / top
        for k in range(1, m + 1):
            if weights[k - 1] > 0:
                chains.append((probs[i - 1] * weights[k - 1], max(k, i), i))

    n_plus = sum(c[2] for c in chains)
    dim = sum(c[1] for c in chains)
    alpha = np.zeros(dim)
    t = np.zeros((dim, dim))
    next_plus, next_zero = 0, n_plus
    for weight, length, plus in chains:
        idx = list(range(next_plus, next_plus + plus))
        idx += list(range(next_zero, next_zero + length - plus))
        next_plus += plus
        next_zero += length - plus
        alpha[idx[0]] += weight
        for a, b_ in zip(idx[:-1], idx[1:]):
            t[a, b_] = l
        t[idx, idx] = -l
    alpha /= alpha.sum()
    return JointModel(PhRep(alpha, t), n_plus)
