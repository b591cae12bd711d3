"""Univariate continuous (PH) and discrete (DPH) phase-type distributions."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, DimensionError
from .matrixnum import mat_inv, mat_pow, row_exp

__all__ = [
    "PhRep",
    "DphRep",
    "ph_density",
    "ph_cdf",
    "ph_survival",
    "ph_mean",
    "ph_sojourn_vector",
    "dph_pmf",
    "dph_cdf",
    "dph_mean",
    "dph_visits_vector",
    "embedded_chain",
    "embedded_dph",
    "ph_second_moment",
]

ALPHA_TOL = 1e-8
EXIT_TOL = 1e-12


def _as_alpha(alpha, p):
    alpha = np.array(alpha, dtype=float).ravel()
    if alpha.shape != (p,):
        raise DimensionError(f"initial vector has length {alpha.size}, expected {p}")
    if not np.all(np.isfinite(alpha)) or np.any(alpha < -EXIT_TOL):
        raise DomainError("initial vector must be finite and non-negative")
    alpha = np.clip(alpha, 0.0, None)
    total = alpha.sum()
    if abs(total - 1.0) > ALPHA_TOL:
        raise DomainError(f"initial vector must sum to 1, got {total!r}")
    return alpha / total


@dataclass(frozen=True, eq=False)
class PhRep:
    """Continuous phase-type representation ``(alpha, T)``.

    ``alpha`` is renormalized to sum to exactly one, and exit rates in
    ``[-1e-12 * scale, 0)`` are treated as round-off and clamped to zero by
    adjusting the diagonal.
    """

    alpha: np.ndarray
    t_mat: np.ndarray

    def __post_init__(self):
        t = np.array(self.t_mat, dtype=float)
        if t.ndim == 0:
            t = t.reshape(1, 1)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise DimensionError(f"sub-intensity matrix must be square, got {t.shape}")
        if not np.all(np.isfinite(t)):
            raise DomainError("sub-intensity matrix has non-finite entries")
        p = t.shape[0]
        diag = np.diag(t).copy()
        if np.any(diag >= 0):
            raise DomainError("sub-intensity matrix needs a strictly negative diagonal")
        off = t - np.diag(diag)
        if np.any(off < 0):
            raise DomainError("sub-intensity matrix has negative off-diagonal rates")
        exit = -t.sum(axis=1)
        slack = EXIT_TOL * np.maximum(1.0, -diag)
        if np.any(exit < -slack):
            raise DomainError("sub-intensity matrix has positive row sums")
        low = exit < 0
        if low.any():
            t[low, low] += exit[low]  # restore exact row balance
        alpha = _as_alpha(self.alpha, p)
        t.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "t_mat", t)
        object.__setattr__(self, "alpha", alpha)
        # Green matrix doubles as the transience check.
        object.__setattr__(self, "_green", mat_inv(-t))

    @property
    def dim(self):
        return self.t_mat.shape[0]

    @property
    def exit_vector(self):
        return np.clip(-self.t_mat.sum(axis=1), 0.0, None)

    @property
    def green(self):
        """``U = (-T)^{-1}``, expected time in ``j`` when starting in ``i``."""
        return self._green


@dataclass(frozen=True, eq=False)
class DphRep:
    """Discrete phase-type representation ``(alpha, Q)`` supported on ``n >= 1``."""

    alpha: np.ndarray
    q_mat: np.ndarray

    def __post_init__(self):
        q = np.array(self.q_mat, dtype=float)
        if q.ndim == 0:
            q = q.reshape(1, 1)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise DimensionError(f"sub-transition matrix must be square, got {q.shape}")
        if not np.all(np.isfinite(q)) or np.any(q < 0) or np.any(q > 1):
            raise DomainError("sub-transition matrix entries must lie in [0, 1]")
        rows = q.sum(axis=1)
        if np.any(rows > 1 + EXIT_TOL):
            raise DomainError("sub-transition matrix has row sums above one")
        big = rows > 1
        if big.any():
            q[big] /= rows[big, None]
        alpha = _as_alpha(self.alpha, q.shape[0])
        q.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "q_mat", q)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "_green", mat_inv(np.eye(q.shape[0]) - q))

    @property
    def dim(self):
        return self.q_mat.shape[0]

    @property
    def exit_vector(self):
        return np.clip(1.0 - self.q_mat.sum(axis=1), 0.0, None)

    @property
    def green(self):
        """``V = (I - Q)^{-1}``, expected visits to ``j`` when starting in ``i``."""
        return self._green


def _check_times(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise DomainError("time argument must be finite and non-negative")
    return y


def _exp_rows(rep, y):
    """Row vectors ``alpha exp(T y)`` for scalar or 1-D ``y``."""
    y = _check_times(y)
    return y, row_exp(rep.alpha, rep.t_mat, np.atleast_1d(y).ravel())


def ph_density(rep, y):
    """``alpha exp(T y) t``; ``y`` may be a scalar or an array."""
    y, rows = _exp_rows(rep, y)
    out = np.clip(rows @ rep.exit_vector, 0.0, None)
    return float(out[0]) if y.ndim == 0 else out.reshape(y.shape)


def ph_survival(rep, y):
    """``alpha exp(T y) e``, the tail probability ``P(Y > y)``."""
    y, rows = _exp_rows(rep, y)
    out = np.clip(rows.sum(axis=1), 0.0, 1.0)
    return float(out[0]) if y.ndim == 0 else out.reshape(y.shape)


def ph_cdf(rep, y):
    """``1 - alpha exp(T y) e``."""
    s = ph_survival(rep, y)
    return 1.0 - s


def ph_sojourn_vector(rep):
    """Expected total time spent in each state, ``alpha (-T)^{-1}``."""
    return rep.alpha @ rep.green


def ph_mean(rep):
    return float(ph_sojourn_vector(rep).sum())


def _check_count(n, low=1):
    if int(n) != n or n < low:
        raise DomainError(f"count argument must be an integer >= {low}, got {n!r}")
    return int(n)


def dph_pmf(rep, n):
    """``alpha Q^(n-1) q`` for ``n >= 1``."""
    n = _check_count(n)
    return float(rep.alpha @ mat_pow(rep.q_mat, n - 1) @ rep.exit_vector)


def dph_cdf(rep, n):
    """``1 - alpha Q^n e``; defined for ``n >= 0`` with ``F(0) = 0``."""
    n = _check_count(n, low=0)
    return float(1.0 - rep.alpha @ mat_pow(rep.q_mat, n).sum(axis=1))


def dph_visits_vector(rep):
    """Expected number of visits to each state, ``alpha (I - Q)^{-1}``."""
    return rep.alpha @ rep.green


def dph_mean(rep):
    return float(dph_visits_vector(rep).sum())


def embedded_chain(rep):
    """Jump chain of a PH representation.

    Returns ``(P, exit_prob)`` with ``P[i, j] = -t_ij / t_ii`` off the diagonal,
    zero diagonal, and ``exit_prob[i] = -t_i / t_ii``.
    """
    t = rep.t_mat if isinstance(rep, PhRep) else np.asarray(rep, dtype=float)
    diag = np.diag(t)
    if np.any(diag == 0):
        raise DomainError("embedded chain undefined for a zero diagonal rate")
    p_mat = -t / diag[:, None]
    np.fill_diagonal(p_mat, 0.0)
    exit = np.clip(-t.sum(axis=1), 0.0, None)
    return p_mat, exit / -diag


def embedded_dph(rep):
    """DPH law of the number of jumps of ``rep`` (its embedded chain started at ``alpha``)."""
    p_mat, _ = embedded_chain(rep)
    return DphRep(rep.alpha, p_mat)


def ph_second_moment(rep):
    """``E[Y^2] = 2 alpha U^2 e``."""
    u = rep.green
    return float(2.0 * rep.alpha @ u @ u.sum(axis=1))

