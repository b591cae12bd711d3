"""Maximum-likelihood fitting by EM: joint model and independent PH/DPH baselines."""

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    FitFailureError,
    MMPHError,
    ObservationLikelihoodError,
    StarvedStateError,
)
from .jointmodel import JointModel, _stack
from .matrixnum import mat_exp_scaled, mat_pow
from .phasetype import DphRep, PhRep
from .samples import SufficientStats, as_arrays
from .simulate import make_rng

__all__ = [
    "FitConfig",
    "FitResult",
    "IndependentFit",
    "StarvedStateWarning",
    "loglikelihood",
    "e_step",
    "m_step",
    "em_fit",
    "random_start",
    "fit_independent",
    "ph_loglikelihood",
    "dph_loglikelihood",
    "aic",
]

log = logging.getLogger(__name__)

LOG_FLOOR = math.log(1e-300)
UNDERFLOW = 1e-290
BATCH = 2048


class StarvedStateWarning(RuntimeWarning):
    pass


@dataclass
class FitConfig:
    p: int
    eplus_size: int
    max_iters: int = 15000
    restarts: int = 5
    seed: int | None = None
    ll_rel_tol: float = 1e-9
    tail_tol: float = 1e-12
    patience: int = 10

    def __post_init__(self):
        if not 1 <= self.eplus_size <= self.p:
            raise DomainError(f"eplus_size must lie in [1, p={self.p}]")
        if self.max_iters < 1 or self.restarts < 1:
            raise DomainError("max_iters and restarts must be >= 1")
        if self.ll_rel_tol < 0:
            raise DomainError("ll_rel_tol must be non-negative")


@dataclass
class FitResult:
    model: JointModel
    loglik_trace: list
    final_loglik: float
    restart_index: int
    iterations_used: int
    all_traces: list = field(default_factory=list)
    notes: list = field(default_factory=list)


@dataclass
class IndependentFit:
    ph: PhRep
    dph: DphRep
    loglik: float
    loglik_y: float
    loglik_n: float
    trace_y: list = field(default_factory=list)
    trace_n: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.ph, self.dph, self.loglik))


def aic(loglik, n_params):
    return 2.0 * n_params - 2.0 * loglik


# ---------------------------------------------------------------------------
# data preparation


@dataclass
class _Group:
    n: int
    y: np.ndarray  # unique values
    weight: np.ndarray  # multiplicities
    first: np.ndarray  # index of one original observation per unique value


def _prepare(data):
    if isinstance(data, list) and data and isinstance(data[0], _Group):
        return data
    y, n = as_arrays(data)
    if y.size == 0:
        raise DomainError("dataset is empty")
    groups = []
    for count in np.unique(n):
        idx = np.flatnonzero(n == count)
        uy, first, mult = np.unique(y[idx], return_index=True, return_counts=True)
        groups.append(_Group(int(count), uy, mult.astype(float), idx[first]))
    return groups


def _chunks(size):
    for start in range(0, size, BATCH):
        yield slice(start, min(size, start + BATCH))


# ---------------------------------------------------------------------------
# likelihood and E-step


def _exp_stack(block, ys):
    return mat_exp_scaled(block, ys)


def _scaled_exp(block, ys, shift):
    """``exp((block - shift I) y)``; the factor ``exp(shift y)`` is left out."""
    shifted = block - shift * np.eye(block.shape[0])
    return _exp_stack(shifted, ys)


def _densities(alpha, t_mat, exit, ys):
    """``(log f, ok)`` for a batch of horizons, rescaling where ``f`` underflows."""
    rows = np.einsum("i,nij->nj", alpha, _exp_stack(t_mat, ys))
    f = rows @ exit
    logf = np.full(ys.shape, -np.inf)
    good = f > UNDERFLOW
    logf[good] = np.log(f[good])
    low = ~good
    if low.any():
        c = np.diag(t_mat).max()
        rows_s = np.einsum("i,nij->nj", alpha, _scaled_exp(t_mat, ys[low], c))
        fs = rows_s @ exit
        with np.errstate(divide="ignore"):
            logf[low] = np.log(np.clip(fs, 0.0, None)) + c * ys[low]
    return logf


def loglikelihood(model, data, return_flag=False):
    """Sum of ``log f(y_m, n_m)``; zero densities are floored at ``log(1e-300)``."""
    groups = _prepare(data)
    total = 0.0
    floored = False
    for g in groups:
        alpha, t = _stack(model, g.n)
        exit = np.zeros(t.shape[0])
        exit[-model.p :] = model.exit_vector
        for s in _chunks(g.y.size):
            logf = _densities(alpha, t, exit, g.y[s])
            bad = ~np.isfinite(logf)
            if bad.any():
                floored = True
                logf[bad] = LOG_FLOOR
            total += float(g.weight[s] @ logf)
    if floored:
        warnings.warn("some observations have zero density; floored at log(1e-300)")
    return (total, floored) if return_flag else total


def _van_loan_terms(t_mat, alpha, exit, ys):
    """Per-horizon ``(f, alpha exp(Ty), exp(Ty) exit, J, log scale)``."""
    d = t_mat.shape[0]
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = t_mat
    block[d:, d:] = t_mat
    block[:d, d:] = np.outer(exit, alpha)
    e = _exp_stack(block, ys)
    fwd = np.einsum("i,nij->nj", alpha, e[:, :d, :d])
    bwd = e[:, :d, :d] @ exit
    f = fwd @ exit
    j = e[:, :d, d:]
    log_scale = np.zeros(ys.shape)
    low = ~(f > UNDERFLOW)
    if low.any():
        c = np.diag(t_mat).max()
        es = _scaled_exp(block, ys[low], c)
        fwd[low] = np.einsum("i,nij->nj", alpha, es[:, :d, :d])
        bwd[low] = es[:, :d, :d] @ exit
        f[low] = fwd[low] @ exit
        j[low] = es[:, :d, d:]
        log_scale[low] = c * ys[low]
    return f, fwd, bwd, j, log_scale


def _e_step(model, groups):
    p = model.p
    stats = SufficientStats.zeros(p)
    ll = 0.0
    for g in groups:
        alpha, t = _stack(model, g.n)
        d = t.shape[0]
        exit = np.zeros(d)
        exit[-p:] = model.exit_vector
        jsum = np.zeros((d, d))
        for s in _chunks(g.y.size):
            f, fwd, bwd, j, log_scale = _van_loan_terms(t, alpha, exit, g.y[s])
            if not np.all(f > 0):
                bad = int(g.first[s][np.flatnonzero(~(f > 0))[0]])
                raise ObservationLikelihoodError(
                    f"observation {bad} has zero density under the current model", bad
                )
            w = g.weight[s] / f
            ll += float(g.weight[s] @ (np.log(f) + log_scale))
            jsum += np.einsum("n,nij->ij", w, j)
            stats.b += alpha[:p] * (w @ bwd[:, :p])
            stats.n_exit += (w @ fwd[:, -p:]) * model.exit_vector
        # Fold augmented indices back onto base states.
        occ = np.diag(jsum).reshape(-1, p).sum(axis=0)
        trans = (t * jsum.T).reshape(g.n, p, g.n, p).sum(axis=(0, 2))
        np.fill_diagonal(trans, 0.0)
        stats.z += occ
        stats.n_trans += trans
    return stats, ll


def e_step(model, data, return_loglik=False):
    """Expected complete-data statistics given the observed ``(y, n)`` pairs."""
    stats, ll = _e_step(model, _prepare(data))
    return (stats, ll) if return_loglik else stats


# ---------------------------------------------------------------------------
# M-step


def _rates_from_stats(stats, prev_t, label):
    p = stats.p
    z = stats.z
    total_out = stats.n_trans.sum(axis=1) + stats.n_exit
    tiny = 1e-300 + 1e-14 * z.sum()
    t = np.zeros((p, p))
    frozen = []
    for i in range(p):
        if z[i] > tiny and total_out[i] > 0:
            t[i] = stats.n_trans[i] / z[i]
            t[i, i] = -total_out[i] / z[i]
        elif prev_t is not None:
            t[i] = prev_t[i]
            frozen.append(i)
        else:
            raise StarvedStateError(f"{label} state {i} received no expected sojourn")
    if frozen:
        warnings.warn(
            f"{label} states {frozen} starved; rates kept from the previous iterate",
            StarvedStateWarning,
        )
    return t


def m_step(stats, dataset_size, eplus_size, previous=None):
    """Closed-form update of ``(alpha, T)`` from sufficient statistics."""
    k = int(eplus_size)
    b = np.clip(np.asarray(stats.b, dtype=float), 0.0, None).copy()
    if dataset_size:
        b /= float(dataset_size)
    b[k:] = 0.0
    if not b.sum() > 0:
        raise StarvedStateError("no expected starts in E+ states")
    alpha = b / b.sum()
    prev_t = previous.t_mat if previous is not None else None
    t = _rates_from_stats(stats, prev_t, "joint")
    return JointModel(PhRep(alpha, t), k)


# ---------------------------------------------------------------------------
# driver


def random_start(p, eplus_size, scale, rng=None):
    """Random valid model on time scale ``scale``; alpha is uniform on E+."""
    if not scale > 0:
        raise DomainError("scale must be positive")
    rng = make_rng(rng)
    t = rng.uniform(0.0, 1.0, (p, p)) / scale
    np.fill_diagonal(t, 0.0)
    exit = rng.uniform(0.1, 1.0, p) / scale
    np.fill_diagonal(t, -(t.sum(axis=1) + exit))
    alpha = np.zeros(p)
    alpha[:eplus_size] = 1.0 / eplus_size
    return JointModel(PhRep(alpha, t), eplus_size)


class _Stopper:
    def __init__(self, tol, patience):
        self.tol, self.patience, self.calm = tol, patience, 0

    def done(self, trace):
        if self.tol <= 0 or len(trace) < 2:
            return False
        prev, cur = trace[-2], trace[-1]
        if abs(cur - prev) <= self.tol * max(abs(prev), 1e-300):
            self.calm += 1
        else:
            self.calm = 0
        return self.calm >= self.patience


def _run_em(init, groups, config, e_fn, m_fn, ll_fn):
    model = init
    trace = []
    stop = _Stopper(config.ll_rel_tol, config.patience)
    iters = 0
    converged = False
    while iters < config.max_iters:
        stats, ll = e_fn(model, groups)
        trace.append(ll)
        if stop.done(trace):
            converged = True
            break
        model = m_fn(stats, model)
        iters += 1
    if not converged:
        trace.append(ll_fn(model, groups))
    return model, trace, iters


def _best_of(starts, groups, config, e_fn, m_fn, ll_fn, label):
    results, diagnostics = [], []
    for idx, init in enumerate(starts):
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                model, trace, iters = _run_em(init, groups, config, e_fn, m_fn, ll_fn)
            notes = [str(w.message) for w in caught]
            if not np.isfinite(trace[-1]):
                raise FloatingPointError("non-finite log-likelihood")
            results.append((trace[-1], idx, model, trace, iters, notes))
            log.info("%s restart %d: loglik %.6f after %d iterations", label, idx, trace[-1], iters)
        except (MMPHError, ArithmeticError, np.linalg.LinAlgError) as exc:
            diagnostics.append(f"{label} restart {idx}: {type(exc).__name__}: {exc}")
            log.warning(diagnostics[-1])
    if not results:
        raise FitFailureError(f"all {label} restarts failed", diagnostics)
    best = max(results, key=lambda r: (r[0], -r[1]))
    return best, results, diagnostics


def _joint_ll(model, groups):
    return loglikelihood(model, groups)


def em_fit(data, config, starts=None):
    """Best-of-restarts EM fit of the joint model."""
    groups = _prepare(data)
    scale = float(np.median(np.concatenate([np.repeat(g.y, g.weight.astype(int)) for g in groups])))
    if starts is None:
        seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
        starts = [
            random_start(config.p, config.eplus_size, scale, np.random.default_rng(s))
            for s in seeds
        ]
    m_fn = lambda stats, prev: m_step(stats, None, config.eplus_size, prev)
    best, results, diagnostics = _best_of(starts, groups, config, _e_step, m_fn, _joint_ll, "joint")
    ll, idx, model, trace, iters, notes = best
    return FitResult(
        model=model,
        loglik_trace=trace,
        final_loglik=ll,
        restart_index=idx,
        iterations_used=iters,
        all_traces=[r[3] for r in sorted(results, key=lambda r: r[1])],
        notes=diagnostics + notes,
    )


# ---------------------------------------------------------------------------
# independent baselines


def _ph_groups(y):
    uy, mult = np.unique(y, return_counts=True)
    return [_Group(1, uy, mult.astype(float), np.zeros(uy.size, dtype=int))]


def _ph_e_step(rep, groups):
    p = rep.dim
    alpha, t, exit = rep.alpha, rep.t_mat, rep.exit_vector
    stats = SufficientStats.zeros(p)
    ll = 0.0
    jsum = np.zeros((p, p))
    for g in groups:
        for s in _chunks(g.y.size):
            f, fwd, bwd, j, log_scale = _van_loan_terms(t, alpha, exit, g.y[s])
            if not np.all(f > 0):
                raise ObservationLikelihoodError("observation with zero PH density")
            w = g.weight[s] / f
            ll += float(g.weight[s] @ (np.log(f) + log_scale))
            jsum += np.einsum("n,nij->ij", w, j)
            stats.b += alpha * (w @ bwd)
            stats.n_exit += (w @ fwd) * exit
    stats.z += np.diag(jsum)
    trans = t * jsum.T
    np.fill_diagonal(trans, 0.0)
    stats.n_trans += trans
    return stats, ll


def _ph_m_step(stats, prev):
    b = np.clip(stats.b, 0.0, None)
    t = _rates_from_stats(stats, prev.t_mat if prev is not None else None, "PH")
    return PhRep(b / b.sum(), t)


def _ph_ll(rep, groups):
    total = 0.0
    for g in groups:
        for s in _chunks(g.y.size):
            logf = _densities(rep.alpha, rep.t_mat, rep.exit_vector, g.y[s])
            total += float(g.weight[s] @ np.where(np.isfinite(logf), logf, LOG_FLOOR))
    return total


def _dph_e_step(rep, counts):
    """Expected starts, visits-out jumps and exits for the discrete chain."""
    q_mat, alpha, exit = rep.q_mat, rep.alpha, rep.exit_vector
    q = rep.dim
    values, weights = counts
    top = int(values.max())
    fwd = [alpha]
    for _ in range(top - 1):
        fwd.append(fwd[-1] @ q_mat)
    bwd = [exit]
    for _ in range(top - 1):
        bwd.append(q_mat @ bwd[-1])
    b = np.zeros(q)
    trans = np.zeros((q, q))
    out = np.zeros(q)
    ll = 0.0
    for n, w in zip(values, weights):
        n = int(n)
        f = float(alpha @ bwd[n - 1])
        if not f > 0:
            raise ObservationLikelihoodError(f"count {n} has zero probability")
        ll += w * math.log(f)
        b += w * alpha * bwd[n - 1] / f
        out += w * fwd[n - 1] * exit / f
        for step in range(n - 1):
            trans += w * np.outer(fwd[step], bwd[n - 2 - step]) * q_mat / f
    return (b, trans, out), ll


def _dph_m_step(stats, prev):
    b, trans, out = stats
    visits = trans.sum(axis=1) + out
    q_mat = np.zeros_like(trans)
    for i in range(b.size):
        if visits[i] > 1e-300:
            q_mat[i] = trans[i] / visits[i]
        else:
            q_mat[i] = prev.q_mat[i]
            warnings.warn(f"DPH state {i} starved; row kept", StarvedStateWarning)
    return DphRep(b / b.sum(), np.clip(q_mat, 0.0, 1.0))


def _dph_ll(rep, counts):
    values, weights = counts
    total = 0.0
    for n, w in zip(values, weights):
        f = float(rep.alpha @ mat_pow(rep.q_mat, int(n) - 1) @ rep.exit_vector)
        total += w * (math.log(f) if f > 1e-300 else LOG_FLOOR)
    return total


def ph_loglikelihood(rep, y):
    """Log-likelihood of ``y`` under a PH law (no count information)."""
    return _ph_ll(rep, _ph_groups(np.asarray(y, dtype=float)))


def dph_loglikelihood(rep, n):
    values, mult = np.unique(np.asarray(n, dtype=np.int64), return_counts=True)
    return _dph_ll(rep, (values, mult.astype(float)))


def _random_dph(q, rng):
    alpha = np.full(q, 1.0 / q)
    rows = rng.dirichlet(np.ones(q + 1), size=q)
    return DphRep(alpha, rows[:, :q])


def fit_independent(data, p, q_dim, config):
    """Separate PH fit of ``y`` (dimension ``p``) and DPH fit of ``n`` (dimension ``q_dim``)."""
    y, n = as_arrays(data)
    if y.size == 0:
        raise DomainError("dataset is empty")
    scale = float(np.median(y))
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    rngs = [np.random.default_rng(s) for s in seeds]
    ph_starts = [random_start(p, p, scale, r).ph for r in rngs]
    dph_starts = [_random_dph(q_dim, r) for r in rngs]

    groups = _ph_groups(y)
    best_y, _, _ = _best_of(ph_starts, groups, config, _ph_e_step, _ph_m_step, _ph_ll, "PH")
    values, mult = np.unique(n, return_counts=True)
    counts = (values, mult.astype(float))
    best_n, _, _ = _best_of(dph_starts, counts, config, _dph_e_step, _dph_m_step, _dph_ll, "DPH")
    return IndependentFit(
        ph=best_y[2],
        dph=best_n[2],
        loglik=best_y[0] + best_n[0],
        loglik_y=best_y[0],
        loglik_n=best_n[0],
        trace_y=best_y[3],
        trace_n=best_n[3],
    )


def joint_param_count(p, eplus_size):
    return p * p + eplus_size


def independent_param_count(p, q_dim):
    return p * p + p + q_dim * q_dim + q_dim
