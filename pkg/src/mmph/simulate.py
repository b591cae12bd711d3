"""Exact simulation of the underlying absorbing jump process."""

import numpy as np

from .errors import DomainError, ModelViolationError
from .phasetype import embedded_chain
from .samples import JointData, JointSample, SamplePath, SufficientStats

__all__ = [
    "make_rng",
    "sample_path",
    "path_to_sample",
    "path_statistics",
    "simulate",
    "generate_dataset",
    "cpu_time_scenario",
]

CHUNK = 1 << 18


def make_rng(seed=None):
    """Accept a seed, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _jump_table(model):
    p_mat, exit = embedded_chain(model.ph)
    cum = np.cumsum(np.hstack([p_mat, exit[:, None]]), axis=1)
    cum[:, -1] = 1.0
    return cum, -np.diag(model.t_mat)


def sample_path(model, rng=None):
    rng = make_rng(rng)
    cum, rates = _jump_table(model)
    p = model.p
    state = int(np.searchsorted(np.cumsum(model.alpha), rng.random(), side="right"))
    state = min(state, p - 1)
    states, sojourns = [], []
    while state < p:
        states.append(state)
        sojourns.append(rng.exponential(1.0 / rates[state]))
        state = int(np.searchsorted(cum[state], rng.random(), side="right"))
    return SamplePath(states, sojourns)


def path_to_sample(path, model):
    n = int(np.count_nonzero(path.states < model.eplus_size))
    if n == 0:
        raise ModelViolationError("path never visits an E+ state")
    return JointSample(path.duration, n)


def path_statistics(paths, model):
    """Complete-data statistics tallied from fully observed paths."""
    stats = SufficientStats.zeros(model.p)
    for path in paths:
        s = path.states
        stats.b[s[0]] += 1
        np.add.at(stats.z, s, path.sojourns)
        np.add.at(stats.n_trans, (s[:-1], s[1:]), 1.0)
        stats.n_exit[s[-1]] += 1
    return stats


def _simulate_chunk(model, count, rng, cum, rates, stats):
    p, k = model.p, model.eplus_size
    state = np.searchsorted(np.cumsum(model.alpha), rng.random(count), side="right")
    state = np.minimum(state, p - 1)
    y = np.zeros(count)
    n = np.zeros(count, dtype=np.int64)
    idx = np.arange(count)
    if stats is not None:
        np.add.at(stats.b, state, 1.0)
    while idx.size:
        u = rng.exponential(1.0, idx.size) / rates[state]
        y[idx] += u
        n[idx] += state < k
        nxt = (rng.random(idx.size)[:, None] >= cum[state]).sum(axis=1)
        if stats is not None:
            np.add.at(stats.z, state, u)
            done = nxt == p
            np.add.at(stats.n_exit, state[done], 1.0)
            np.add.at(stats.n_trans, (state[~done], nxt[~done]), 1.0)
        live = nxt < p
        idx, state = idx[live], nxt[live]
    return y, n


def simulate(model, count, rng=None, with_stats=False):
    """Draw ``count`` i.i.d. ``(Y, N)`` pairs, optionally with complete-data statistics."""
    if int(count) != count or count < 0:
        raise DomainError(f"count must be a non-negative integer, got {count!r}")
    rng = make_rng(rng)
    cum, rates = _jump_table(model)
    stats = SufficientStats.zeros(model.p) if with_stats else None
    ys, ns = [], []
    for start in range(0, int(count), CHUNK):
        size = min(CHUNK, int(count) - start)
        y, n = _simulate_chunk(model, size, rng, cum, rates, stats)
        ys.append(y)
        ns.append(n)
    y = np.concatenate(ys) if ys else np.zeros(0)
    n = np.concatenate(ns) if ns else np.zeros(0, dtype=np.int64)
    if np.any(n < 1):
        raise ModelViolationError("simulated path never visited an E+ state")
    data = JointData(y, n)
    return (data, stats) if with_stats else data


def generate_dataset(model, count, rng=None):
    return simulate(model, count, rng)


def cpu_time_scenario(count, n_value, rng=None, shape=4.0, rate=0.25):
    """Gamma(shape, rate) claim sizes with every count fixed at ``n_value``."""
    rng = make_rng(rng)
    y = rng.gamma(shape, 1.0 / rate, int(count))
    return JointData(y, np.full(int(count), int(n_value)))
