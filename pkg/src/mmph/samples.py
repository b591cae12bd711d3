"""Observation containers and EM sufficient statistics."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["JointSample", "JointData", "SamplePath", "SufficientStats", "as_arrays"]


@dataclass(frozen=True)
class JointSample:
    y: float
    n: int

    def __post_init__(self):
        if not self.y > 0 or int(self.n) != self.n or self.n < 1:
            raise DomainError(f"invalid sample (y={self.y}, n={self.n})")


@dataclass(frozen=True, eq=False)
class JointData:
    """Column-oriented collection of ``(y, n)`` observations."""

    y: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float).ravel()
        n = np.array(self.n).ravel()
        if y.shape != n.shape:
            raise DomainError("y and n columns differ in length")
        if n.size and n.dtype.kind == "f":
            if np.any(n != np.round(n)):
                raise DomainError("counts must be integers")
        n = n.astype(np.int64)
        if np.any(~np.isfinite(y)) or np.any(y <= 0):
            raise DomainError("observed y must be finite and positive")
        if np.any(n < 1):
            raise DomainError("observed counts must be >= 1")
        y.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "n", n)

    def __len__(self):
        return self.y.size

    def __iter__(self):
        for y, n in zip(self.y, self.n):
            yield JointSample(float(y), int(n))

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return JointSample(float(self.y[idx]), int(self.n[idx]))
        return JointData(self.y[idx], self.n[idx])


def as_arrays(data):
    """Return ``(y, n)`` arrays from a JointData, a sample sequence or a pair."""
    if isinstance(data, JointData):
        return data.y, data.n
    if isinstance(data, tuple) and len(data) == 2 and not isinstance(data[0], JointSample):
        d = JointData(*data)
        return d.y, d.n
    samples = list(data)
    d = JointData([s.y for s in samples], [s.n for s in samples])
    return d.y, d.n


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Visited transient states (0-based) and the time spent in each."""

    states: np.ndarray
    sojourns: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.int64).ravel()
        sojourns = np.asarray(self.sojourns, dtype=float).ravel()
        if states.size == 0 or states.size != sojourns.size:
            raise DomainError("path needs matching, non-empty state and sojourn lists")
        if np.any(sojourns <= 0):
            raise DomainError("sojourn times must be positive")
        if np.any(states[1:] == states[:-1]):
            raise DomainError("consecutive states in a path must differ")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "sojourns", sojourns)

    @property
    def duration(self):
        return float(self.sojourns.sum())


@dataclass
class SufficientStats:
    """Starts ``b``, occupation ``z``, jumps ``n_trans`` and exits ``n_exit`` per state."""

    b: np.ndarray
    z: np.ndarray
    n_trans: np.ndarray
    n_exit: np.ndarray

    @classmethod
    def zeros(cls, p):
        return cls(np.zeros(p), np.zeros(p), np.zeros((p, p)), np.zeros(p))

    @property
    def p(self):
        return self.b.size

    def __add__(self, other):
        return SufficientStats(
            self.b + other.b,
            self.z + other.z,
            self.n_trans + other.n_trans,
            self.n_exit + other.n_exit,
        )

    def as_vector(self):
        return np.concatenate([self.b, self.z, self.n_trans.ravel(), self.n_exit])
