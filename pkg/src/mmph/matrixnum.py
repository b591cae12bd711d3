"""Dense matrix kernel: exponentials, inverses, powers and block integrals.

All routines take and return plain ``numpy`` arrays. ``mat_exp`` and
``van_loan_integrals`` accept stacks of matrices (leading batch axes), which is
how the E-step evaluates many observations at once.
"""

import numpy as np
import scipy.sparse
from scipy.sparse.linalg import expm_multiply

from .errors import DimensionError, DomainError, SingularityError

__all__ = [
    "mat_exp",
    "mat_exp_scaled",
    "row_exp",
    "mat_inv",
    "mat_pow",
    "solve",
    "van_loan_integral",
    "van_loan_integrals",
]

RCOND_MIN = 1e-14

# Higham (2005) scaling-and-squaring thresholds for Pade degrees 3..13.
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
        16380.0, 182.0, 1.0,
    ),
}


def _check_square(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2] or m.shape[-1] == 0:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


def _pade_uv(a, degree):
    b = _PADE[degree]
    eye = np.broadcast_to(np.eye(a.shape[-1]), a.shape)
    a2 = a @ a
    if degree == 13:
        a4 = a2 @ a2
        a6 = a4 @ a2
        u = a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        u = u + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye
        u = a @ u
        v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        v = v + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
        return u, v
    powers = [eye, a2]
    while len(powers) < (degree + 1) // 2:
        powers.append(powers[-1] @ a2)
    u = sum(b[2 * k + 1] * powers[k] for k in range(len(powers)))
    v = sum(b[2 * k] * powers[k] for k in range(len(powers)))
    return a @ u, v


def mat_exp(m):
    """Matrix exponential by scaling and squaring with Pade approximants.

    ``m`` may be a single ``(d, d)`` matrix or a stack ``(..., d, d)``; each
    matrix in a stack gets its own scaling exponent.
    """
    m = _check_square(m)
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix exponential of a matrix with non-finite entries")
    shape = m.shape
    a = m.reshape((-1,) + shape[-2:])
    norms = np.abs(a).sum(axis=-2).max(axis=-1)
    top = norms.max() if norms.size else 0.0

    for degree in (3, 5, 7, 9):
        if top <= _THETA[degree]:
            u, v = _pade_uv(a, degree)
            return np.linalg.solve(v - u, v + u).reshape(shape)

    with np.errstate(divide="ignore"):
        s = np.ceil(np.log2(norms / _THETA[13]))
    s = np.maximum(s, 0).astype(int)
    a = a / np.ldexp(1.0, s)[:, None, None]
    u, v = _pade_uv(a, 13)
    r = np.linalg.solve(v - u, v + u)
    return _square_back(r, s).reshape(shape)


def _square_back(r, s):
    for step in range(int(s.max()) if s.size else 0):
        idx = s > step
        if idx.all():
            r = r @ r
        else:
            r[idx] = r[idx] @ r[idx]
    return r


def mat_exp_scaled(m, ts):
    """``exp(m * t)`` for every ``t`` in the 1-D array ``ts``.

    Each scaled copy is a scalar multiple of ``m``, so the Pade(13) numerator
    and denominator are polynomials in one fixed matrix. Its powers are formed
    once and the per-``t`` combinations reduce to a single matrix product.
    """
    m = _check_square(m)
    if m.ndim != 2:
        raise DimensionError("mat_exp_scaled expects a single matrix")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix exponential of a matrix with non-finite entries")
    ts = np.asarray(ts, dtype=float).ravel()
    if not np.all(np.isfinite(ts)):
        raise DomainError("non-finite scaling factor")
    d = m.shape[0]
    norm = np.abs(m).sum(axis=0).max()
    if norm == 0 or ts.size == 0:
        return np.broadcast_to(np.eye(d), (ts.size, d, d)).copy()
    unit = m / norm
    powers = [np.eye(d), unit]
    for _ in range(12):
        powers.append(powers[-1] @ unit)
    powers = np.stack(powers).reshape(14, d * d)

    a_norm = np.abs(ts) * norm
    with np.errstate(divide="ignore"):
        s = np.ceil(np.log2(a_norm / _THETA[13]))
    s = np.maximum(np.nan_to_num(s, neginf=0.0), 0).astype(int)
    c = ts * norm / np.ldexp(1.0, s)
    b = np.asarray(_PADE[13])
    coef = c[:, None] ** np.arange(14)[None, :] * b[None, :]
    odd = coef.copy()
    odd[:, 0::2] = 0.0
    even = coef - odd
    u = (odd @ powers).reshape(-1, d, d)
    v = (even @ powers).reshape(-1, d, d)
    r = np.linalg.solve(v - u, v + u)
    r[ts == 0] = np.eye(d)
    return _square_back(r, s)


DENSE_LIMIT = 64


def row_exp(alpha, t_mat, ys):
    """Row vectors ``alpha exp(T y)`` stacked over ``ys``.

    Above ``DENSE_LIMIT`` states the action is computed with
    ``scipy.sparse.linalg.expm_multiply`` instead of forming ``exp(T y)``.
    """
    ys = np.asarray(ys, dtype=float).ravel()
    alpha = np.asarray(alpha, dtype=float)
    if t_mat.shape[0] <= DENSE_LIMIT:
        return np.einsum("i,nij->nj", alpha, mat_exp_scaled(t_mat, ys))
    tt = scipy.sparse.csr_matrix(np.asarray(t_mat).T)
    return np.stack([expm_multiply(tt * y, alpha) for y in ys])


def rcond(m):
    """Reciprocal 1-norm condition number (0 for singular input)."""
    m = _check_square(m)
    with np.errstate(all="ignore"):
        c = np.linalg.cond(m, 1)
    if not np.isfinite(c) or c <= 0:
        return 0.0
    return 1.0 / c


def mat_inv(m):
    """Inverse of a square matrix; raises ``SingularityError`` when ill-conditioned."""
    m = _check_square(m)
    rc = rcond(m)
    if rc <= RCOND_MIN:
        raise SingularityError("matrix is singular to working precision", rc)
    return np.linalg.inv(m)


def solve(m, b, left=False):
    """Solve ``m x = b`` (or ``x m = b`` with ``left=True``) with a condition guard."""
    m = _check_square(m)
    rc = rcond(m)
    if rc <= RCOND_MIN:
        raise SingularityError("matrix is singular to working precision", rc)
    b = np.asarray(b, dtype=float)
    if left:
        return np.linalg.solve(m.T, b.T).T
    return np.linalg.solve(m, b)


def mat_pow(m, k):
    """``m**k`` by binary exponentiation; ``m**0`` is the identity."""
    m = _check_square(m)
    if m.ndim != 2:
        raise DimensionError("mat_pow expects a single matrix")
    k = int(k)
    if k < 0:
        raise DomainError("negative matrix power")
    result = np.eye(m.shape[0])
    base = m.copy()
    while k:
        if k & 1:
            result = result @ base
        k >>= 1
        if k:
            base = base @ base
    return result


def _van_loan_block(t_mat, exit, init):
    t_mat = _check_square(t_mat, "t_mat")
    if t_mat.ndim != 2:
        raise DimensionError("t_mat must be a single matrix")
    d = t_mat.shape[0]
    exit = np.asarray(exit, dtype=float).ravel()
    init = np.asarray(init, dtype=float).ravel()
    if exit.shape != (d,) or init.shape != (d,):
        raise DimensionError(
            f"exit/init vectors must have length {d}, got {exit.shape} and {init.shape}"
        )
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = t_mat
    block[:d, d:] = np.outer(exit, init)
    block[d:, d:] = t_mat
    return block, d


def van_loan_integrals(t_mat, exit, init, ys):
    """Batched :func:`van_loan_integral` over a 1-D array of horizons.

    Returns stacks ``expT`` and ``J`` of shape ``(len(ys), d, d)``.
    """
    block, d = _van_loan_block(t_mat, exit, init)
    ys = np.asarray(ys, dtype=float).ravel()
    if np.any(ys < 0) or not np.all(np.isfinite(ys)):
        raise DomainError("integration horizon must be finite and non-negative")
    e = mat_exp_scaled(block, ys)
    return e[:, :d, :d], e[:, :d, d:]


def van_loan_integral(t_mat, exit, init, y):
    """Return ``(exp(T y), J(y))`` with ``J(y) = int_0^y exp(T(y-u)) exit init' exp(T u) du``.

    Both come out of one exponential of the ``2d x 2d`` block matrix
    ``[[T, exit init'], [0, T]] * y``.
    """
    if y < 0:
        raise DomainError(f"integration horizon must be non-negative, got {y}")
    exp_t, j = van_loan_integrals(t_mat, exit, init, [y])
    return exp_t[0], j[0]
