"""Dense linear algebra for antisymmetric matrices.

Everything here operates on plain ndarrays; the physical wrappers live in
:mod:`mml.fgs`.  The canonical block form used throughout is

    O A O^T = diag([[0, v_0], [-v_0, 0]], [[0, v_1], [-v_1, 0]], ...)

with O real orthogonal and v_k >= 0.  Covariance matrices use the negated
convention (blocks [[0, -lam], [lam, 0]]); the sign flip is handled by the
callers, not here.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

__all__ = [
    "check_antisymmetric",
    "pfaffian",
    "antisym_canonical",
    "antisym_blocks",
    "cayley_from_cm",
    "cm_from_cayley",
]


def check_antisymmetric(a: np.ndarray, tol: float) -> float:
    """Return the largest |A + A^T| entry, raising if it exceeds ``tol``."""
    dev = float(np.max(np.abs(a + a.T))) if a.size else 0.0
    if dev > tol:
        raise ValueError(f"matrix is not antisymmetric: max |A + A^T| = {dev:.3e} > {tol:.1e}")
    return dev


def pfaffian(a: np.ndarray, tol: float = 1e-10) -> float | complex:
    """Pfaffian of an even-dimensional antisymmetric matrix.

    Uses skew-symmetric tridiagonalization by Gaussian elimination with full
    row/column pivoting; the permutation sign is tracked exactly, so the sign
    of the result is reliable for both real and complex input.

    Parameters
    ----------
    a:
        Square antisymmetric matrix of even dimension (real or complex).
    tol:
        Largest tolerated |A + A^T| entry relative to the matrix scale.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("pfaffian requires a square matrix")
    n = a.shape[0]
    if n % 2 == 1:
        raise ValueError("odd-dimensional Pfaffian")
    if n == 0:
        return 1.0
    scale = max(float(np.max(np.abs(a))), 1.0)
    check_antisymmetric(a, tol * scale)

    m = a.astype(np.complex128 if np.iscomplexobj(a) else np.float64, copy=True)
    pf = 1.0 + 0.0j if np.iscomplexobj(a) else 1.0
    for k in range(0, n - 1, 2):
        # pivot the largest entry of column k below the diagonal into (k+1, k)
        kp = k + 1 + int(np.argmax(np.abs(m[k + 1:, k])))
        if kp != k + 1:
            m[[k + 1, kp], k:] = m[[kp, k + 1], k:]
            m[k:, [k + 1, kp]] = m[k:, [kp, k + 1]]
            pf = -pf
        if m[k + 1, k] == 0.0:
            return 0.0 * pf
        pf = pf * m[k, k + 1]
        if k + 2 < n:
            tau = m[k, k + 2:] / m[k, k + 1]
            col = m[k + 2:, k + 1]
            m[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return pf


def _pair_blocks(t: np.ndarray, tol: float) -> list[tuple[int, int, float]]:
    """Read 2x2 blocks off a quasi-diagonal real Schur factor.

    Returns (i, j, v) triples meaning block value v on rows/cols (i, j);
    leftover 1x1 (numerically zero) rows are paired up with v = 0.
    """
    n = t.shape[0]
    used = np.zeros(n, dtype=bool)
    blocks: list[tuple[int, int, float]] = []
    singles: list[int] = []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > tol:
            blocks.append((i, i + 1, float(t[i, i + 1])))
            used[i] = used[i + 1] = True
            i += 2
        else:
            singles.append(i)
            i += 1
    for a, b in zip(singles[::2], singles[1::2]):
        blocks.append((a, b, 0.0))
    return blocks


def antisym_canonical(a: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Canonical form of a real antisymmetric matrix.

    Returns ``(o, v)`` with o real orthogonal and v >= 0 (ascending) such that
    ``o @ a @ o.T`` is block diagonal with blocks [[0, v_k], [-v_k, 0]].
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n % 2:
        raise ValueError("antisymmetric canonical form needs even dimension")
    scale = max(float(np.max(np.abs(a))), 1.0) if a.size else 1.0
    t, z = sla.schur(a, output="real")
    rows = np.zeros((n, n))
    vals = np.zeros(n // 2)
    for k, (i, j, v) in enumerate(_pair_blocks(t, tol * scale)):
        vi, vj = z[:, i], z[:, j]
        if v < 0:
            v, vi = -v, -vi
        vals[k] = v
        rows[2 * k] = vi
        rows[2 * k + 1] = vj
    order = np.argsort(vals, kind="stable")
    perm = np.empty(n, dtype=int)
    perm[0::2] = 2 * order
    perm[1::2] = 2 * order + 1
    return rows[perm], vals[order]


def antisym_blocks(values: np.ndarray) -> np.ndarray:
    """Block-diagonal antisymmetric matrix with blocks [[0, v], [-v, 0]]."""
    values = np.asarray(values)
    n = 2 * values.size
    out = np.zeros((n, n), dtype=values.dtype)
    out[0::2, 1::2] = np.diag(values)
    out[1::2, 0::2] = -np.diag(values)
    return out


def orthogonal_log(o: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Real antisymmetric K with expm(K) = O for special orthogonal O.

    Works where the principal matrix logarithm fails: eigenvalue pairs at -1
    are combined into half-turn planes.  An odd number of -1 eigenvalues
    (det O = -1) raises.
    """
    o = np.asarray(o, dtype=float)
    n = o.shape[0]
    t, z = sla.schur(o, output="real")
    k = np.zeros((n, n))
    minus_ones: list[int] = []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > tol:
            theta = np.arctan2(t[i, i + 1], t[i, i])
            k[i, i + 1] = theta
            k[i + 1, i] = -theta
            i += 2
        else:
            if t[i, i] < 0:
                minus_ones.append(i)
            i += 1
    if len(minus_ones) % 2:
        raise ValueError("orthogonal_log requires det O = +1")
    for a, b in zip(minus_ones[::2], minus_ones[1::2]):
        k[a, b] = np.pi
        k[b, a] = -np.pi
    k = z @ k @ z.T
    k = (k - k.T) / 2.0
    if np.max(np.abs(sla.expm(k) - o)) > 1e-8:
        raise ValueError("orthogonal log reconstruction failed")
    return k


def cayley_from_cm(gamma: np.ndarray) -> np.ndarray:
    """Linear-group representative W = (1 - i G)(1 + i G)^{-1} of a covariance matrix.

    W is the matrix by which the corresponding Gaussian operator conjugates
    Majorana modes; products of Gaussian operators compose as reversed
    products of their W factors.  Singular exactly when G has unit canonical
    values (pure directions).
    """
    ig = 1j * np.asarray(gamma)
    n = ig.shape[0]
    return np.linalg.solve((np.eye(n) + ig).T, (np.eye(n) - ig).T).T


def cm_from_cayley(w: np.ndarray) -> np.ndarray:
    """Inverse of :func:`cayley_from_cm`: G = -i (1 - W)(1 + W)^{-1}."""
    w = np.asarray(w)
    n = w.shape[0]
    return -1j * np.linalg.solve((np.eye(n) + w).T, (np.eye(n) - w).T).T
