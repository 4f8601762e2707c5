"""Fermionic Gaussian state calculus on covariance matrices.

Index convention (shared by every module in this package): Majorana mode
(j, sigma) of Dirac mode j is flattened to row/column 2j + sigma, 0-indexed,
i.e. Dirac mode j owns the adjacent pair (2j, 2j+1) with

    c_{2j}   = d_j + d_j^dag,      c_{2j+1} = -i (d_j - d_j^dag).

A Gaussian state with covariance matrix G has G_{mn} = (i/2) <[c_m, c_n]>;
in its eigenmode frame G is block diagonal with blocks [[0, -lam], [lam, 0]],
lam = tanh(beta eps / 2), so the vacuum of a positive-energy mode carries
lam = +1 and <i c_{2j} c_{2j+1}> = -1.

Quadratic Hamiltonians are H = (i/4) sum_{mn} T_{mn} c_m c_n with T real
antisymmetric; under the Schroedinger evolution exp(-iHt) the covariance
matrix transforms as G(t) = R G R^T with R = rotation(T, t) = exp(+T t)
(sign fixed against the dense Fock-space oracle, see tests).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linalg

__all__ = [
    "ATOL_ANTISYM",
    "ATOL_PHYSICAL",
    "ATOL_PURITY",
    "CovarianceMatrix",
    "QuadraticGenerator",
    "ModeSpectrum",
    "SupportMismatchWarning",
    "pfaffian",
    "wick_expectation",
    "overlap_trace",
    "thermal_cm",
    "evolve_cm",
    "canonical_form",
    "uhlmann_fidelity",
]

ATOL_ANTISYM = 1e-10
ATOL_GENERATOR = 1e-12
ATOL_PHYSICAL = 1e-9
ATOL_PURITY = 1e-8
_PURE_GAP = 1e-12

pfaffian = linalg.pfaffian


class SupportMismatchWarning(UserWarning):
    """Uhlmann fidelity hit orthogonal supports on a partially pure input."""


@dataclass(frozen=True)
class CovarianceMatrix:
    """Real antisymmetric table of Majorana second moments, 2M x 2M."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data, dtype=float))
        object.__setattr__(self, "data", data)
        n = data.shape[0]
        if data.ndim != 2 or data.shape != (n, n) or n % 2:
            raise ValueError("covariance matrix must be square with even dimension")
        linalg.check_antisymmetric(data, ATOL_ANTISYM)
        if n:
            smax = float(np.linalg.norm(data, 2))
            if smax > 1.0 + ATOL_PHYSICAL:
                raise ValueError(f"unphysical covariance matrix: largest singular value {smax}")

    @property
    def modes(self) -> int:
        return self.data.shape[0] // 2

    def is_pure(self, tol: float = ATOL_PURITY) -> bool:
        g = self.data
        return bool(np.max(np.abs(g @ g.T - np.eye(g.shape[0]))) <= tol)

    def canonical_values(self) -> np.ndarray:
        """All lam_alpha >= 0, descending."""
        lam = np.linalg.svd(self.data, compute_uv=False)[::2]
        return np.clip(lam, 0.0, 1.0)


@dataclass(frozen=True)
class QuadraticGenerator:
    """Real antisymmetric T with H = (i/4) sum T_{mn} c_m c_n, in units of J."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data, dtype=float))
        object.__setattr__(self, "data", data)
        n = data.shape[0]
        if data.ndim != 2 or data.shape != (n, n) or n % 2:
            raise ValueError("generator must be square with even dimension")
        linalg.check_antisymmetric(data, ATOL_GENERATOR)

    @property
    def modes(self) -> int:
        return self.data.shape[0] // 2

    @cached_property
    def _herm_eig(self) -> tuple[np.ndarray, np.ndarray]:
        # iT is Hermitian; eigh once, reused for every rotation time
        w, u = np.linalg.eigh(1j * self.data)
        return w, u

    def rotation(self, t: float) -> np.ndarray:
        """exp(+T t): the covariance-matrix rotation after evolving for time t."""
        w, u = self._herm_eig
        return np.real(u @ (np.exp(-1j * w * t)[:, None] * u.conj().T))


@dataclass(frozen=True)
class ModeSpectrum:
    """Quasiparticle energies (ascending, >= 0) and the canonicalizing transform.

    ``transform @ T @ transform.T`` is block diagonal with blocks
    [[0, eps_k], [-eps_k, 0]]; row 2k of ``transform`` gives Majorana one of
    mode k, row 2k+1 the other.
    """

    energies: np.ndarray
    transform: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "energies", np.asarray(self.energies, dtype=float))
        object.__setattr__(self, "transform", np.asarray(self.transform, dtype=float))
        if np.any(self.energies < -1e-12):
            raise ValueError("mode energies must be non-negative")
        if np.any(np.diff(self.energies) < -1e-12):
            raise ValueError("mode energies must be ascending")
        o = self.transform
        if np.max(np.abs(o @ o.T - np.eye(o.shape[0]))) > 1e-10:
            raise ValueError("transform is not orthogonal")


def wick_expectation(cm: CovarianceMatrix, indices) -> complex:
    """<c_{a_1} ... c_{a_2p}> = i^{-p} Pf(G restricted to the chosen modes)."""
    idx = list(indices)
    if len(set(idx)) != len(idx):
        raise ValueError("wick_expectation requires distinct Majorana indices")
    if len(idx) % 2:
        raise ValueError("wick_expectation needs an even number of indices")
    n = cm.data.shape[0]
    if any(i < 0 or i >= n for i in idx):
        raise ValueError("Majorana index out of range")
    p = len(idx) // 2
    sub = cm.data[np.ix_(idx, idx)]
    return complex((-1j) ** p * linalg.pfaffian(sub))


def overlap_trace(cm_rho: CovarianceMatrix, cm_sigma: CovarianceMatrix) -> float:
    """Tr[rho sigma] = +sqrt(det[(1 - G_rho G_sigma)/2])."""
    if cm_rho.modes != cm_sigma.modes:
        raise ValueError("overlap_trace needs equal mode counts")
    n = cm_rho.data.shape[0]
    d = float(np.real(np.linalg.det((np.eye(n) - cm_rho.data @ cm_sigma.data) / 2.0)))
    if d < -1e-12:
        raise ValueError(f"negative overlap determinant {d:.3e}: unphysical input")
    return float(np.sqrt(max(d, 0.0)))


def thermal_cm(gen: QuadraticGenerator, beta: float) -> CovarianceMatrix:
    """Gibbs covariance matrix of a quadratic generator; beta = inf gives the ground state."""
    if not (beta > 0):
        if beta == 0:
            return CovarianceMatrix(np.zeros_like(gen.data))
        raise ValueError("beta must be positive (or inf)")
    o, eps = linalg.antisym_canonical(gen.data)
    lam = np.ones_like(eps) if np.isinf(beta) else np.tanh(beta * eps / 2.0)
    return CovarianceMatrix(o.T @ linalg.antisym_blocks(-lam) @ o)


def evolve_cm(cm: CovarianceMatrix, gen: QuadraticGenerator, t: float) -> CovarianceMatrix:
    """Covariance matrix after evolving for time t under the generator."""
    if cm.modes != gen.modes:
        raise ValueError("dimension mismatch between state and generator")
    r = gen.rotation(t)
    return CovarianceMatrix(r @ cm.data @ r.T)


def canonical_form(cm: CovarianceMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal O and lam (descending, >= 0) with O G O^T = blocks [[0, -lam], [lam, 0]]."""
    o, vals = linalg.antisym_canonical(cm.data)
    # our canonical blocks are the negated generator convention; swapping the
    # two rows of each pair flips the block sign while keeping O orthogonal
    n = cm.data.shape[0]
    perm = np.arange(n).reshape(-1, 2)[:, ::-1].ravel()
    o = o[perm]
    order = np.argsort(-vals, kind="stable")
    perm2 = np.empty(n, dtype=int)
    perm2[0::2] = 2 * order
    perm2[1::2] = 2 * order + 1
    return o[perm2], np.clip(vals[order], 0.0, None)


def _sqrt_trace_product(lam: np.ndarray) -> float:
    """Tr sqrt of a Gaussian state from its canonical values."""
    lam = np.clip(lam, -1.0, 1.0)
    return float(np.prod(np.sqrt((1.0 + lam) / 2.0) + np.sqrt((1.0 - lam) / 2.0)))


def imaginary_time_values(g_rho: np.ndarray, g_sigma: np.ndarray) -> np.ndarray:
    """Canonical values of the Gaussian kernel composition exp(-H) sigma exp(-H).

    Here exp(-2H) is proportional to rho.  The composed state's covariance
    matrix is similar to C = (G_rho + G_sigma)(1 - G_rho G_sigma)^{-1}, with the
    similarity generated by (1 + G_rho^2)^{1/2}; both routes below agree where
    they overlap and the eigenvalue route also covers pure directions of rho.
    """
    n = g_rho.shape[0]
    c = np.linalg.solve((np.eye(n) - g_rho @ g_sigma).T, (g_rho + g_sigma).T).T
    s = np.eye(n) + g_rho @ g_rho
    w, u = np.linalg.eigh((s + s.T) / 2.0)
    w = np.clip(w, 0.0, None)
    if w[0] > 1e-8:
        root = np.sqrt(w)
        mid = (u * (1.0 / root)) @ (u.T @ c @ u) @ np.diag(root) @ u.T
        mid = (mid - mid.T) / 2.0
        lam = np.linalg.svd(mid, compute_uv=False)[::2]
    else:
        ev = np.linalg.eigvals(c)
        lam = np.sort(np.abs(ev.imag))[::-1][::2]
    return np.clip(lam, 0.0, 1.0)


def uhlmann_fidelity(cm_rho: CovarianceMatrix, cm_sigma: CovarianceMatrix) -> float:
    """Uhlmann fidelity Tr sqrt(sqrt(rho) sigma sqrt(rho)) of two Gaussian states.

    Pure inputs reduce to sqrt(Tr[rho sigma]); otherwise the imaginary-time
    kernel of rho is applied to sigma as a composition of Gaussian kernels
    (see :func:`imaginary_time_values`) and the result assembled from the
    overlap and the composed state's canonical values.  The algebra is
    certified against the dense Fock-space oracle in the test suite.
    """
    if cm_rho.modes != cm_sigma.modes:
        raise ValueError("uhlmann_fidelity needs equal mode counts")
    overlap = overlap_trace(cm_rho, cm_sigma)
    if cm_rho.is_pure() or cm_sigma.is_pure():
        return float(np.sqrt(overlap))

    lam_rho = cm_rho.canonical_values()
    lam_sigma = cm_sigma.canonical_values()
    semi_pure = max(lam_rho.max(initial=0.0), lam_sigma.max(initial=0.0)) >= 1.0 - _PURE_GAP
    if overlap < 1e-15:
        if semi_pure:
            warnings.warn(
                "orthogonal support on a partially pure input; returning 0",
                SupportMismatchWarning,
                stacklevel=2,
            )
        return 0.0

    lam_mid = imaginary_time_values(cm_rho.data, cm_sigma.data)
    fid = float(np.sqrt(overlap) * _sqrt_trace_product(lam_mid))
    return float(min(max(fid, 0.0), 1.0))
