"""Open Kitaev chains: couplings, spectra, zero modes and qubit encodings.

The chain of N sites owns 2N Majorana modes in the package-wide flattening
(site j -> indices 2j, 2j+1).  Encoded states prepend one decoherence-free
ancilla pair (m1, m2) in front of the chain, for 2N + 2 Majorana indices
total; the chain's zero-mode pair (m3, m4) is identified by the canonical
transform of the chain generator, frame-fixed so m3 sits on the left edge
with positive sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .fgs import CovarianceMatrix, ModeSpectrum, QuadraticGenerator

__all__ = [
    "BLOCH_AXES",
    "ChainParams",
    "EncodedPair",
    "build_generator",
    "diagonalize",
    "zero_mode_vectors",
    "is_topological",
    "encode_pair",
]

BLOCH_AXES = ("x", "y", "z")


@dataclass(frozen=True)
class ChainParams:
    """Chain couplings in units of the hopping scale J."""

    N: int
    mu: float
    delta: float
    J: float = 1.0
    site_mu: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("chain needs at least two sites")
        if not self.J > 0:
            raise ValueError("hopping scale J must be positive")
        if self.site_mu is not None:
            smu = tuple(float(v) for v in self.site_mu)
            if len(smu) != self.N:
                raise ValueError("site_mu must have one offset per site")
            object.__setattr__(self, "site_mu", smu)

    def to_dict(self) -> dict:
        d = {"N": self.N, "mu": self.mu, "delta": self.delta, "J": self.J}
        if self.site_mu is not None:
            d["site_mu"] = list(self.site_mu)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChainParams":
        smu = d.get("site_mu")
        return cls(N=int(d["N"]), mu=float(d["mu"]), delta=float(d["delta"]),
                   J=float(d.get("J", 1.0)),
                   site_mu=tuple(smu) if smu is not None else None)


def build_generator(params: ChainParams) -> QuadraticGenerator:
    """Quadratic generator of the open chain (2N x 2N, chain indices only).

    Three Majorana coupling families: J on (2j+1, 2j+2), -(mu + site offset)
    on (2j, 2j+1) and |delta| - J on (2j, 2j+3), all 0-indexed.
    """
    n = params.N
    smu = params.site_mu or (0.0,) * n
    t = np.zeros((2 * n, 2 * n))
    for j in range(n):
        t[2 * j, 2 * j + 1] = -(params.mu + smu[j])
    for j in range(n - 1):
        t[2 * j + 1, 2 * j + 2] = params.J
        t[2 * j, 2 * j + 3] = abs(params.delta) - params.J
    return QuadraticGenerator(t - t.T)


def diagonalize(gen: QuadraticGenerator) -> ModeSpectrum:
    """Quasiparticle spectrum with the zero-mode frame pinned to the left edge.

    Within the lowest-energy pair the two Majorana vectors may be mixed by any
    plane rotation; we rotate so the first one (m3) carries maximal weight on
    the left half of the chain and give it a positive leading sign, which
    makes the qubit encoding reproducible run to run.
    """
    o, eps = linalg.antisym_canonical(gen.data)
    u, v = o[0].copy(), o[1].copy()
    half = gen.data.shape[0] // 2
    ul, vl = u[:half], v[:half]
    quad = np.array([[ul @ ul, ul @ vl], [ul @ vl, vl @ vl]])
    w, vecs = np.linalg.eigh(quad)
    a, b = vecs[:, int(np.argmax(w))]
    u, v = a * u + b * v, -b * u + a * v
    lead = int(np.argmax(np.abs(u[:half])))
    if u[lead] < 0:
        u, v = -u, -v
    o = o.copy()
    o[0], o[1] = u, v
    return ModeSpectrum(eps, o)


def zero_mode_vectors(spec: ModeSpectrum) -> tuple[np.ndarray, np.ndarray]:
    """Majorana vectors (m3, m4) of the lowest-energy mode."""
    return spec.transform[0], spec.transform[1]


def is_topological(params: ChainParams) -> bool:
    """Strictly inside the topological phase: |mu/J| < 2 and nonzero pairing."""
    return abs(params.mu / params.J) < 2.0 and params.delta != 0.0


@dataclass(frozen=True)
class EncodedPair:
    """Covariance matrices of the two opposite encodings along one Bloch axis.

    Index layout: ancilla pair (m1, m2) first, then the 2N chain Majoranas in
    the site basis.  The ancilla mode is never touched by any channel in this
    package.
    """

    gamma_plus: CovarianceMatrix
    gamma_minus: CovarianceMatrix
    axis: str
    beta: float

    def __post_init__(self):
        if self.axis not in BLOCH_AXES:
            raise ValueError(f"axis must be one of {BLOCH_AXES}")
        if self.gamma_plus.modes != self.gamma_minus.modes:
            raise ValueError("mismatched encoded dimensions")

    @property
    def chain_sites(self) -> int:
        return self.gamma_plus.modes - 1

    def chain_blocks(self) -> tuple[CovarianceMatrix, CovarianceMatrix]:
        """Chain-only covariance matrices (ancilla indices dropped)."""
        return (CovarianceMatrix(self.gamma_plus.data[2:, 2:]),
                CovarianceMatrix(self.gamma_minus.data[2:, 2:]))


# qubit-block pairings (row, col, sign multiplier) for each axis, in the
# working frame (m1, m2, m3, m4); the second entry is the complementary
# pairing that makes the block pure
_QUBIT_PAIRINGS = {
    "x": (((2, 1), +1), ((0, 3), -1)),
    "y": (((2, 0), +1), ((1, 3), +1)),
    "z": (((0, 1), +1), ((2, 3), +1)),
}


def encode_pair(params: ChainParams, axis: str, beta: float = np.inf) -> EncodedPair:
    """Both encodings along a Bloch axis, optionally with thermal chain modes.

    The qubit block on (m1, m2, m3, m4) is pure at any temperature; the
    positive-energy chain modes sit at lam = tanh(beta eps / 2).
    """
    if axis not in BLOCH_AXES:
        raise ValueError(f"axis must be one of {BLOCH_AXES}")
    if not (beta > 0):
        raise ValueError("beta must be positive (or inf)")
    spec = diagonalize(build_generator(params))
    n = params.N
    dim = 2 * n + 2

    lam = (np.ones(n - 1) if np.isinf(beta)
           else np.tanh(beta * spec.energies[1:] / 2.0))

    def build(sign: int) -> CovarianceMatrix:
        work = np.zeros((dim, dim))
        for (r, c), mult in _QUBIT_PAIRINGS[axis]:
            work[r, c] = mult * sign
            work[c, r] = -mult * sign
        for g in range(1, n):
            i = 2 + 2 * g
            work[i, i + 1] = -lam[g - 1]
            work[i + 1, i] = lam[g - 1]
        full = np.eye(dim)
        full[2:, 2:] = spec.transform
        return CovarianceMatrix(full.T @ work @ full)

    return EncodedPair(build(+1), build(-1), axis, float(beta))
