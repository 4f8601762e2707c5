"""Dense Fock-space reference implementation.

Builds explicit 2^M-dimensional Majorana operators, Hamiltonians, channels
and recovery maps so that every covariance-matrix computation in the package
can be checked against brute-force linear algebra at small sizes.  Nothing
here is meant to be fast; the mode count is capped so a single evaluation
stays well under a minute.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .fgs import CovarianceMatrix, QuadraticGenerator
from .kitaev import ChainParams, EncodedPair, build_generator, diagonalize, zero_mode_vectors

MAX_MODES = 12

_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def _kron_chain(ops) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


@dataclass(frozen=True)
class MajoranaRep:
    """Dense Majorana matrices c_0 ... c_{2M-1} with {c_m, c_n} = 2 delta_{mn}."""

    modes: int
    ops: tuple

    @property
    def dim(self) -> int:
        return 2 ** self.modes

    def annihilation(self, j: int) -> np.ndarray:
        return (self.ops[2 * j] + 1j * self.ops[2 * j + 1]) / 2.0

    def parity(self) -> np.ndarray:
        p = _kron_chain([np.eye(2, dtype=complex)] * self.modes) * (1j) ** self.modes
        for c in self.ops:
            p = p @ c
        return p


@lru_cache(maxsize=8)
def majorana_rep(modes: int) -> MajoranaRep:
    if modes > MAX_MODES:
        raise ValueError(f"dense oracle capped at {MAX_MODES} modes, got {modes}")
    eye = np.eye(2, dtype=complex)
    ops = []
    for j in range(modes):
        before = [_Z] * j
        after = [eye] * (modes - j - 1)
        ops.append(_kron_chain(before + [_X] + after))
        ops.append(_kron_chain(before + [_Y] + after))
    rep = MajoranaRep(modes, tuple(ops))
    dev = 0.0
    for m, cm in enumerate(ops):
        for n, cn in enumerate(ops):
            anti = cm @ cn + cn @ cm
            target = 2.0 * np.eye(rep.dim) if m == n else 0.0
            dev = max(dev, float(np.max(np.abs(anti - target))))
    if dev > 1e-12:
        raise AssertionError(f"Majorana anticommutation violated by {dev:.2e}")
    return rep


def dense_hamiltonian(gen: QuadraticGenerator) -> np.ndarray:
    """(i/4) sum_{mn} T_{mn} c_m c_n as an explicit Hermitian matrix."""
    rep = majorana_rep(gen.modes)
    h = np.zeros((rep.dim, rep.dim), dtype=complex)
    t = gen.data
    for m in range(2 * gen.modes):
        for n in range(m + 1, 2 * gen.modes):
            if t[m, n] != 0.0:
                h += (0.5j * t[m, n]) * (rep.ops[m] @ rep.ops[n])
    return h


def dense_cm(rho: np.ndarray, rep: MajoranaRep) -> CovarianceMatrix:
    """Covariance matrix (i/2) Tr[rho [c_m, c_n]] of a dense state."""
    n = 2 * rep.modes
    g = np.zeros((n, n))
    for m in range(n):
        for k in range(m + 1, n):
            val = 0.5j * np.trace(rho @ (rep.ops[m] @ rep.ops[k] - rep.ops[k] @ rep.ops[m]))
            g[m, k] = val.real
            g[k, m] = -val.real
    return CovarianceMatrix(g)


def gaussian_state(cm: CovarianceMatrix, transform: np.ndarray | None = None,
                   values: np.ndarray | None = None) -> np.ndarray:
    """Dense density matrix of the Gaussian state with the given covariance matrix."""
    from . import linalg

    rep = majorana_rep(cm.modes)
    if transform is None or values is None:
        o, vals = linalg.antisym_canonical(cm.data)
        lam = -vals  # canonical blocks of a CM carry [[0, -lam], [lam, 0]]
    else:
        o, lam = transform, values
    rho = np.eye(rep.dim, dtype=complex)
    rotated = [sum(o[r, l] * rep.ops[l] for l in range(2 * cm.modes)) for r in range(2 * cm.modes)]
    for k in range(cm.modes):
        rho = rho @ (np.eye(rep.dim) - 1j * lam[k] * rotated[2 * k] @ rotated[2 * k + 1]) / 2.0
    return rho


@dataclass(frozen=True)
class DenseGroundPair:
    """|0>, |1> ground-pair vectors plus the operators tied to the shared frame."""

    zero: np.ndarray
    one: np.ndarray
    a_op: np.ndarray
    b_op: np.ndarray
    rep: MajoranaRep
    sigma: tuple  # encoded Pauli triple (x, y, z), both parity sectors
    m_ops: tuple  # dense m1, m2, m3, m4
    spec_energies: np.ndarray
    spec_transform: np.ndarray


def dense_ground_pair(params: ChainParams) -> DenseGroundPair:
    """Explicit ground-state qubit basis of ancilla + chain.

    The chain's canonical frame (and hence the zero-mode pair) is shared with
    :func:`mml.kitaev.diagonalize`, so covariance-level and dense encodings
    can be compared entry by entry.
    """
    spec = diagonalize(build_generator(params))
    modes = params.N + 1
    rep = majorana_rep(modes)
    # parent Hamiltonian: every canonical mode (ancilla included) at energy 1
    t_parent = np.zeros((2 * modes, 2 * modes))
    t_parent[0, 1], t_parent[1, 0] = 1.0, -1.0
    o = spec.transform
    blocks = np.zeros_like(o)
    for k in range(params.N):
        blocks[2 * k, 2 * k + 1], blocks[2 * k + 1, 2 * k] = 1.0, -1.0
    t_parent[2:, 2:] = o.T @ blocks @ o
    h_parent = dense_hamiltonian(QuadraticGenerator(t_parent))
    w, v = np.linalg.eigh(h_parent)
    if w[1] - w[0] < 1e-9:
        raise AssertionError("parent Hamiltonian ground state is not unique")
    zero = v[:, 0]
    zero = zero / np.linalg.norm(zero)
    # fix the arbitrary eigenvector phase: largest component real positive
    k = int(np.argmax(np.abs(zero)))
    zero = zero * (abs(zero[k]) / zero[k])

    m3, m4 = zero_mode_vectors(spec)
    chain_ops = rep.ops[2:]
    m3_op = sum(m3[l] * chain_ops[l] for l in range(2 * params.N))
    m4_op = sum(m4[l] * chain_ops[l] for l in range(2 * params.N))
    a_op = rep.annihilation(0)
    b_op = (m3_op + 1j * m4_op) / 2.0
    one = a_op.conj().T @ b_op.conj().T @ zero
    nrm = np.linalg.norm(one)
    if abs(nrm - 1.0) > 1e-9:
        raise AssertionError("a^dag b^dag |0> is not normalized; frame construction broken")
    one = one / nrm

    m1_op, m2_op = rep.ops[0], rep.ops[1]
    sigma = (
        1j * m3_op @ m2_op,
        1j * m3_op @ m1_op,
        1j * m1_op @ m2_op,
    )
    return DenseGroundPair(zero, one, a_op, b_op, rep, sigma,
                           (m1_op, m2_op, m3_op, m4_op),
                           spec.energies, spec.transform)


# qubit factor pairings per axis: ((op_a, op_b), sign multiplier) meaning a
# commuting projector factor (1 + mult * sign * i m_a m_b) / 2
_QUBIT_FACTORS = {
    "x": (((2, 1), +1), ((0, 3), -1)),
    "y": (((2, 0), +1), ((1, 3), +1)),
    "z": (((0, 1), +1), ((2, 3), +1)),
}


def dense_encoded_pure(pair: DenseGroundPair, axis: str, sign: int) -> np.ndarray:
    """Encoded Bloch-axis state built directly from the |0>, |1> vectors."""
    if axis == "x":
        psi = (pair.zero + sign * pair.one) / np.sqrt(2.0)
    elif axis == "y":
        psi = (pair.zero - 1j * sign * pair.one) / np.sqrt(2.0)
    elif axis == "z":
        psi = pair.one if sign > 0 else pair.zero
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return np.outer(psi, psi.conj())


def dense_encoded_state(pair: DenseGroundPair, axis: str, sign: int,
                        beta: float = np.inf) -> np.ndarray:
    """Encoded state as a product of commuting Gaussian factors.

    The qubit block contributes two projector factors on (m1..m4); each
    positive-energy chain mode contributes a Gibbs factor at
    lam = tanh(beta eps / 2).  At beta = inf this reproduces
    :func:`dense_encoded_pure` (asserted in the tests).
    """
    if axis not in _QUBIT_FACTORS:
        raise ValueError(f"unknown axis {axis!r}")
    rep = pair.rep
    dim = rep.dim
    eye = np.eye(dim, dtype=complex)
    rho = eye
    for (ia, ib), mult in _QUBIT_FACTORS[axis]:
        rho = rho @ (eye + mult * sign * 1j * pair.m_ops[ia] @ pair.m_ops[ib]) / 2.0
    chain_ops = rep.ops[2:]
    modes = pair.spec_energies.size
    o = pair.spec_transform
    for k in range(1, modes):
        u = sum(o[2 * k, l] * chain_ops[l] for l in range(2 * modes))
        v = sum(o[2 * k + 1, l] * chain_ops[l] for l in range(2 * modes))
        lam = 1.0 if np.isinf(beta) else float(np.tanh(beta * pair.spec_energies[k] / 2.0))
        rho = rho @ (eye - 1j * lam * (u @ v)) / 2.0
    return rho / np.trace(rho).real


def dense_decohere(hamiltonians, rho0: np.ndarray, t: float) -> np.ndarray:
    """Uniform incoherent mixture of unitary evolutions of rho0."""
    dim = rho0.shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    for h in hamiltonians:
        u = sla.expm(-1j * h * t)
        out += u @ rho0 @ u.conj().T
    return out / len(hamiltonians)


def trace_norm(a: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def dense_optimal_fidelity(rho_p: np.ndarray, rho_m: np.ndarray) -> float:
    """2/3 + (1/6) ||rho_+ - rho_-||_tr."""
    return 2.0 / 3.0 + trace_norm(rho_p - rho_m) / 6.0


def dense_uhlmann(rho: np.ndarray, sigma: np.ndarray) -> float:
    s = sla.sqrtm(rho)
    w = np.linalg.eigvalsh((lambda m: (m + m.conj().T) / 2)(s @ sigma @ s))
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))))


@dataclass(frozen=True)
class DenseRecovery:
    """Optimal recovery data: measurement observables, swap unitary, fidelity.

    ``w_op`` realizes the recovery as a unitary conjugation followed by a
    partial trace: it swaps the virtual qubit spanned by the three recovered
    observables onto an explicit two-level register, i.e.
    W = (1/2) (1 x 1 + sum_a pauli_a x H_a) on register (x) system.  The
    observables and the register Paulis act on disjoint factors, so the
    Pauli algebra of the H's makes W an involution and hence unitary.
    """

    h_ops: tuple
    w_op: np.ndarray
    fidelity: float


def chain_vacuum_projector(pair: DenseGroundPair) -> np.ndarray:
    """Projector onto the empty positive-energy chain modes."""
    rep = pair.rep
    chain_ops = rep.ops[2:]
    modes = pair.spec_energies.size
    o = pair.spec_transform
    out = np.eye(rep.dim, dtype=complex)
    for k in range(1, modes):
        u = sum(o[2 * k, l] * chain_ops[l] for l in range(2 * modes))
        v = sum(o[2 * k + 1, l] * chain_ops[l] for l in range(2 * modes))
        out = out @ (np.eye(rep.dim) - 1j * (u @ v)) / 2.0
    return out


def dense_optimal_recovery(pair: DenseGroundPair, channel) -> DenseRecovery:
    """Construct the fidelity-optimal recovery for a channel leaving the ancilla alone.

    ``channel`` maps dense operators to dense operators.  The encoded x-axis
    state difference factorizes as a R + R^dag a^dag with
    R = channel(-b Pi_vac); the polar unitary of R defines the x and y
    measurement observables, z is read from the ancilla occupation.  Their
    algebra (squares to one, right-handed cyclic products) and the recovery
    unitary are verified in the tests.
    """
    rep = pair.rep
    r_op = channel(-pair.b_op @ chain_vacuum_projector(pair))
    u, _ = sla.polar(r_op, side="left")  # r = p u with p = sqrt(r r^dag)
    a = pair.a_op
    h_x = a @ u + u.conj().T @ a.conj().T
    h_y = 1j * a @ u - 1j * u.conj().T @ a.conj().T
    h_z = a.conj().T @ a - a @ a.conj().T
    h_ops = (h_x, h_y, h_z)

    fid = 0.5
    for alpha, axis in enumerate("xyz"):
        delta = channel(dense_encoded_pure(pair, axis, +1)
                        - dense_encoded_pure(pair, axis, -1))
        fid += np.real(np.trace(h_ops[alpha] @ delta)) / 12.0

    w_op = 0.5 * np.kron(np.eye(2, dtype=complex), np.eye(rep.dim, dtype=complex))
    for alpha in range(3):
        w_op += 0.5 * np.kron(_PAULI[alpha], h_ops[alpha])
    return DenseRecovery(h_ops, w_op, float(fid))


def recovery_via_dilation(rec: DenseRecovery, rho: np.ndarray) -> np.ndarray:
    """Recovered qubit as a partial trace of the swap-unitary conjugation.

    Feeds (1/2) 1_register (x) rho through W and traces out the system;
    equals :func:`apply_recovery` up to round-off.
    """
    dim = rho.shape[0]
    big = rec.w_op @ np.kron(np.eye(2, dtype=complex) / 2.0, rho) @ rec.w_op.conj().T
    out = np.zeros((2, 2), dtype=complex)
    for r in range(2):
        for c in range(2):
            out[r, c] = np.trace(big[r * dim:(r + 1) * dim, c * dim:(c + 1) * dim])
    return out


def dense_lindblad(rho0: np.ndarray, h: np.ndarray, loss_rate: float,
                   jump_sites, rep: MajoranaRep, t: float) -> np.ndarray:
    """Integrate the loss master equation with adaptive high-order stepping."""
    dim = rho0.shape[0]
    jumps = [rep.annihilation(j) for j in jump_sites]
    jdag_j = [d.conj().T @ d for d in jumps]

    def rhs(_t, y):
        rho = y.reshape(dim, dim)
        out = -1j * (h @ rho - rho @ h)
        for d, nd in zip(jumps, jdag_j):
            out += loss_rate * (d @ rho @ d.conj().T - 0.5 * (nd @ rho + rho @ nd))
        return out.ravel()

    if t == 0.0:
        return rho0.copy()
    sol = solve_ivp(rhs, (0.0, t), rho0.ravel().astype(complex),
                    method="DOP853", rtol=1e-10, atol=1e-12)
    rho = sol.y[:, -1].reshape(dim, dim)
    drift = abs(np.trace(rho).real - 1.0)
    if drift > 1e-8:
        raise RuntimeError(f"dense Lindblad trace drift {drift:.2e}")
    return rho


def dense_gram_entry(h_j: np.ndarray, h_k: np.ndarray, psi: np.ndarray, t: float) -> complex:
    u_j = sla.expm(1j * h_j * t)
    u_k = sla.expm(-1j * h_k * t)
    return complex(psi.conj() @ (u_j @ (u_k @ psi)))


_PAULI = (np.array([[0, 1], [1, 0]], dtype=complex),
          np.array([[0, -1j], [1j, 0]], dtype=complex),
          np.array([[1, 0], [0, -1]], dtype=complex))


def apply_recovery(rec: DenseRecovery, rho: np.ndarray) -> np.ndarray:
    """Recovered 2x2 qubit state from the three measured observables."""
    out = 0.5 * np.trace(rho) * np.eye(2, dtype=complex)
    for alpha in range(3):
        out += 0.5 * np.trace(rec.h_ops[alpha] @ rho) * _PAULI[alpha]
    return out


@dataclass(frozen=True)
class PriorKnowledgeReport:
    """One coarse-knowledge recovery trial: deviations and the proven cap."""

    epsilon: float
    p: float
    lhs: float
    bound: float
    t: float
    i1: tuple
    i2: tuple
    bloch: tuple

    @property
    def ok(self) -> bool:
        return self.lhs <= self.bound + 1e-12


def prior_knowledge_experiment(i1, i2, params: ChainParams, t: float, nd: int,
                               bloch=None, seed: int = 0) -> PriorKnowledgeReport:
    """Recover with the optimizer of a coarse interval, apply to a finer one.

    Builds quench mixtures over the uniform nd-point grid on i1 and over its
    restriction to i2 (so the wide mixture splits convexly with weight
    p = member ratio), recovers with the optimal map of the wide channel and
    reports the deviation against 2 sqrt(epsilon / p).
    """
    lo1, hi1 = map(float, i1)
    lo2, hi2 = map(float, i2)
    if not (lo1 <= lo2 <= hi2 <= hi1):
        raise ValueError("the fine interval must be contained in the coarse one")
    grid = np.linspace(lo1, hi1, nd)
    inner = (grid >= lo2 - 1e-12) & (grid <= hi2 + 1e-12)
    if not inner.any():
        raise ValueError("no grid members fall inside the fine interval")
    p = float(inner.mean())

    pair = dense_ground_pair(params)
    hams = [dense_hamiltonian(QuadraticGenerator(_embed_chain(
        build_generator(ChainParams(N=params.N, mu=float(mu), delta=params.delta,
                                    J=params.J)).data)))
            for mu in grid]
    hams_inner = [h for h, keep in zip(hams, inner) if keep]

    if bloch is None:
        rng = np.random.Generator(np.random.Philox(key=seed))
        v = rng.normal(size=3)
        bloch = tuple(v / np.linalg.norm(v))
    theta = np.arccos(np.clip(bloch[2], -1, 1))
    phi = np.arctan2(bloch[1], bloch[0])
    psi = np.cos(theta / 2.0) * pair.one + np.exp(1j * phi) * np.sin(theta / 2.0) * pair.zero
    # the encoded z = +1 state is `one`; bloch components read via the encoded Paulis
    rho0 = np.outer(psi, psi.conj())
    n_enc = [float(np.real(np.trace(sig @ rho0))) for sig in pair.sigma]
    rho_q = 0.5 * (np.eye(2, dtype=complex) + sum(n_enc[a] * _PAULI[a] for a in range(3)))

    rho1 = dense_decohere(hams, rho0, t)
    rho2 = dense_decohere(hams_inner, rho0, t)
    rec = dense_optimal_recovery(pair, lambda x: dense_decohere(hams, x, t))
    out1 = apply_recovery(rec, rho1)
    out2 = apply_recovery(rec, rho2)
    epsilon = float(np.linalg.norm(out1 - rho_q, 2))
    lhs = trace_norm(out2 - rho_q)
    bound = 2.0 * np.sqrt(epsilon / p)
    return PriorKnowledgeReport(epsilon=epsilon, p=p, lhs=lhs, bound=bound, t=t,
                                i1=(lo1, hi1), i2=(lo2, hi2), bloch=tuple(bloch))


def _embed_chain(t_chain: np.ndarray) -> np.ndarray:
    out = np.zeros((t_chain.shape[0] + 2, t_chain.shape[0] + 2))
    out[2:, 2:] = t_chain
    return out


def dense_gaussian_unitary(w_conj: np.ndarray, rep: MajoranaRep) -> np.ndarray:
    """Dense unitary U with U c_m U^dag = sum_n (w_conj)_{mn} c_n, det w = +1.

    Note the convention: ``w_conj`` is the conjugation matrix; conjugating a
    state by U maps its covariance matrix G to w_conj^T G w_conj.
    """
    from . import linalg as _linalg

    n = w_conj.shape[0]
    k = -_linalg.orthogonal_log(w_conj)
    x = np.zeros((rep.dim, rep.dim), dtype=complex)
    for m in range(n):
        for l in range(m + 1, n):
            if abs(k[m, l]) > 1e-15:
                x += (0.5 * k[m, l]) * (rep.ops[m] @ rep.ops[l])
    return sla.expm(x)


def dense_gaussian_cm_of_unitary(w_rot: np.ndarray, rep: MajoranaRep) -> tuple[np.ndarray, complex]:
    """Normalized Majorana pair table of the Gaussian unitary with rotation w_rot.

    Returns (Upsilon, trace) where Upsilon_{mn} = (i/2) Tr[U [c_m, c_n]] / Tr[U].
    Used to calibrate the covariance representation of evolution products.
    """
    n = w_rot.shape[0]
    u = dense_gaussian_unitary(w_rot, rep)
    tr = complex(np.trace(u))
    ups = np.zeros((n, n), dtype=complex)
    for m in range(n):
        for l in range(m + 1, n):
            val = 0.5j * np.trace(u @ (rep.ops[m] @ rep.ops[l] - rep.ops[l] @ rep.ops[m])) / tr
            ups[m, l] = val
            ups[l, m] = -val
    return ups, tr
