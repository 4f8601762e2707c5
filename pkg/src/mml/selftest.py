"""Dense-oracle equivalence gates, runnable standalone.

Each gate compares a covariance-level quantity against the brute-force
Fock-space value at small size and reports the worst deviation against its
tolerance.  The same gates back the acceptance test suite; `mml selftest`
prints one line per gate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channels, fgs, kitaev, linalg, oracle, recovery

__all__ = ["GateResult", "run_gates", "ALL_GATES"]


@dataclass(frozen=True)
class GateResult:
    name: str
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<28} dev {self.deviation:.3e}  (tol {self.tolerance:.0e})"


def _small_setup(n: int = 3, nd: int = 3):
    params = kitaev.ChainParams(N=n, mu=0.2, delta=1.0)
    ens = channels.quench_ensemble(params, 1.0, 1.5, nd)
    dpair = oracle.dense_ground_pair(params)
    hams = [oracle.dense_hamiltonian(fgs.QuadraticGenerator(m.segments[0][0].data))
            for m in ens.members]
    return params, ens, dpair, hams


def gate_gram_dense() -> GateResult:
    params, ens, dpair, hams = _small_setup()
    zpair = kitaev.encode_pair(params, "z", np.inf)
    grid = np.linspace(0.0, 4.0, 21)
    grams = recovery.gram_matrices(ens, zpair, grid)
    worst = 0.0
    nd = ens.n_members
    for gp in grams:
        for tau, psi in ((0, dpair.zero), (1, dpair.one)):
            dense = np.eye(nd, dtype=complex)
            for j in range(nd):
                for k in range(j + 1, nd):
                    dense[j, k] = oracle.dense_gram_entry(hams[j], hams[k], psi, gp.t)
                    dense[k, j] = np.conj(dense[j, k])
            worst = max(worst, float(np.max(np.abs(
                dense - (gp.g0 if tau == 0 else gp.g1)))))
    return GateResult("gram-matrices vs dense", worst, 1e-7)


def gate_optimal_dense() -> GateResult:
    params, ens, dpair, hams = _small_setup()
    zpair = kitaev.encode_pair(params, "z", np.inf)
    grid = np.linspace(0.0, 4.0, 9)
    grams = recovery.gram_matrices(ens, zpair, grid)
    worst = 0.0
    for gp in grams:
        rho_p = oracle.dense_decohere(hams, oracle.dense_encoded_pure(dpair, "x", +1), gp.t)
        rho_m = oracle.dense_decohere(hams, oracle.dense_encoded_pure(dpair, "x", -1), gp.t)
        worst = max(worst, abs(recovery.optimal_fidelity(gp)
                               - oracle.dense_optimal_fidelity(rho_p, rho_m)))
    return GateResult("optimal fidelity vs dense", worst, 1e-7)


def gate_gaussian_saturation() -> GateResult:
    params, ens, _, _ = _small_setup()
    xpair = kitaev.encode_pair(params, "x", np.inf)
    worst = 0.0
    for t in (0.0, 0.7, 1.9, 3.4):
        cp, cm = recovery.ensemble_average_cm(ens, xpair, t)
        fg = recovery.gaussian_fidelity(cp, cm)
        _, achieved = recovery.build_gaussian_recovery(recovery.delta_blocks(cp, cm, "x"))
        worst = max(worst, abs(achieved - fg))
    return GateResult("gaussian recovery saturation", worst, 1e-9)


def gate_gaussian_dense() -> GateResult:
    params, ens, dpair, hams = _small_setup()
    rep = oracle.majorana_rep(params.N + 1)
    worst = 0.0
    for t in (0.6, 2.3):
        pairs = {ax: kitaev.encode_pair(params, ax, np.inf) for ax in ("x", "y", "z")}
        cp, cm = recovery.ensemble_average_cm(ens, pairs["x"], t)
        fg = recovery.gaussian_fidelity(cp, cm)
        w_rot, _ = recovery.build_gaussian_recovery(recovery.delta_blocks(cp, cm, "x"))
        u_dense = oracle.dense_gaussian_unitary(w_rot.T, rep)  # G -> W G W^T
        sig_out = (1j * rep.ops[2] @ rep.ops[1],
                   1j * rep.ops[2] @ rep.ops[0],
                   1j * rep.ops[0] @ rep.ops[1])
        f_dense = 0.5
        for alpha, ax in enumerate("xyz"):
            dp = oracle.dense_decohere(hams, oracle.dense_encoded_pure(dpair, ax, +1), t)
            dm = oracle.dense_decohere(hams, oracle.dense_encoded_pure(dpair, ax, -1), t)
            rotated = u_dense @ (dp - dm) @ u_dense.conj().T
            f_dense += float(np.real(np.trace(sig_out[alpha] @ rotated))) / 12.0
        worst = max(worst, abs(f_dense - fg))
    return GateResult("gaussian optimum vs dense", worst, 1e-6)


def gate_lindblad_dense() -> GateResult:
    params = kitaev.ChainParams(N=3, mu=0.4, delta=1.0)
    gen = kitaev.build_generator(params)
    spec = channels.LindbladSpec(h0=gen, loss_rate=1.0)
    cm0 = fgs.thermal_cm(gen, 1.3)
    rep = oracle.majorana_rep(3)
    rho0 = oracle.gaussian_state(cm0)
    h_dense = oracle.dense_hamiltonian(gen)
    grid = [0.0, 0.4, 1.1, 2.3]
    cms = channels.lindblad_evolve(cm0, spec, grid)
    worst = 0.0
    for t, cm in zip(grid, cms):
        rho_t = oracle.dense_lindblad(rho0, h_dense, 1.0, range(3), rep, t)
        worst = max(worst, float(np.max(np.abs(oracle.dense_cm(rho_t, rep).data - cm.data))))
    return GateResult("lindblad flow vs dense", worst, 1e-6)


def gate_uhlmann_dense() -> GateResult:
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(8):
        n = 5
        a = rng.normal(size=(2 * n, 2 * n))
        b = rng.normal(size=(2 * n, 2 * n))
        cm1 = fgs.thermal_cm(fgs.QuadraticGenerator(a - a.T), rng.uniform(0.3, 1.5))
        cm2 = fgs.thermal_cm(fgs.QuadraticGenerator(b - b.T), rng.uniform(0.3, 1.5))
        dense = oracle.dense_uhlmann(oracle.gaussian_state(cm1), oracle.gaussian_state(cm2))
        worst = max(worst, abs(dense - fgs.uhlmann_fidelity(cm1, cm2)))
    return GateResult("uhlmann fidelity vs dense", worst, 1e-8)


def gate_diagnostic_dense() -> GateResult:
    params = kitaev.ChainParams(N=3, mu=0.0, delta=1.0)
    ens = channels.quench_ensemble(params, 1.0, 1.5, 2)
    zpair = kitaev.encode_pair(params, "z", np.inf)
    dpair = oracle.dense_ground_pair(params)
    hams = [oracle.dense_hamiltonian(fgs.QuadraticGenerator(m.segments[0][0].data))
            for m in ens.members]
    rep3 = oracle.majorana_rep(3)
    spec = kitaev.diagonalize(kitaev.build_generator(params))
    n = params.N
    gam0 = spec.transform.T @ linalg.antisym_blocks(-np.ones(n)) @ spec.transform
    gam1 = spec.transform.T @ linalg.antisym_blocks(
        np.concatenate([[1.0], -np.ones(n - 1)])) @ spec.transform
    worst = 0.0
    for t in (0.5, 1.6):
        res = recovery.condition_diagnostic(ens, zpair, t, 0, 1)
        g0d = oracle.dense_gram_entry(hams[0], hams[1], dpair.zero, t)
        g1d = oracle.dense_gram_entry(hams[0], hams[1], dpair.one, t)
        worst = max(worst, abs(res.x_abs - abs(g0d - g1d)))
        gj = ens.members[0].segments[0][0].data[2:, 2:]
        gk = ens.members[1].segments[0][0].data[2:, 2:]
        w = fgs.QuadraticGenerator(gk).rotation(t).T @ fgs.QuadraticGenerator(gj).rotation(t)
        ups_d, _ = oracle.dense_gaussian_cm_of_unitary(w, rep3)
        sv_d = np.linalg.svd((gam0 + gam1) / 2.0 + ups_d, compute_uv=False)
        worst = max(worst, float(np.max(np.abs(sv_d - res.singular_values))))
    return GateResult("pair diagnostic vs dense", worst, 1e-7)


ALL_GATES = (
    gate_gram_dense,
    gate_optimal_dense,
    gate_gaussian_saturation,
    gate_gaussian_dense,
    gate_lindblad_dense,
    gate_uhlmann_dense,
    gate_diagnostic_dense,
)


def run_gates(verbose: bool = True) -> list[GateResult]:
    results = []
    for gate in ALL_GATES:
        res = gate()
        results.append(res)
        if verbose:
            print(res.line())
    return results
