import itertools

import numpy as np
import pytest

from mml import channels, fgs, kitaev, linalg, oracle, recovery


def gram_at(ensemble, zpair, t, steps=17):
    grid = np.linspace(0.0, t, steps) if t > 0 else np.array([0.0])
    return recovery.gram_matrices(ensemble, zpair, grid)[-1]


class TestGramMatrices:
    def test_all_ones_at_zero(self, small_ensemble, small_chain):
        zpair = kitaev.encode_pair(small_chain, "z", np.inf)
        gp = recovery.gram_matrices(small_ensemble, zpair, [0.0])[0]
        assert np.array_equal(gp.g0, np.ones((3, 3), dtype=complex))
        assert np.array_equal(gp.g1, np.ones((3, 3), dtype=complex))

    def test_single_member_stays_trivial(self, small_chain):
        ens = channels.quench_ensemble(small_chain, 2.7, 2.7, 1)
        zpair = kitaev.encode_pair(small_chain, "z", np.inf)
        for gp in recovery.gram_matrices(ens, zpair, np.linspace(0, 5, 11)):
            assert gp.g0.shape == (1, 1)
            assert np.isclose(gp.g0[0, 0], 1.0)

    def test_entries_match_dense(self, small_ensemble, small_chain, dense_pair, dense_hams):
        zpair = kitaev.encode_pair(small_chain, "z", np.inf)
        grams = recovery.gram_matrices(small_ensemble, zpair, np.linspace(0, 4, 17))
        worst = 0.0
        for gp in grams:
            for tau, psi in ((0, dense_pair.zero), (1, dense_pair.one)):
                g = gp.g0 if tau == 0 else gp.g1
                for j, k in itertools.combinations(range(3), 2):
                    dense = oracle.dense_gram_entry(dense_hams[j], dense_hams[k], psi, gp.t)
                    worst = max(worst, abs(g[j, k] - dense))
        assert worst <= 1e-7

    def test_output_grid_independence(self, small_chain):
        ens = channels.quench_ensemble(small_chain, 1.0, 1.5, 4)
        zpair = kitaev.encode_pair(small_chain, "z", np.inf)
        coarse = recovery.gram_matrices(ens, zpair, np.linspace(0, 6, 7))[-1]
        fine = recovery.gram_matrices(ens, zpair, np.linspace(0, 6, 121))[-1]
        assert np.max(np.abs(coarse.g0 - fine.g0)) <= 1e-9
        assert np.max(np.abs(coarse.g1 - fine.g1)) <= 1e-9

    def test_psd_and_unit_diagonal(self, small_ensemble, small_chain):
        zpair = kitaev.encode_pair(small_chain, "z", np.inf)
        for gp in recovery.gram_matrices(small_ensemble, zpair, np.linspace(0, 5, 11)):
            for g in (gp.g0, gp.g1):
                assert np.max(np.abs(np.diag(g) - 1.0)) <= 1e-12
                assert np.linalg.eigvalsh(g).min() >= -1e-9

    def test_requires_pure_z_pair(self, small_ensemble, small_chain):
        xpair = kitaev.encode_pair(small_chain, "x", np.inf)
        with pytest.raises(ValueError, match="z-axis"):
            recovery.gram_matrices(small_ensemble, xpair, [0.0, 1.0])
        tpair = kitaev.encode_pair(small_chain, "z", 1.0)
        with pytest.raises(ValueError, match="pure"):
            recovery.gram_matrices(small_ensemble, tpair, [0.0, 1.0])

    def test_grid_must_start_at_zero(self, small_ensemble, small_chain):
        zpair = kitaev.encode_pair(small_chain, "z", np.inf)
        with pytest.raises(ValueError, match="start at 0"):
            recovery.gram_matrices(small_ensemble, zpair, [1.0, 2.0])


class TestOptimalFidelity:
    def test_equal_sectors_give_one(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        g = a @ a.conj().T
        d = np.sqrt(np.diag(g).real)
        g = g / np.outer(d, d)
        gp = recovery.GramPair(g, g.copy(), 0.0)
        assert abs(recovery.optimal_fidelity(gp) - 1.0) <= 1e-10

    def test_against_dense(self, small_ensemble, small_chain, dense_pair, dense_hams):
        zpair = kitaev.encode_pair(small_chain, "z", np.inf)
        for t in (0.0, 1.2, 3.1):
            gp = gram_at(small_ensemble, zpair, t)
            rho_p = oracle.dense_decohere(
                dense_hams, oracle.dense_encoded_pure(dense_pair, "x", +1), t)
            rho_m = oracle.dense_decohere(
                dense_hams, oracle.dense_encoded_pure(dense_pair, "x", -1), t)
            dense = oracle.dense_optimal_fidelity(rho_p, rho_m)
            assert abs(recovery.optimal_fidelity(gp) - dense) <= 1e-7

    def test_global_phase_invariance(self, small_ensemble, small_chain):
        zpair = kitaev.encode_pair(small_chain, "z", np.inf)
        gp = gram_at(small_ensemble, zpair, 2.0)
        rng = np.random.default_rng(5)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, gp.n_members))
        d = np.diag(phases)
        rotated = recovery.GramPair(d @ gp.g0 @ d.conj().T, d @ gp.g1 @ d.conj().T, gp.t)
        assert abs(recovery.optimal_fidelity(rotated)
                   - recovery.optimal_fidelity(gp)) <= 1e-10

    def test_rejects_non_psd(self):
        g0 = np.array([[1.0, 2.0], [2.0, 1.0]], dtype=complex)
        gp = recovery.GramPair(g0, np.eye(2, dtype=complex), 0.0)
        with pytest.raises(ValueError, match="not PSD"):
            recovery.optimal_fidelity(gp)


class TestEnsembleAverage:
    def test_single_member(self, small_chain):
        ens = channels.quench_ensemble(small_chain, 1.2, 1.2, 1)
        xpair = kitaev.encode_pair(small_chain, "x", np.inf)
        cp, _ = recovery.ensemble_average_cm(ens, xpair, 1.1)
        o = ens.members[0].rotation(1.1)
        assert np.allclose(cp.data, o @ xpair.gamma_plus.data @ o.T, atol=1e-12)

    def test_time_zero(self, small_ensemble, small_chain):
        xpair = kitaev.encode_pair(small_chain, "x", np.inf)
        cp, cm = recovery.ensemble_average_cm(small_ensemble, xpair, 0.0)
        assert np.allclose(cp.data, xpair.gamma_plus.data, atol=1e-12)
        assert np.allclose(cm.data, xpair.gamma_minus.data, atol=1e-12)

    def test_against_dense(self, small_ensemble, small_chain, dense_pair, dense_hams):
        rep = oracle.majorana_rep(small_chain.N + 1)
        xpair = kitaev.encode_pair(small_chain, "x", np.inf)
        t = 1.7
        cp, _ = recovery.ensemble_average_cm(small_ensemble, xpair, t)
        rho = oracle.dense_decohere(dense_hams,
                                    oracle.dense_encoded_pure(dense_pair, "x", +1), t)
        assert np.max(np.abs(oracle.dense_cm(rho, rep).data - cp.data)) <= 1e-10


class TestGaussianFidelity:
    def test_initial_value_is_one(self, small_ensemble, small_chain):
        xpair = kitaev.encode_pair(small_chain, "x", np.inf)
        cp, cm = recovery.ensemble_average_cm(small_ensemble, xpair, 0.0)
        assert abs(recovery.gaussian_fidelity(cp, cm) - 1.0) <= 1e-12

    def test_identical_states(self, small_chain):
        xpair = kitaev.encode_pair(small_chain, "x", np.inf)
        assert recovery.gaussian_fidelity(xpair.gamma_plus, xpair.gamma_plus) == 2.0 / 3.0

    def test_block_identities(self, small_ensemble, small_chain):
        t = 1.7
        jmat = np.array([[0.0, -1.0], [1.0, 0.0]])
        deltas = {}
        for ax in kitaev.BLOCH_AXES:
            pair = kitaev.encode_pair(small_chain, ax, np.inf)
            cp, cm = recovery.ensemble_average_cm(small_ensemble, pair, t)
            deltas[ax] = recovery.delta_blocks(cp, cm, ax)
        assert np.max(np.abs(deltas["y"].l - deltas["x"].l @ jmat)) <= 1e-9
        assert np.max(np.abs(deltas["z"].k_prime + 2.0 * jmat)) <= 1e-9
        assert np.max(np.abs(deltas["x"].k_prime)) <= 1e-12
        assert np.max(np.abs(deltas["x"].k_dprime)) <= 1e-12

    def test_recovery_saturates_bound(self, small_ensemble, small_chain):
        xpair = kitaev.encode_pair(small_chain, "x", np.inf)
        for t in (0.0, 0.9, 2.6):
            cp, cm = recovery.ensemble_average_cm(small_ensemble, xpair, t)
            fg = recovery.gaussian_fidelity(cp, cm)
            w, achieved = recovery.build_gaussian_recovery(
                recovery.delta_blocks(cp, cm, "x"))
            assert abs(achieved - fg) <= 1e-9
            assert np.max(np.abs(w @ w.T - np.eye(w.shape[0]))) <= 1e-12
            assert np.isclose(np.linalg.det(w), 1.0, atol=1e-10)

    def test_identity_channel_recovery(self, small_chain):
        ens = channels.quench_ensemble(small_chain, small_chain.mu, small_chain.mu, 1)
        xpair = kitaev.encode_pair(small_chain, "x", np.inf)
        cp, cm = recovery.ensemble_average_cm(ens, xpair, 0.0)
        w, achieved = recovery.build_gaussian_recovery(recovery.delta_blocks(cp, cm, "x"))
        assert abs(achieved - 1.0) <= 1e-12
        # the rotated difference concentrates entirely on the first four modes
        delta = w @ (cp.data - cm.data) @ w.T
        assert np.max(np.abs(delta[4:, :])) <= 1e-9

    def test_dense_channel_exhausts_bound(self, small_ensemble, small_chain,
                                          dense_pair, dense_hams):
        rep = oracle.majorana_rep(small_chain.N + 1)
        t = 2.3
        xpair = kitaev.encode_pair(small_chain, "x", np.inf)
        cp, cm = recovery.ensemble_average_cm(small_ensemble, xpair, t)
        fg = recovery.gaussian_fidelity(cp, cm)
        w_rot, _ = recovery.build_gaussian_recovery(recovery.delta_blocks(cp, cm, "x"))
        u = oracle.dense_gaussian_unitary(w_rot.T, rep)
        sig = (1j * rep.ops[2] @ rep.ops[1], 1j * rep.ops[2] @ rep.ops[0],
               1j * rep.ops[0] @ rep.ops[1])
        f_dense = 0.5
        for alpha, ax in enumerate("xyz"):
            dp = oracle.dense_decohere(dense_hams,
                                       oracle.dense_encoded_pure(dense_pair, ax, +1), t)
            dm = oracle.dense_decohere(dense_hams,
                                       oracle.dense_encoded_pure(dense_pair, ax, -1), t)
            rot = u @ (dp - dm) @ u.conj().T
            f_dense += float(np.real(np.trace(sig[alpha] @ rot))) / 12.0
        assert abs(f_dense - fg) <= 1e-6

    def test_shape_validation(self):
        bad = recovery.DeltaBlocks(axis="x", k_prime=np.zeros((2, 2)),
                                   l=np.zeros((3, 2)), k_dprime=np.zeros((3, 3)))
        with pytest.raises(ValueError):
            recovery.build_gaussian_recovery(bad)


class TestAssignment:
    def test_two_by_two_example(self):
        cols, total = recovery.min_cost_matching(np.array([[1.0, 2.0], [3.0, 1.0]]))
        assert total == 2.0
        assert list(cols) == [0, 1]

    def test_matches_brute_force(self):
        rng = np.random.default_rng(8)
        for n in (3, 5, 6):
            cost = rng.uniform(size=(n, n))
            _, total = recovery.min_cost_matching(cost)
            brute = min(sum(cost[i, p[i]] for i in range(n))
                        for p in itertools.permutations(range(n)))
            assert abs(total - brute) <= 1e-12


class TestThermalBound:
    def test_initial_value_is_one(self, small_ensemble, small_chain):
        pair = kitaev.encode_pair(small_chain, "x", 1.0)
        assert recovery.thermal_upper_bound(small_ensemble, pair, 0.0) == 1.0

    def test_upper_bounds_dense_optimum(self, small_chain, dense_pair):
        ens = channels.quench_ensemble(small_chain, 1.0, 1.5, 2)
        hams = [oracle.dense_hamiltonian(fgs.QuadraticGenerator(m.segments[0][0].data))
                for m in ens.members]
        beta = 1.0
        pair = kitaev.encode_pair(small_chain, "x", beta)
        rho_p0 = oracle.dense_encoded_state(dense_pair, "x", +1, beta)
        rho_m0 = oracle.dense_encoded_state(dense_pair, "x", -1, beta)
        for t in (0.6, 1.8):
            f_up = recovery.thermal_upper_bound(ens, pair, t)
            rho_p = oracle.dense_decohere(hams, rho_p0, t)
            rho_m = oracle.dense_decohere(hams, rho_m0, t)
            assert f_up >= oracle.dense_optimal_fidelity(rho_p, rho_m) - 1e-9

    def test_cold_limit_dominates_pure_optimum(self, small_ensemble, small_chain):
        zpair = kitaev.encode_pair(small_chain, "z", np.inf)
        cold = kitaev.encode_pair(small_chain, "x", 60.0)
        t = 1.4
        f_opt = recovery.optimal_fidelity(gram_at(small_ensemble, zpair, t))
        f_up = recovery.thermal_upper_bound(small_ensemble, cold, t)
        assert f_up >= f_opt - 1e-6

    def test_rejects_pure_pair(self, small_ensemble, small_chain):
        pair = kitaev.encode_pair(small_chain, "x", np.inf)
        with pytest.raises(ValueError):
            recovery.thermal_upper_bound(small_ensemble, pair, 0.5)


class TestLindbladBounds:
    def test_identical_states(self, small_chain):
        pair = kitaev.encode_pair(small_chain, "x", 1.0)
        lo, up = recovery.lindblad_bounds(pair.gamma_plus, pair.gamma_plus)
        assert abs(lo - 2.0 / 3.0) <= 1e-8
        assert abs(up - 2.0 / 3.0) <= 1e-7

    def test_orthogonal_pure_states(self, small_chain):
        pair = kitaev.encode_pair(small_chain, "x", np.inf)
        lo, up = recovery.lindblad_bounds(pair.gamma_plus, pair.gamma_minus)
        assert lo == up == 1.0

    def test_brackets_dense_optimum(self, small_chain, dense_pair):
        gen = kitaev.build_generator(small_chain)
        spec = channels.LindbladSpec(h0=gen, loss_rate=1.0)
        pair = kitaev.encode_pair(small_chain, "x", np.inf)
        grid = [0.0, 1.0]
        evo_p = channels.lindblad_evolve(pair.gamma_plus, spec, grid)
        evo_m = channels.lindblad_evolve(pair.gamma_minus, spec, grid)
        lo, up = recovery.lindblad_bounds(evo_p[-1], evo_m[-1])
        rep = oracle.majorana_rep(small_chain.N + 1)
        h = oracle.dense_hamiltonian(channels.with_ancilla(gen))
        rho_p = oracle.dense_lindblad(oracle.dense_encoded_pure(dense_pair, "x", +1),
                                      h, 1.0, range(1, small_chain.N + 1), rep, 1.0)
        rho_m = oracle.dense_lindblad(oracle.dense_encoded_pure(dense_pair, "x", -1),
                                      h, 1.0, range(1, small_chain.N + 1), rep, 1.0)
        f_dense = oracle.dense_optimal_fidelity(rho_p, rho_m)
        assert lo - 1e-7 <= f_dense <= up + 1e-7


class TestConditionDiagnostic:
    def test_same_member_gives_zero_modes(self, small_ensemble, small_chain):
        zpair = kitaev.encode_pair(small_chain, "z", np.inf)
        res = recovery.condition_diagnostic(small_ensemble, zpair, 1.0, 0, 0)
        assert res.x_abs <= 1e-12
        sv = np.sort(res.singular_values)
        assert sv[0] <= 1e-10 and sv[1] <= 1e-10 and sv[2] > 0.1

    def test_against_dense(self, small_chain):
        ens = channels.quench_ensemble(
            kitaev.ChainParams(N=3, mu=0.0, delta=1.0), 1.0, 1.5, 2)
        params = kitaev.ChainParams(N=3, mu=0.0, delta=1.0)
        zpair = kitaev.encode_pair(params, "z", np.inf)
        dpair = oracle.dense_ground_pair(params)
        hams = [oracle.dense_hamiltonian(fgs.QuadraticGenerator(m.segments[0][0].data))
                for m in ens.members]
        t = 0.8
        res = recovery.condition_diagnostic(ens, zpair, t, 0, 1)
        g0 = oracle.dense_gram_entry(hams[0], hams[1], dpair.zero, t)
        g1 = oracle.dense_gram_entry(hams[0], hams[1], dpair.one, t)
        assert abs(res.x_abs - abs(g0 - g1)) <= 1e-7
        # magnitude is bounded by the composite-trace-weighted pair invariant
        spec = kitaev.diagonalize(kitaev.build_generator(params))
        gam0 = spec.transform.T @ linalg.antisym_blocks(-np.ones(3)) @ spec.transform
        gam1 = spec.transform.T @ linalg.antisym_blocks(
            np.array([1.0, -1.0, -1.0])) @ spec.transform
        gj = ens.members[0].segments[0][0].data[2:, 2:]
        gk = ens.members[1].segments[0][0].data[2:, 2:]
        w = fgs.QuadraticGenerator(gk).rotation(t).T @ fgs.QuadraticGenerator(gj).rotation(t)
        ups, tr_u = oracle.dense_gaussian_cm_of_unitary(w, oracle.majorana_rep(3))
        mat = (gam0 + gam1) / 2.0 + ups
        assert np.max(np.abs(np.sort(np.linalg.svd(mat, compute_uv=False))
                             - np.sort(res.singular_values))) <= 1e-7
        pf = linalg.pfaffian(mat)
        assert res.x_abs <= abs(tr_u * pf) * (1.0 + 1e-9)

    def test_near_singular_composite_is_flagged(self, small_chain):
        # composite rotation with an exact half-turn plane: trace hits zero
        n = small_chain.N
        zero = channels.with_ancilla(fgs.QuadraticGenerator(np.zeros((2 * n, 2 * n))))
        t_pair = np.zeros((2 * n, 2 * n))
        t_pair[0, 1], t_pair[1, 0] = 1.0, -1.0
        gen_k = channels.with_ancilla(fgs.QuadraticGenerator(t_pair))
        ens = channels.PerturbationEnsemble(
            (channels.GeneratorSchedule(((zero, np.inf),)),
             channels.GeneratorSchedule(((gen_k, np.inf),))), 0, {})
        zpair = kitaev.encode_pair(small_chain, "z", np.inf)
        res = recovery.condition_diagnostic(ens, zpair, np.pi, 0, 1)
        assert res.flagged
        assert res.singular_values is None
        assert res.trace_magnitude <= 1e-10
