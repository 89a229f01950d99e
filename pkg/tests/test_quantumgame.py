"""Parameterized players, the overlap-penalized baseline, and explicit deflation."""

import numpy as np
import pytest

from eigengames.errors import DegenerateParentError
from eigengames.hamiltonian import (
    HermitianMatrix,
    PauliSum,
    bundled_h2_path,
    exact_eigendecomposition,
    load_pauli_sum,
    pauli_sum_to_matrix,
)
from eigengames.quantum_sim import (
    ShotModel,
    apply_ansatz,
    expectation,
    layered_ansatz,
    random_layers_ansatz,
    zero_state,
)
from eigengames.quantumgame import (
    QuantumParent,
    SolverConfig,
    deflation_vqe,
    exact_top_eigenvector_solver,
    pauli_sum_hash,
    power_iteration_solver,
    quantum_utility,
    quantumgame_player,
    run_quantumgame,
    run_vqd,
    vqd_player,
)

DIAG_3210 = PauliSum(2, ((1.5, "II"), (1.0, "ZI"), (0.5, "IZ")))  # diag(3, 2, 1, 0)
Z1 = PauliSum(1, ((1.0, "Z"),))


def make_parent(h, spec, theta_values):
    theta = spec.bind(theta_values)
    state = apply_ansatz(spec, theta)
    return QuantumParent(theta, expectation(h, state), state)


@pytest.fixture(scope="module")
def h2():
    return load_pauli_sum(bundled_h2_path())


@pytest.fixture(scope="module")
def h2_oracle(h2):
    return np.sort(exact_eigendecomposition(pauli_sum_to_matrix(h2)).eigenvalues)


class TestQuantumUtility:
    def test_no_parents_is_plain_expectation(self, h2):
        spec = random_layers_ansatz(2, 3, 3, seed=11)
        rng = np.random.default_rng(0)
        theta = rng.uniform(-np.pi, np.pi, spec.num_parameters)
        value = quantum_utility(h2, spec, theta, (), ShotModel())
        assert value == pytest.approx(expectation(h2, apply_ansatz(spec, theta)), abs=1e-12)

    def test_orthogonal_basis_states_have_zero_penalty(self):
        # Player at |00>, parent at a different basis state of the diagonal
        # operator: the cross term vanishes.  RY(pi) on both qubits followed by
        # the ring CNOT leaves the register at |10>.
        spec = layered_ansatz(2, 1, initial_state="zero")
        child = spec.bind(np.zeros(spec.num_parameters))
        parent_values = np.zeros(spec.num_parameters)
        parent_values[0] = np.pi  # RY(pi) on qubit 0
        parent_values[2] = np.pi  # RY(pi) on qubit 1
        parent = make_parent(DIAG_3210, spec, parent_values)
        assert abs(abs(parent.statevector.amplitudes[2]) - 1.0) < 1e-12
        value = quantum_utility(DIAG_3210, spec, child, (parent,), ShotModel())
        assert value == pytest.approx(expectation(DIAG_3210, apply_ansatz(spec, child)), abs=1e-10)

    def test_self_penalty_annihilates(self):
        spec = layered_ansatz(1, 1, initial_state="zero")
        theta = np.zeros(spec.num_parameters)  # stays at |0>, eigenvalue 1 of Z
        parent = make_parent(Z1, spec, theta)
        value = quantum_utility(Z1, spec, spec.bind(theta), (parent,), ShotModel())
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_parent_rejected(self):
        spec = layered_ansatz(1, 1, initial_state="zero")
        theta = spec.bind(np.array([np.pi / 2.0, 0.0]))  # RY(pi/2)|0> = |+>, <Z> = 0
        parent = QuantumParent(theta, 0.0, apply_ansatz(spec, theta))
        with pytest.raises(DegenerateParentError):
            quantum_utility(Z1, spec, theta, (parent,), ShotModel())


class TestQuantumGamePlayer:
    def test_ground_state_of_diagonal_operator(self):
        spec = layered_ansatz(2, 2)
        cfg = SolverConfig(direction="minimize", grad_tolerance=1e-3, max_iterations=3000)
        state = quantumgame_player(DIAG_3210, spec, spec.bind(np.full(8, 0.3)), (), cfg)
        assert state.converged
        assert state.eigenvalue == pytest.approx(0.0, abs=1e-2)

    def test_second_player_reaches_first_excited(self):
        spec = layered_ansatz(2, 2)
        cfg = SolverConfig(direction="minimize", grad_tolerance=1e-3, max_iterations=4000)
        first = quantumgame_player(DIAG_3210, spec, spec.bind(np.full(8, 0.3)), (), cfg)
        parent = QuantumParent(first.theta, first.eigenvalue, apply_ansatz(spec, first.theta))
        rng = np.random.default_rng(3)
        second = quantumgame_player(
            DIAG_3210, spec, spec.bind(rng.uniform(-np.pi, np.pi, 8)), (parent,), cfg, index=2
        )
        assert second.converged
        assert second.eigenvalue == pytest.approx(1.0, abs=1e-2)

    def test_maximize_direction_finds_top(self):
        spec = layered_ansatz(2, 2)
        cfg = SolverConfig(direction="maximize", grad_tolerance=1e-3, max_iterations=3000)
        state = quantumgame_player(DIAG_3210, spec, spec.bind(np.full(8, 0.4)), (), cfg)
        assert state.converged
        assert state.eigenvalue == pytest.approx(3.0, abs=1e-2)

    def test_monotone_utility_noiseless(self, h2):
        # Ascent with eta <= 1/(2||M||) must not decrease the utility.
        spec = random_layers_ansatz(2, 3, 3, seed=11)
        cfg = SolverConfig(direction="minimize", grad_tolerance=1e-4, max_iterations=400)
        rng = np.random.default_rng(1)
        first = quantumgame_player(h2, spec, spec.bind(rng.uniform(-np.pi, np.pi, 9)), (), cfg)
        parent = QuantumParent(first.theta, first.eigenvalue, apply_ansatz(spec, first.theta))
        second = quantumgame_player(
            h2, spec, spec.bind(rng.uniform(-np.pi, np.pi, 9)), (parent,), cfg, index=2
        )
        for history in (first.utility_history, second.utility_history):
            diffs = np.diff(np.asarray(history))
            assert diffs.min() >= -1e-9


class TestRunQuantumGame:
    def test_h2_four_levels_noiseless(self, h2, h2_oracle):
        spec = random_layers_ansatz(2, 3, 3, seed=11)
        cfg = SolverConfig(direction="minimize", grad_tolerance=1e-2, max_iterations=3000)
        result = run_quantumgame(h2, spec, cfg, 4, seed=0)
        assert result.all_converged
        assert np.max(np.abs(np.sort(result.eigenvalues) - h2_oracle)) <= 2e-2

    def test_operator_never_mutates(self, h2):
        spec = random_layers_ansatz(2, 3, 3, seed=11)
        cfg = SolverConfig(direction="minimize", grad_tolerance=1e-1, max_iterations=50)
        before = pauli_sum_hash(h2)
        result = run_quantumgame(h2, spec, cfg, 2, seed=0)
        assert result.operator_hash_before == before
        assert result.operator_hash_after == before
        assert pauli_sum_hash(h2) == before

    def test_noiseless_determinism_bit_for_bit(self, h2):
        spec = random_layers_ansatz(2, 3, 3, seed=11)
        cfg = SolverConfig(direction="minimize", grad_tolerance=1e-2, max_iterations=200)
        a = run_quantumgame(h2, spec, cfg, 2, seed=3)
        b = run_quantumgame(h2, spec, cfg, 2, seed=3)
        assert a.eigenvalues == b.eigenvalues
        for pa, pb in zip(a.players, b.players):
            assert pa.energy_history == pb.energy_history
            assert np.array_equal(pa.theta.values, pb.theta.values)

    def test_penalty_annihilation_for_converged_players(self, h2):
        # At a converged parent's own parameters the j-penalty equals its eigenvalue.
        spec = random_layers_ansatz(2, 3, 3, seed=11)
        cfg = SolverConfig(direction="minimize", grad_tolerance=1e-2, max_iterations=2000)
        result = run_quantumgame(h2, spec, cfg, 2, seed=0)
        parent_state = apply_ansatz(spec, result.players[0].theta)
        lam = expectation(h2, parent_state)
        from eigengames.quantum_sim import mixed_expectation_states

        cross = mixed_expectation_states(h2, parent_state, parent_state)
        penalty = (cross.real**2 + cross.imag**2) / lam
        assert penalty == pytest.approx(lam, abs=1e-9)

    def test_single_player_run_is_plain_vqe(self, h2):
        # k=1 leaves the parent set empty: the run is ordinary single-component
        # minimization with the same seeded initialization.
        spec = random_layers_ansatz(2, 3, 3, seed=11)
        cfg = SolverConfig(direction="minimize", grad_tolerance=1e-2, max_iterations=1500)
        result = run_quantumgame(h2, spec, cfg, 1, seed=4)
        assert result.players[0].parents == ()
        assert result.all_converged
        oracle_ground = np.sort(
            exact_eigendecomposition(pauli_sum_to_matrix(h2)).eigenvalues
        )[0]
        assert result.eigenvalues[0] == pytest.approx(oracle_ground, abs=1e-2)

    def test_parent_cache_matches_reevaluation(self, h2):
        spec = random_layers_ansatz(2, 3, 3, seed=11)
        # Noiseless: the cached broadcast eigenvalue equals a fresh measurement.
        cfg = SolverConfig(direction="minimize", grad_tolerance=1e-2, max_iterations=1500)
        result = run_quantumgame(h2, spec, cfg, 2, seed=0)
        for player in result.players:
            psi = apply_ansatz(spec, player.theta)
            assert player.eigenvalue == pytest.approx(expectation(h2, psi), abs=1e-12)
        # Finite shots: cached value within the 5-sigma estimator band.
        noisy_cfg = SolverConfig(
            direction="minimize", grad_tolerance=1e-2, max_iterations=200,
            shots=ShotModel(10_000, rng_seed=9),
        )
        noisy = run_quantumgame(h2, spec, noisy_cfg, 2, seed=0)
        from eigengames.quantum_sim import expectation_and_variance

        for player in noisy.players:
            psi = apply_ansatz(spec, player.theta)
            mean, var = expectation_and_variance(h2, psi)
            assert abs(player.eigenvalue - mean) <= 5.0 * np.sqrt(var / 10_000) + 1e-12

    def test_shot_noise_band(self, h2, h2_oracle):
        # Energies land within 10 * sqrt(Var/N) of the oracle levels, with the
        # variance taken at each converged state.
        spec = random_layers_ansatz(2, 3, 3, seed=11)
        cfg = SolverConfig(
            direction="minimize", grad_tolerance=1e-2, max_iterations=400,
            shots=ShotModel(10_000, rng_seed=2),
        )
        result = run_quantumgame(h2, spec, cfg, 4, seed=0)
        from eigengames.quantum_sim import expectation_and_variance

        order = np.argsort(result.eigenvalues)
        for rank, idx in enumerate(order):
            player = result.players[idx]
            psi = apply_ansatz(spec, player.theta)
            mean, var = expectation_and_variance(h2, psi)
            band = 10.0 * np.sqrt(var / 10_000) + 5e-4  # floor guards a hard zero variance
            assert abs(result.eigenvalues[idx] - h2_oracle[rank]) <= abs(mean - h2_oracle[rank]) + band
            assert abs(mean - h2_oracle[rank]) <= band + 2e-2


class TestVqd:
    def test_plain_vqe_ground_state(self):
        spec = layered_ansatz(2, 2)
        cfg = SolverConfig(direction="minimize", grad_tolerance=1e-3,
                           max_iterations=3000, beta=5.0)
        state = vqd_player(DIAG_3210, spec, spec.bind(np.full(8, 0.3)), (), cfg)
        assert state.converged
        assert state.eigenvalue == pytest.approx(0.0, abs=1e-2)

    def test_beta_five_reaches_first_excited(self):
        spec = layered_ansatz(2, 2)
        cfg = SolverConfig(direction="minimize", grad_tolerance=1e-3,
                           max_iterations=4000, beta=5.0)
        first = vqd_player(DIAG_3210, spec, spec.bind(np.full(8, 0.3)), (), cfg)
        parent = QuantumParent(first.theta, first.eigenvalue, apply_ansatz(spec, first.theta))
        rng = np.random.default_rng(5)
        second = vqd_player(
            DIAG_3210, spec, spec.bind(rng.uniform(-np.pi, np.pi, 8)), (parent,), cfg, index=2
        )
        assert second.eigenvalue == pytest.approx(1.0, abs=5e-2)

    def test_beta_required(self):
        spec = layered_ansatz(2, 1)
        cfg = SolverConfig(direction="minimize")
        with pytest.raises(ValueError):
            vqd_player(DIAG_3210, spec, spec.bind(np.zeros(4)), (), cfg)

    def test_adaptive_regularization_recovers_levels(self, h2, h2_oracle):
        spec = random_layers_ansatz(2, 3, 3, seed=11)
        cfg = SolverConfig(direction="minimize", grad_tolerance=1e-2,
                           max_iterations=4000, adaptive_regularization=True)
        result = run_vqd(h2, spec, cfg, 4, seed=0)
        assert np.max(np.abs(np.sort(result.eigenvalues) - h2_oracle)) <= 5e-2


class TestDeflation:
    def test_first_level_deflates_top_eigenvalue(self):
        m = HermitianMatrix(np.diag([3.0, 2.0, 1.0, 0.0]).astype(complex))
        result = deflation_vqe(m, 2)
        assert np.allclose(np.diag(result.deflated_operators[0]).real, [0.0, 2.0, 1.0, 0.0],
                           atol=1e-12)
        assert result.pairs[0][0] == pytest.approx(3.0, abs=1e-12)

    def test_full_spectrum_with_exact_solver(self):
        from eigengames.hamiltonian import build_powerlaw_hamiltonian

        matrix, spectrum = build_powerlaw_hamiltonian(6, seed=4)
        result = deflation_vqe(matrix, 6, exact_top_eigenvector_solver)
        got = np.array([lam for lam, _ in result.pairs])
        assert np.max(np.abs(got - spectrum.eigenvalues)) <= 1e-6

    def test_single_level_is_plain_vqe(self):
        m = HermitianMatrix(np.diag([3.0, 2.0, 1.0, 0.0]).astype(complex))
        result = deflation_vqe(m, 1)
        assert len(result.pairs) == 1
        assert result.pairs[0][0] == pytest.approx(3.0, abs=1e-12)

    def test_power_iteration_solver_agrees(self):
        from eigengames.hamiltonian import build_powerlaw_hamiltonian

        matrix, spectrum = build_powerlaw_hamiltonian(6, seed=4)
        result = deflation_vqe(matrix, 2, power_iteration_solver, t=20_000)
        got = np.array([lam for lam, _ in result.pairs])
        assert np.max(np.abs(got - spectrum.eigenvalues[:2])) <= 1e-6

    def test_input_matrix_untouched(self):
        entries = np.diag([3.0, 2.0, 1.0, 0.0]).astype(complex)
        m = HermitianMatrix(entries.copy())
        deflation_vqe(m, 4)
        assert np.array_equal(m.entries, entries)

    def test_too_many_levels_rejected(self):
        m = HermitianMatrix(np.eye(2, dtype=complex))
        with pytest.raises(ValueError):
            deflation_vqe(m, 3)

    def test_solver_failure_yields_partial_result(self):
        from eigengames.hamiltonian import build_powerlaw_hamiltonian

        matrix, spectrum = build_powerlaw_hamiltonian(6, seed=4)
        # A one-step budget cannot converge, so the run stops at level 1.
        result = deflation_vqe(matrix, 3, power_iteration_solver, t=1)
        assert not result.complete
        assert result.failed_level == 1
        assert result.pairs == []
