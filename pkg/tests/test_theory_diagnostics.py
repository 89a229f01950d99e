"""Bound calculators and the sampled inequality checks."""

import math

import numpy as np
import pytest

from eigengames.hamiltonian import build_powerlaw_hamiltonian, load_pauli_sum, bundled_h2_path
from eigengames.quantum_sim import AnsatzSpec, random_layers_ansatz
from eigengames.theory_diagnostics import (
    BoundParams,
    error_accumulation_bound_classical,
    error_accumulation_bound_quantum,
    iteration_bound_classical,
    iteration_bound_quantum,
    lipschitz_bound_classical,
    lipschitz_bound_quantum,
    loglog_slope,
    measure_error_accumulation_classical,
    measure_error_accumulation_quantum,
    sampled_lipschitz_check,
)


class TestLipschitzClassical:
    def test_sigma_zero_special_case(self):
        p = BoundParams(lambda_top=2.0, gaps=(0.5,), player_index=1, kappa=1.5, c=1.0 / 32.0)
        assert lipschitz_bound_classical(p) == pytest.approx(
            4.0 * (2.0 + (1.0 + 1.5) * (1.0 / 32.0) * 0.5)
        )

    def test_first_player_substitution(self):
        p = BoundParams(lambda_top=1.0, gaps=(0.25,), player_index=1, kappa=0.5, c=1.0 / 16.0)
        assert lipschitz_bound_classical(p) == pytest.approx(
            4.0 * (1.0 + 1.5 * (1.0 / 16.0) * 0.25)
        )

    def test_hand_arithmetic_instance(self):
        # 4*(1*2 + (1+1)*(1/16)*0.5) + 0.1*(1 + 2*1*1*1) = 8.55
        p = BoundParams(
            lambda_top=1.0, gaps=(0.5, 0.5), player_index=2,
            kappa=1.0, c=1.0 / 16.0, sigma=0.1, diag_norm=1.0,
        )
        assert lipschitz_bound_classical(p) == pytest.approx(8.55, abs=1e-12)

    def test_c_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            BoundParams(lambda_top=1.0, gaps=(0.5,), player_index=1, c=0.25)


class TestLipschitzQuantum:
    def test_single_layer_single_qubit_equals_classical(self):
        p = BoundParams(lambda_top=1.3, gaps=(0.4,), player_index=1, kappa=0.7,
                        c=1.0 / 16.0, num_layers=1, num_qubits=1)
        assert lipschitz_bound_quantum(p) == pytest.approx(lipschitz_bound_classical(p))

    def test_sixteen_parameters_scale_by_four(self):
        base = BoundParams(lambda_top=1.0, gaps=(0.5, 0.5), player_index=2, kappa=1.0,
                           c=1.0 / 16.0, num_layers=1, num_qubits=1)
        wide = BoundParams(lambda_top=1.0, gaps=(0.5, 0.5), player_index=2, kappa=1.0,
                           c=1.0 / 16.0, num_layers=4, num_qubits=4)
        assert lipschitz_bound_quantum(wide) == pytest.approx(4.0 * lipschitz_bound_quantum(base))

    def test_hand_arithmetic_instance(self):
        p = BoundParams(lambda_top=1.0, gaps=(0.5,), player_index=1, kappa=0.0,
                        c=0.0, num_layers=3, num_qubits=2)
        assert lipschitz_bound_quantum(p) == pytest.approx(math.sqrt(6.0) * 4.0, abs=1e-12)

    def test_ratio_to_classical_is_exactly_sqrt_lq(self):
        p = BoundParams(lambda_top=1.7, gaps=(0.3, 0.3, 0.3), player_index=3, kappa=2.0,
                        c=1.0 / 20.0, num_layers=5, num_qubits=3)
        ratio = lipschitz_bound_quantum(p) / lipschitz_bound_classical(p)
        assert ratio == pytest.approx(math.sqrt(15.0), rel=1e-12)


class TestIterationBoundClassical:
    def test_single_player_unit_instance(self):
        # 5 pi^2 * 1 * [1 * 1 / 1 / (16/16)]^2 = 5 pi^2 -> ceil = 50
        assert iteration_bound_classical([4.0], [4.0], 1.0, (1.0,), 1.0 / 16.0) == 50

    def test_doubling_c_quarters_the_bound(self):
        small = iteration_bound_classical([4.0], [4.0], 1.0, (0.5,), 1.0 / 64.0)
        large = iteration_bound_classical([4.0], [4.0], 1.0, (0.5,), 1.0 / 32.0)
        assert abs(small - 4 * large) <= 4  # ceil slack only

    def test_sigma_inflated_lipschitz_reduces_bound(self):
        base = iteration_bound_classical([4.0], [4.0], 1.0, (0.5,), 1.0 / 16.0)
        looser = iteration_bound_classical([4.0], [6.0], 1.0, (0.5,), 1.0 / 16.0)
        assert looser < base

    def test_zero_gap_guarded(self):
        with pytest.raises(ZeroDivisionError):
            iteration_bound_classical([4.0], [4.0], 1.0, (0.0,), 1.0 / 16.0)

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            iteration_bound_classical([4.0, 4.0], [4.0], 1.0, (0.5,), 1.0 / 16.0)


class TestIterationBoundQuantum:
    def test_worked_instance_hand_arithmetic(self):
        # L = sqrt(6)*4*(1 + (1/16)*0.5); bracket = (1/0.5)*(1/(16*(1/16))) = 2;
        # T = ceil(4 pi^2 * L^2/sqrt(6) * 4) = 6582.
        lip = math.sqrt(6.0) * 4.0 * (1.0 + (1.0 / 16.0) * 0.5)
        by_hand = math.ceil(4.0 * math.pi**2 * (lip**2 / math.sqrt(6.0)) * 2.0**2)
        assert by_hand == 6582
        assert iteration_bound_quantum([lip], 3, 2, 1.0, (0.5,), 1.0 / 16.0) == 6582

    def test_finite_and_monotone_in_lipschitz(self):
        lo = iteration_bound_quantum([4.0], 1, 1, 1.0, (0.5,), 1.0 / 16.0)
        hi = iteration_bound_quantum([5.0], 1, 1, 1.0, (0.5,), 1.0 / 16.0)
        assert 0 < lo < hi

    def test_quadrupled_parameter_count_halves_bound(self):
        base = iteration_bound_quantum([4.0], 1, 1, 1.0, (0.5,), 1.0 / 16.0)
        wide = iteration_bound_quantum([4.0], 2, 2, 1.0, (0.5,), 1.0 / 16.0)
        assert abs(wide - base / 2.0) <= 1.0


class TestErrorAccumulationClassical:
    def test_exact_parents_give_zero(self):
        matrix, spectrum = build_powerlaw_hamiltonian(6, seed=0)
        parents = [spectrum.eigenvector(j).real for j in range(2)]
        assert error_accumulation_bound_classical(matrix, parents, parents, 0.1) == 0.0

    def test_sigma_zero_keeps_only_first_sum(self):
        matrix, spectrum = build_powerlaw_hamiltonian(6, seed=0)
        true = [spectrum.eigenvector(0).real]
        rng = np.random.default_rng(1)
        delta = rng.standard_normal(6)
        delta -= (delta @ true[0]) * true[0]
        delta /= np.linalg.norm(delta)
        hat = [np.cos(1e-3) * true[0] + np.sin(1e-3) * delta]
        with_sigma = error_accumulation_bound_classical(matrix, true, hat, 0.5)
        without = error_accumulation_bound_classical(matrix, true, hat, 0.0)
        assert without < with_sigma
        w = hat[0] - true[0]
        mat = matrix.real_symmetric()
        lam_top = float(spectrum.eigenvalues[0])
        lam_jj = float(true[0] @ (mat @ true[0]))
        norms = (np.linalg.norm(true[0]) * np.linalg.norm(w) * 2 + np.linalg.norm(w) ** 2)
        expected = 2.0 * np.linalg.norm(mat, 2) * norms * lam_top / lam_jj
        assert without == pytest.approx(expected, rel=1e-12)

    def test_measured_difference_within_bound(self):
        rows = measure_error_accumulation_classical(
            dim=8, epsilons=(1e-4, 1e-3, 1e-2), seed=0, samples_per_epsilon=10
        )
        assert rows and all(r.passed for r in rows)

    def test_linearity_in_epsilon(self):
        rows = measure_error_accumulation_classical(
            dim=8, epsilons=(1e-4, 1e-3, 1e-2), seed=1, samples_per_epsilon=15
        )
        means = {}
        for r in rows:
            eps = float(r.parameters.split("eps=")[1].split(" ")[0])
            means.setdefault(eps, []).append(r.measured_value)
        eps_sorted = sorted(means)
        slope = loglog_slope(eps_sorted, [float(np.mean(means[e])) for e in eps_sorted])
        assert 0.8 <= slope <= 1.2


class TestErrorAccumulationQuantum:
    def test_identical_parameters_give_zero(self):
        h = load_pauli_sum(bundled_h2_path())
        spec = random_layers_ansatz(2, 3, 3, seed=11)
        theta = spec.bind(np.linspace(0.1, 1.0, spec.num_parameters))
        assert error_accumulation_bound_quantum(None or _dense(h), spec, [theta], [theta]) == 0.0

    def test_layer_grouping_scales_bound_by_sqrt_ratio(self):
        # The same six-gate circuit declared as 3 layers of 2 gates versus
        # 6 layers of 1 gate produces identical states, so the bound changes
        # only through the sqrt(layers * qubits) factor.
        h = _dense(load_pauli_sum(bundled_h2_path()))
        gates = [("RY", 0, 0), ("RZ", 1, 1), ("RX", 0, 2),
                 ("RY", 1, 3), ("RZ", 0, 4), ("RX", 1, 5)]
        spec3 = AnsatzSpec(2, 3, (tuple(gates[0:2]), tuple(gates[2:4]), tuple(gates[4:6])),
                           (), "zero")
        spec6 = AnsatzSpec(2, 6, tuple((g,) for g in gates), (), "zero")
        rng = np.random.default_rng(0)
        theta = rng.uniform(-np.pi, np.pi, 6)
        hat = theta + 1e-3 * rng.standard_normal(6)
        b3 = error_accumulation_bound_quantum(h, spec3, [spec3.bind(theta)], [spec3.bind(hat)])
        b6 = error_accumulation_bound_quantum(h, spec6, [spec6.bind(theta)], [spec6.bind(hat)])
        assert b6 / b3 == pytest.approx(math.sqrt(2.0), rel=1e-9)

    def test_measured_gradient_difference_within_bound(self):
        h = load_pauli_sum(bundled_h2_path())
        spec = random_layers_ansatz(2, 3, 3, seed=11)
        rows = measure_error_accumulation_quantum(
            h, spec, epsilons=(1e-3,), seed=0, samples_per_epsilon=4
        )
        assert rows and all(r.passed for r in rows)


class TestSampledLipschitz:
    def test_no_violations_across_draws(self):
        rows = sampled_lipschitz_check(dim=8, num_samples=300, seed=0)
        assert len(rows) == 300
        assert all(r.passed for r in rows)

    def test_utility_bounded_by_lipschitz_constant(self):
        # With accurate (here: exact) parents, |utility| never exceeds L_i(sigma).
        from eigengames.eigengame_classical import utility

        matrix, spectrum = build_powerlaw_hamiltonian(8, seed=2)
        mat = matrix.real_symmetric()
        lam = float(spectrum.eigenvalues[0])
        diag_norm = float(np.linalg.norm(np.diag(mat)))
        rng = np.random.default_rng(0)
        for i in (1, 2, 4):
            parents = [spectrum.eigenvector(j).real for j in range(i - 1)]
            params = BoundParams(
                lambda_top=lam, gaps=tuple(float(g) for g in spectrum.gaps),
                player_index=i, kappa=lam / float(spectrum.eigenvalues[max(i - 2, 0)]),
                c=0.0, sigma=0.0, diag_norm=diag_norm,
            )
            bound = lipschitz_bound_classical(params)
            for _ in range(200):
                v = rng.standard_normal(8)
                v /= np.linalg.norm(v)
                assert abs(utility(v, parents, mat)) <= bound


class TestConvergenceWithinBound:
    def test_observed_iterations_below_proof_bound(self):
        # The pre-big-O bound is astronomically loose; the observed counts
        # must nevertheless stay below it.
        from eigengames.eigengame_classical import GameConfig, run_sequential

        matrix, spectrum = build_powerlaw_hamiltonian(8, seed=0, exponent=2.0)
        k = 4
        cfg = GameConfig(sigma=1e-4, grad_tolerance=1e-3, num_players=k)
        result = run_sequential(matrix, cfg, seed=0, mode="zeroth_order", spectrum=spectrum)
        lam = float(spectrum.eigenvalues[0])
        diag_norm = float(np.linalg.norm(np.diag(matrix.real_symmetric())))
        gaps = tuple(float(g) for g in spectrum.gaps[:k])
        l_zero, l_sigma = [], []
        for i in range(1, k + 1):
            p = BoundParams(
                lambda_top=lam, gaps=gaps, player_index=i,
                kappa=lam / float(spectrum.eigenvalues[max(i - 2, 0)]),
                c=1.0 / 16.0, sigma=0.0, diag_norm=diag_norm,
            )
            l_zero.append(lipschitz_bound_classical(p))
            p_sigma = BoundParams(
                lambda_top=lam, gaps=gaps, player_index=i,
                kappa=lam / float(spectrum.eigenvalues[max(i - 2, 0)]),
                c=1.0 / 16.0, sigma=1e-4, diag_norm=diag_norm,
            )
            l_sigma.append(lipschitz_bound_classical(p_sigma))
        bound = iteration_bound_classical(l_zero, l_sigma, lam, gaps, 1.0 / 16.0)
        assert result.total_iterations <= bound


def _dense(h):
    from eigengames.hamiltonian import pauli_sum_to_matrix

    return pauli_sum_to_matrix(h)
