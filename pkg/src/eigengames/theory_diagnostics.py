"""Numeric evaluators for the solver's convergence and error-accumulation bounds.

These are proof-level constants, not tight estimates: the iteration bounds in
particular carry factorial/eigengap products that dwarf observed counts.  The
measurement harnesses below sample gradients and check the corresponding
inequality with zero tolerance for violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateParentError
from .eigengame_classical import ParentVector, finite_diff_gradient
from .hamiltonian import (
    HermitianMatrix,
    PauliSum,
    build_powerlaw_hamiltonian,
    pauli_sum_to_matrix,
)
from .quantum_sim import AnsatzSpec, ShotModel, apply_ansatz, parameter_shift_gradient
from .quantumgame import QuantumParent, quantum_utility


@dataclass(frozen=True)
class BoundParams:
    """Inputs shared by the bound formulas.

    ``kappa`` is the spectral ratio lambda_top / lambda_(i-1,i-1) of the last
    parent; ``c`` is the parent-accuracy constant in [0, 1/16]; ``sigma`` the
    forward-differences perturbation; ``diag_norm`` = ||diag(M)||_2.
    """

    lambda_top: float
    gaps: tuple[float, ...]
    player_index: int
    kappa: float = 1.0
    c: float = 0.0
    sigma: float = 0.0
    num_layers: int = 1
    num_qubits: int = 1
    phi_tol: float = 1e-2
    diag_norm: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.c <= 1.0 / 16.0:
            raise ValueError("c must lie in [0, 1/16]")
        if any(g <= 0 for g in self.gaps):
            raise ValueError("gaps must be strictly positive")
        if self.gaps and self.lambda_top < max(self.gaps):
            raise ValueError("lambda_top must be at least the largest gap")
        if self.player_index < 1:
            raise ValueError("player_index is 1-based")

    @property
    def gap_i(self) -> float:
        return self.gaps[self.player_index - 1]


def lipschitz_bound_classical(p: BoundParams) -> float:
    """Gradient-norm bound with accurate parents:
    4 (lambda_top * i + (1 + kappa) c g_i) + sigma (||diag(M)|| + 2 (i-1) lambda_top kappa).
    """
    i = p.player_index
    noiseless = 4.0 * (p.lambda_top * i + (1.0 + p.kappa) * p.c * p.gap_i)
    error = p.sigma * (p.diag_norm + 2.0 * (i - 1) * p.lambda_top * p.kappa)
    return noiseless + error


def lipschitz_bound_quantum(p: BoundParams) -> float:
    """Parameter-space analog: sqrt(layers * qubits) times the sigma=0 classical bound."""
    scale = math.sqrt(p.num_layers * p.num_qubits)
    return scale * 4.0 * (p.lambda_top * p.player_index + (1.0 + p.kappa) * p.c * p.gap_i)


def _iteration_bracket(lambda_top: float, gaps: Sequence[float], c_k: float) -> float:
    """Shared factor [(16 lambda_top)^{k-1} (k-1)! / prod(g_j) / (16 c_k)]."""
    k = len(gaps)
    gap_product = 1.0
    for g in gaps:
        if g <= 0:
            raise ZeroDivisionError("iteration bounds need strictly positive gaps")
        gap_product *= g
    if c_k <= 0:
        raise ZeroDivisionError("c_k must be positive")
    return (16.0 * lambda_top) ** (k - 1) * math.factorial(k - 1) / gap_product / (16.0 * c_k)


def iteration_bound_classical(
    lipschitz_zero: Sequence[float],
    lipschitz_sigma: Sequence[float],
    lambda_top: float,
    gaps: Sequence[float],
    c_k: float,
) -> int:
    """ceil( sum_i 5 pi^2 (L_i(0)/L_i(sigma)) * bracket^2 ), the pre-big-O total."""
    if len(lipschitz_zero) != len(lipschitz_sigma) or len(lipschitz_zero) != len(gaps):
        raise ValueError("need one L_i(0), L_i(sigma), and gap per player")
    bracket = _iteration_bracket(lambda_top, gaps, c_k)
    total = sum(
        5.0 * math.pi**2 * (l0 / ls) * bracket**2
        for l0, ls in zip(lipschitz_zero, lipschitz_sigma)
    )
    return math.ceil(total)


def iteration_bound_quantum(
    lipschitz_theta: Sequence[float],
    num_layers: int,
    num_qubits: int,
    lambda_top: float,
    gaps: Sequence[float],
    c_k: float,
) -> int:
    """ceil( sum_i 4 pi^2 (L_theta_i^2 / sqrt(layers*qubits)) * bracket^2 )."""
    if len(lipschitz_theta) != len(gaps):
        raise ValueError("need one L_theta and gap per player")
    bracket = _iteration_bracket(lambda_top, gaps, c_k)
    scale = math.sqrt(num_layers * num_qubits)
    total = sum(4.0 * math.pi**2 * (lt**2 / scale) * bracket**2 for lt in lipschitz_theta)
    return math.ceil(total)


def _rank_one_norms(v: np.ndarray, w: np.ndarray) -> float:
    """||v w^T|| + ||w v^T|| + ||w w^T|| for the spectral norm of rank-1 maps."""
    nv, nw = float(np.linalg.norm(v)), float(np.linalg.norm(w))
    return nv * nw + nw * nv + nw * nw


def error_accumulation_bound_classical(
    m,
    parents_true: Sequence[np.ndarray],
    parents_hat: Sequence[np.ndarray],
    sigma: float,
) -> float:
    """Bound on the child-gradient change caused by mis-specified parents.

    2||M|| sum_j (||v_j w_j^T|| + ||w_j v_j^T|| + ||w_j w_j^T||) lambda_top/lambda_jj
    + sigma sum_j (2 ||M v_j|| ||M w_j|| + ||M w_j||^2) / lambda_jj,
    with w_j the parent displacement and lambda_jj the true parent's Rayleigh
    quotient.
    """
    mat = m.entries.real if isinstance(m, HermitianMatrix) else np.asarray(m, dtype=np.float64)
    norm_m = float(np.linalg.norm(mat, 2))
    lambda_top = float(np.linalg.eigvalsh(mat).max())
    total = 0.0
    for v_j, v_hat in zip(parents_true, parents_hat):
        w_j = np.asarray(v_hat, dtype=np.float64) - np.asarray(v_j, dtype=np.float64)
        lambda_jj = float(v_j @ (mat @ v_j))
        if abs(lambda_jj) < 1e-12:
            raise DegenerateParentError("true parent has a near-zero Rayleigh quotient")
        total += 2.0 * norm_m * _rank_one_norms(v_j, w_j) * lambda_top / lambda_jj
        mv, mw = mat @ v_j, mat @ w_j
        total += (
            sigma
            * (2.0 * float(np.linalg.norm(mv)) * float(np.linalg.norm(mw)) + float(np.linalg.norm(mw)) ** 2)
            / lambda_jj
        )
    return total


def error_accumulation_bound_quantum(
    m,
    spec: AnsatzSpec,
    parents_true_theta: Sequence,
    parents_hat_theta: Sequence,
) -> float:
    """Parameter-space analog, scaled by sqrt(layers * qubits); w_j is the
    statevector displacement v(theta_hat_j) - v(theta_j)."""
    mat = m.entries if isinstance(m, HermitianMatrix) else np.asarray(m, dtype=np.complex128)
    norm_m = float(np.linalg.norm(mat, 2))
    lambda_top = float(np.linalg.eigvalsh(mat).max())
    scale = math.sqrt(spec.num_layers * spec.num_qubits)
    total = 0.0
    for theta_true, theta_hat in zip(parents_true_theta, parents_hat_theta):
        v_true = apply_ansatz(spec, theta_true).amplitudes
        v_hat = apply_ansatz(spec, theta_hat).amplitudes
        w = v_hat - v_true
        lambda_jj = float(np.vdot(v_true, mat @ v_true).real)
        if abs(lambda_jj) < 1e-12:
            raise DegenerateParentError("true parent has a near-zero eigenvalue")
        total += 2.0 * scale * norm_m * _rank_one_norms(v_true, w) * lambda_top / lambda_jj
    return total


# ---------------------------------------------------------------------------
# Measurement harnesses (drive the invariant suites and the diagnostics command)
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticRow:
    bound_name: str
    parameters: str
    bound_value: float
    measured_value: float

    @property
    def passed(self) -> bool:
        return self.measured_value <= self.bound_value


def _rotate_towards(v: np.ndarray, direction_seed: np.random.Generator, angle: float) -> np.ndarray:
    """Rotate a unit vector by a given angle towards a random orthogonal direction."""
    delta = direction_seed.standard_normal(v.shape[0])
    delta -= (delta @ v) * v
    delta /= np.linalg.norm(delta)
    return np.cos(angle) * v + np.sin(angle) * delta


def sampled_lipschitz_check(
    dim: int,
    num_samples: int,
    seed: int,
    sigmas: Sequence[float] = (0.0, 1e-3, 1e-2, 1e-1),
    c: float = 1.0 / 16.0,
) -> list[DiagnosticRow]:
    """Sample gradients with accurate parents and compare against the Lipschitz bound.

    Parents are oracle eigenvectors perturbed within the accurate-parents
    hypothesis angle c * g_i / ((i-1) * lambda_top); the child vector is drawn
    uniformly on the sphere.
    """
    matrix, spectrum = build_powerlaw_hamiltonian(dim, seed=seed)
    mat = matrix.real_symmetric()
    lambda_top = float(spectrum.eigenvalues[0])
    diag_norm = float(np.linalg.norm(np.diag(mat)))
    rng = np.random.default_rng(seed + 1)
    rows = []
    for draw in range(num_samples):
        i = int(rng.integers(1, min(dim - 1, 6) + 1))
        sigma = float(rng.choice(np.asarray(sigmas)))
        g_i = float(spectrum.gaps[i - 1])
        if i > 1:
            phi_max = min(c * g_i / ((i - 1) * lambda_top), math.sqrt(0.5))
        else:
            phi_max = 0.0
        parents = []
        for j in range(i - 1):
            angle = float(rng.uniform(0.0, phi_max))
            v_hat = _rotate_towards(spectrum.eigenvector(j).real, rng, angle)
            parents.append(ParentVector.from_vector(mat, v_hat))
        v = rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        grad = finite_diff_gradient(v, parents, mat, sigma)
        params = BoundParams(
            lambda_top=lambda_top,
            gaps=tuple(float(g) for g in spectrum.gaps),
            player_index=i,
            kappa=lambda_top / float(spectrum.eigenvalues[max(i - 2, 0)]),
            c=c,
            sigma=sigma,
            diag_norm=diag_norm,
        )
        rows.append(
            DiagnosticRow(
                bound_name="lipschitz_classical",
                parameters=f"dim={dim} i={i} sigma={sigma:g} draw={draw}",
                bound_value=lipschitz_bound_classical(params),
                measured_value=float(np.linalg.norm(grad)),
            )
        )
    return rows


def measure_error_accumulation_classical(
    dim: int,
    epsilons: Sequence[float],
    seed: int,
    sigma: float = 1e-2,
    player_index: int = 3,
    samples_per_epsilon: int = 20,
) -> list[DiagnosticRow]:
    """Measure the child-gradient change under parent rotations of angle epsilon.

    The measured value is the tangential norm of the gradient difference with
    perturbed versus exact parents; the bound is the error-accumulation
    formula evaluated on the same displacements.
    """
    matrix, spectrum = build_powerlaw_hamiltonian(dim, seed=seed)
    mat = matrix.real_symmetric()
    rng = np.random.default_rng(seed + 17)
    rows = []
    true_parents = [spectrum.eigenvector(j).real for j in range(player_index - 1)]
    for eps in epsilons:
        for draw in range(samples_per_epsilon):
            hat_parents = [_rotate_towards(v, rng, eps) for v in true_parents]
            v = rng.standard_normal(dim)
            v /= np.linalg.norm(v)
            g_true = finite_diff_gradient(v, true_parents, mat, sigma)
            g_hat = finite_diff_gradient(v, hat_parents, mat, sigma)
            diff = (g_hat - g_true) - ((g_hat - g_true) @ v) * v
            bound = error_accumulation_bound_classical(matrix, true_parents, hat_parents, sigma)
            rows.append(
                DiagnosticRow(
                    bound_name="error_accumulation_classical",
                    parameters=f"dim={dim} eps={eps:g} draw={draw}",
                    bound_value=bound,
                    measured_value=float(np.linalg.norm(diff)),
                )
            )
    return rows


def measure_error_accumulation_quantum(
    h: PauliSum,
    spec: AnsatzSpec,
    epsilons: Sequence[float],
    seed: int,
    samples_per_epsilon: int = 5,
) -> list[DiagnosticRow]:
    """Same inequality in parameter space, gradients from the parameter-shift rule."""
    rng = np.random.default_rng(seed)
    shots = ShotModel()  # exact
    dense = pauli_sum_to_matrix(h)
    rows = []
    for eps in epsilons:
        for draw in range(samples_per_epsilon):
            theta_parent = spec.bind(rng.uniform(-np.pi, np.pi, size=spec.num_parameters))
            parent_state = apply_ansatz(spec, theta_parent)
            lam = float(np.vdot(parent_state.amplitudes,
                                dense.entries @ parent_state.amplitudes).real)
            if abs(lam) < 1e-6:
                continue
            direction = rng.standard_normal(spec.num_parameters)
            direction /= np.linalg.norm(direction)
            theta_hat = theta_parent.with_values(theta_parent.values + eps * direction)
            parent_true = QuantumParent(theta_parent, lam, parent_state)
            hat_state = apply_ansatz(spec, theta_hat)
            lam_hat = float(np.vdot(hat_state.amplitudes, dense.entries @ hat_state.amplitudes).real)
            parent_hat = QuantumParent(theta_hat, lam_hat, hat_state)

            theta_child = spec.bind(rng.uniform(-np.pi, np.pi, size=spec.num_parameters))

            def utility_with(parent):
                def objective(values: np.ndarray) -> float:
                    return quantum_utility(h, spec, theta_child.with_values(values), (parent,), shots)
                return objective

            g_true = parameter_shift_gradient(utility_with(parent_true), theta_child.values)
            g_hat = parameter_shift_gradient(utility_with(parent_hat), theta_child.values)
            bound = error_accumulation_bound_quantum(dense, spec, [theta_parent], [theta_hat])
            rows.append(
                DiagnosticRow(
                    bound_name="error_accumulation_quantum",
                    parameters=f"eps={eps:g} draw={draw}",
                    bound_value=bound,
                    measured_value=float(np.linalg.norm(g_hat - g_true)),
                )
            )
    return rows


def loglog_slope(epsilons: Sequence[float], measured: Sequence[float]) -> float:
    """Least-squares slope of log(measured) against log(epsilon)."""
    x = np.log(np.asarray(epsilons, dtype=np.float64))
    y = np.log(np.asarray(measured, dtype=np.float64))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
