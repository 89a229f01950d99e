"""Parameterized eigensolver players and their baselines.

The game player ascends a per-player utility whose penalty terms are built
from interference-circuit cross expectations against frozen parents, so no
operator is ever deflated.  The two baselines included for comparison are
overlap-penalized minimization (VQD) and explicit Hotelling deflation driven
by a pluggable single-component solver.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from .errors import DegenerateParentError, NonConvergenceError, NumericalOverflowError
from .hamiltonian import HermitianMatrix, PauliSum, exact_eigendecomposition
from .quantum_sim import (
    AnsatzSpec,
    ParameterTensor,
    ShotModel,
    StateVector,
    apply_ansatz,
    mixed_expectation_noisy,
    parameter_shift_gradient,
    shot_noisy_expectation,
    swap_test_overlap_noisy,
)

PARENT_EIGENVALUE_GUARD = 1e-10
MIN_MODE_SHIFT_MARGIN = 1.0

Direction = Literal["maximize", "minimize"]


@dataclass(frozen=True)
class QuantumParent:
    """Broadcast record of a converged player: parameters, eigenvalue, prepared state.

    The eigenvalue is <psi(theta)| M |psi(theta)> with respect to the original
    operator, cached at broadcast time and never re-measured.
    """

    theta: ParameterTensor
    eigenvalue: float
    statevector: StateVector


@dataclass
class QuantumPlayerState:
    index: int
    theta: ParameterTensor
    parents: tuple[QuantumParent, ...]
    eigenvalue: float = float("nan")
    converged: bool = False
    iterations_used: int = 0
    energy_history: list[float] = field(default_factory=list)
    utility_history: list[float] = field(default_factory=list)
    grad_norm_history: list[float] = field(default_factory=list)
    max_imag_residue: float = 0.0


@dataclass(frozen=True)
class SolverConfig:
    """Shared hyperparameters for the parameterized solvers.

    ``eta=None`` selects 1/(2L) with L the spectral norm of the operator the
    loop actually optimizes (the shifted operator in minimize mode; M plus the
    weighted overlap projectors for the penalized baseline).  ``beta`` feeds
    the fixed-weight overlap penalty; ``adaptive_regularization`` switches the
    penalty weights to 2 * (spectral upper bound - parent eigenvalue), which
    needs no tuning.
    """

    eta: float | None = None
    max_iterations: int = 2000
    grad_tolerance: float = 1e-2
    shots: ShotModel = ShotModel()
    direction: Direction = "maximize"
    beta: float | None = None
    adaptive_regularization: bool = False

    def __post_init__(self):
        if self.eta is not None and self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.grad_tolerance <= 0:
            raise ValueError("grad_tolerance must be positive")


def pauli_sum_hash(h: PauliSum) -> str:
    """Canonical content hash used by the structural no-mutation check."""
    blob = repr((h.num_qubits, tuple(h.terms))).encode()
    return hashlib.sha256(blob).hexdigest()


def _game_operator(m: PauliSum, direction: Direction) -> tuple[PauliSum, float]:
    """Operator the ascent actually runs on, plus the energy offset.

    Maximization ascends M itself.  Minimization ascends A = offset*I - M with
    offset = |coefficients|_1 + margin: pure negation leaves the target
    spectrum touching zero whenever M has a zero eigenvalue, which makes
    parent penalty denominators degenerate, while the shifted operator keeps
    every eigenvalue of A at least the margin.  Energies are recovered as
    offset - <A>.
    """
    if direction == "maximize":
        return m, 0.0
    offset = m.one_norm + MIN_MODE_SHIFT_MARGIN
    return m.scaled(-1.0).plus_identity(offset), offset


def quantum_utility(
    m: PauliSum,
    spec: AnsatzSpec,
    theta_r: ParameterTensor | Sequence[float],
    parents: Sequence[QuantumParent],
    shots: ShotModel = ShotModel(),
    rng: np.random.Generator | None = None,
) -> float:
    """<psi_r|M|psi_r> - sum_j |<psi_r|M|psi_j>|^2 / <psi_j|M|psi_j>, shot model applied throughout.

    Cross terms come from the interference circuit (real and imaginary
    read-outs); parent denominators are the cached broadcast eigenvalues.
    """
    value, _ = _utility_and_residue(m, spec, theta_r, tuple(parents), shots, rng)
    return value


# The cross term enters as |z|^2 rather than the literal complex square: both
# agree whenever states and operator are real (where the squared quantity is
# real), but the complex square depends on the ansatz's global phase, which a
# player can rotate freely to cancel or even invert its penalty.  Squaring the
# modulus keeps the penalty phase-invariant; the imaginary part is logged.


def _utility_and_residue(
    m: PauliSum,
    spec: AnsatzSpec,
    theta_r: ParameterTensor | Sequence[float],
    parents: tuple[QuantumParent, ...],
    shots: ShotModel,
    rng: np.random.Generator | None,
    parent_eigenvalues: Sequence[float] | None = None,
) -> tuple[float, float]:
    psi_r = apply_ansatz(spec, theta_r)
    value = shot_noisy_expectation(m, psi_r, shots, rng)
    residue = 0.0
    denominators = (
        [p.eigenvalue for p in parents] if parent_eigenvalues is None else list(parent_eigenvalues)
    )
    for parent, lam in zip(parents, denominators):
        if abs(lam) < PARENT_EIGENVALUE_GUARD:
            raise DegenerateParentError(
                f"cached parent eigenvalue {lam:.3e} is below the division guard"
            )
        cross = mixed_expectation_noisy(m, psi_r, parent.statevector, shots, rng)
        value -= (cross.real**2 + cross.imag**2) / lam
        residue = max(residue, abs(cross.imag))
    return float(value), residue


def quantumgame_player(
    m: PauliSum,
    spec: AnsatzSpec,
    theta_init: ParameterTensor | Sequence[float],
    parents: Sequence[QuantumParent],
    cfg: SolverConfig,
    index: int = 1,
) -> QuantumPlayerState:
    """Gradient ascent on the player utility via parameter-shift, parents frozen.

    Minimization runs the same ascent on the shifted-negated operator (see
    ``_game_operator``); parent penalty denominators are derived from the
    cached M-eigenvalues without re-measuring.  Stops when the gradient norm
    reaches tolerance or the iteration budget runs out (partial result).
    """
    parents = tuple(parents)
    theta = theta_init if isinstance(theta_init, ParameterTensor) else spec.bind(theta_init)
    game_op, offset = _game_operator(m, cfg.direction)
    game_denominators = tuple(
        p.eigenvalue if cfg.direction == "maximize" else offset - p.eigenvalue for p in parents
    )
    eta = cfg.eta
    if eta is None:
        # 1/(2L) with L the norm of the operator the ascent actually runs on.
        spectrum = exact_eigendecomposition(pauli_sum_to_matrix_cached(game_op))
        eta = 1.0 / (2.0 * spectrum.spectral_norm)

    rng = cfg.shots.make_rng()
    state = QuantumPlayerState(index=index, theta=theta, parents=parents)

    def objective(values: np.ndarray) -> float:
        value, residue = _utility_and_residue(
            game_op, spec, theta.with_values(values), parents, cfg.shots, rng,
            parent_eigenvalues=game_denominators,
        )
        state.max_imag_residue = max(state.max_imag_residue, residue)
        return value

    values = theta.values.copy()
    for _ in range(cfg.max_iterations):
        grad = parameter_shift_gradient(objective, values)
        if not np.all(np.isfinite(grad)):
            raise NumericalOverflowError("parameter-shift gradient stopped being finite")
        gnorm = float(np.linalg.norm(grad))
        game_value = objective(values)
        if not np.isfinite(game_value):
            raise NumericalOverflowError("utility stopped being finite")
        psi = apply_ansatz(spec, theta.with_values(values))
        energy = shot_noisy_expectation(m, psi, cfg.shots, rng)
        state.grad_norm_history.append(gnorm)
        state.utility_history.append(game_value)
        state.energy_history.append(energy)
        if gnorm <= cfg.grad_tolerance:
            state.converged = True
            break
        values = values + eta * grad
        state.iterations_used += 1

    state.theta = theta.with_values(values)
    final_psi = apply_ansatz(spec, state.theta)
    state.eigenvalue = shot_noisy_expectation(m, final_psi, cfg.shots, rng)
    return state


def vqd_player(
    m: PauliSum,
    spec: AnsatzSpec,
    theta_init: ParameterTensor | Sequence[float],
    parents: Sequence[QuantumParent],
    cfg: SolverConfig,
    index: int = 1,
) -> QuantumPlayerState:
    """Overlap-penalized minimization: <M> + sum_j beta_j |<psi|psi_j>|^2.

    Fixed mode uses beta_j = cfg.beta.  Adaptive mode sets
    beta_j = 2 * (lambda_bound - lambda_j) where lambda_bound is the Pauli
    1-norm upper bound on the spectrum and lambda_j the parent's previously
    calculated eigenvalue, which always exceeds the gap the penalty must beat.
    Overlaps come from the SwapTest circuit.
    """
    parents = tuple(parents)
    if cfg.beta is None and not cfg.adaptive_regularization:
        raise ValueError("vqd_player needs cfg.beta or adaptive_regularization")
    theta = theta_init if isinstance(theta_init, ParameterTensor) else spec.bind(theta_init)
    if cfg.adaptive_regularization:
        bound = m.one_norm
        betas = tuple(2.0 * (bound - p.eigenvalue) for p in parents)
    else:
        betas = tuple(cfg.beta for _ in parents)

    eta = cfg.eta
    if eta is None:
        # The penalized objective is the expectation of M + sum_j beta_j P_j,
        # so 1/(2L) uses that operator's norm bound, not ||M|| alone.
        spectrum = exact_eigendecomposition(pauli_sum_to_matrix_cached(m))
        eta = 1.0 / (2.0 * (spectrum.spectral_norm + sum(betas)))

    rng = cfg.shots.make_rng()
    state = QuantumPlayerState(index=index, theta=theta, parents=parents)

    def objective(values: np.ndarray) -> float:
        psi = apply_ansatz(spec, theta.with_values(values))
        value = shot_noisy_expectation(m, psi, cfg.shots, rng)
        for parent, beta in zip(parents, betas):
            value += beta * swap_test_overlap_noisy(psi, parent.statevector, cfg.shots, rng)
        return value

    values = theta.values.copy()
    for _ in range(cfg.max_iterations):
        grad = parameter_shift_gradient(objective, values)
        if not np.all(np.isfinite(grad)):
            raise NumericalOverflowError("parameter-shift gradient stopped being finite")
        gnorm = float(np.linalg.norm(grad))
        cost = objective(values)
        psi = apply_ansatz(spec, theta.with_values(values))
        energy = shot_noisy_expectation(m, psi, cfg.shots, rng)
        state.grad_norm_history.append(gnorm)
        state.utility_history.append(cost)
        state.energy_history.append(energy)
        if gnorm <= cfg.grad_tolerance:
            state.converged = True
            break
        values = values - eta * grad
        state.iterations_used += 1

    state.theta = theta.with_values(values)
    final_psi = apply_ansatz(spec, state.theta)
    state.eigenvalue = shot_noisy_expectation(m, final_psi, cfg.shots, rng)
    return state


# A tiny cache avoids re-densifying the same Pauli sum for every auto step size.
_DENSE_CACHE: dict[tuple, HermitianMatrix] = {}


def pauli_sum_to_matrix_cached(h: PauliSum) -> HermitianMatrix:
    from .hamiltonian import pauli_sum_to_matrix

    key = (h.num_qubits, h.terms)
    if key not in _DENSE_CACHE:
        _DENSE_CACHE[key] = pauli_sum_to_matrix(h)
    return _DENSE_CACHE[key]


@dataclass
class DeflationResult:
    pairs: list[tuple[float, np.ndarray]]
    complete: bool
    failed_level: int | None = None
    deflated_operators: list[np.ndarray] = field(default_factory=list)  # M_2, M_3, ...


VqeSolver = Callable[[HermitianMatrix, int], np.ndarray]


def exact_top_eigenvector_solver(matrix: HermitianMatrix, iterations: int) -> np.ndarray:
    """Oracle single-component maximizer: the dense top eigenvector."""
    vals, vecs = np.linalg.eigh(matrix.entries)
    return vecs[:, -1]


def power_iteration_solver(matrix: HermitianMatrix, iterations: int, tol: float = 1e-12) -> np.ndarray:
    """Plain power iteration; needs a dominant eigenvalue of largest magnitude."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(matrix.dim) + 1j * rng.standard_normal(matrix.dim)
    v /= np.linalg.norm(v)
    for _ in range(iterations):
        w = matrix.entries @ v
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            raise NonConvergenceError("power iteration collapsed to zero")
        w = w / norm
        if 1.0 - abs(complex(np.vdot(v, w))) < tol:
            return w
        v = w
    raise NonConvergenceError(f"power iteration did not converge in {iterations} steps")


def deflation_vqe(
    m: HermitianMatrix,
    k: int,
    vqe_solver: VqeSolver = exact_top_eigenvector_solver,
    t: int = 1000,
) -> DeflationResult:
    """Explicit Hotelling deflation: M_{j+1} = M_j - lambda_j |psi_j><psi_j|.

    Each level maximizes on its own private deflated copy; the input operator
    is never touched.  Solver failures yield a partial result flagged at the
    failing level.
    """
    if k > m.dim:
        raise ValueError(f"k={k} exceeds dimension {m.dim}")
    work = m.entries.copy()
    result = DeflationResult(pairs=[], complete=True)
    for level in range(1, k + 1):
        try:
            psi = vqe_solver(HermitianMatrix(work), t)
        except NonConvergenceError:
            result.complete = False
            result.failed_level = level
            return result
        lam = float(np.vdot(psi, work @ psi).real)
        result.pairs.append((lam, psi))
        work = work - lam * np.outer(psi, psi.conj())
        work = 0.5 * (work + work.conj().T)
        result.deflated_operators.append(work.copy())
    return result


@dataclass
class QuantumGameResult:
    players: list[QuantumPlayerState]
    eigenvalues: list[float]
    total_iterations: int
    all_converged: bool
    operator_hash_before: str
    operator_hash_after: str


def _sequential_run(
    m: PauliSum,
    spec: AnsatzSpec,
    cfg: SolverConfig,
    k: int,
    seed: int,
    player_fn,
) -> QuantumGameResult:
    if k > 2**spec.num_qubits:
        raise ValueError(f"k={k} exceeds the register dimension {2**spec.num_qubits}")
    hash_before = pauli_sum_hash(m)
    players: list[QuantumPlayerState] = []
    parents: list[QuantumParent] = []
    eigenvalues: list[float] = []
    total_iterations = 0
    all_converged = True
    for r in range(1, k + 1):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(r,)))
        theta_init = spec.bind(rng.uniform(-np.pi, np.pi, size=spec.num_parameters))
        player_cfg = SolverConfig(
            eta=cfg.eta,
            max_iterations=cfg.max_iterations,
            grad_tolerance=cfg.grad_tolerance,
            shots=ShotModel(cfg.shots.num_shots, rng_seed=int(rng.integers(0, 2**31 - 1))),
            direction=cfg.direction,
            beta=cfg.beta,
            adaptive_regularization=cfg.adaptive_regularization,
        )
        state = player_fn(m, spec, theta_init, tuple(parents), player_cfg, index=r)
        players.append(state)
        eigenvalues.append(state.eigenvalue)
        total_iterations += state.iterations_used
        if not state.converged:
            all_converged = False
        parents.append(
            QuantumParent(
                theta=state.theta,
                eigenvalue=state.eigenvalue,
                statevector=apply_ansatz(spec, state.theta),
            )
        )
    hash_after = pauli_sum_hash(m)
    if hash_after != hash_before:
        raise AssertionError("input operator mutated during the run")
    return QuantumGameResult(
        players=players,
        eigenvalues=eigenvalues,
        total_iterations=total_iterations,
        all_converged=all_converged,
        operator_hash_before=hash_before,
        operator_hash_after=hash_after,
    )


def run_quantumgame(m: PauliSum, spec: AnsatzSpec, cfg: SolverConfig, k: int, seed: int) -> QuantumGameResult:
    """Players 1..k in sequence; every converged (theta, eigenvalue) is broadcast onward.

    The operator is hashed before and after the run: the whole point of the
    formulation is that no deflation step ever rewrites it.
    """
    return _sequential_run(m, spec, cfg, k, seed, quantumgame_player)


def run_vqd(m: PauliSum, spec: AnsatzSpec, cfg: SolverConfig, k: int, seed: int) -> QuantumGameResult:
    """Sequential VQD baseline with the same broadcast bookkeeping."""
    return _sequential_run(m, spec, cfg, k, seed, vqd_player)
