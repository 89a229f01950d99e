"""Sequential eigenvector games on real symmetric matrices.

Two gradient modes drive the same ascent loop: the exact utility gradient,
and its zeroth-order variant carrying the closed-form forward-differences
error term (linear in the perturbation sigma).  Players run in order; each
converged player broadcasts its vector and Rayleigh quotient to all later
players, which penalize alignment against it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import (
    DegenerateParentError,
    DivergenceError,
    InvalidPerturbationError,
    NormalizationError,
    NumericalOverflowError,
)
from .hamiltonian import HermitianMatrix, Spectrum, exact_eigendecomposition

RAYLEIGH_GUARD = 1e-12
UNIT_NORM_ATOL = 1e-9

GradientMode = Literal["exact", "zeroth_order"]


def _as_real_symmetric(m) -> np.ndarray:
    if isinstance(m, HermitianMatrix):
        return m.real_symmetric()
    a = np.asarray(m, dtype=np.float64)
    return a


@dataclass(frozen=True)
class ParentVector:
    """A frozen earlier player: unit vector plus cached products it never recomputes."""

    vector: np.ndarray
    rayleigh: float          # v^T M v
    m_times_vector: np.ndarray

    @staticmethod
    def from_vector(m, vector: np.ndarray) -> "ParentVector":
        mat = _as_real_symmetric(m)
        vector = np.array(vector, dtype=np.float64)
        mv = mat @ vector
        rayleigh = float(vector @ mv)
        vector.flags.writeable = False
        mv.flags.writeable = False
        return ParentVector(vector=vector, rayleigh=rayleigh, m_times_vector=mv)


def _coerce_parents(m, parents) -> tuple[ParentVector, ...]:
    out = []
    for p in parents or ():
        if not isinstance(p, ParentVector):
            p = ParentVector.from_vector(m, p)
        if abs(p.rayleigh) < RAYLEIGH_GUARD:
            raise DegenerateParentError(
                f"parent Rayleigh quotient {p.rayleigh:.3e} is below the division guard"
            )
        out.append(p)
    return tuple(out)


@dataclass
class PlayerState:
    """One player's solve: final vector, its frozen parents, and telemetry."""

    index: int
    vector: np.ndarray
    parents: tuple[ParentVector, ...]
    iterations_used: int = 0
    converged: bool = False
    grad_norm_history: list[float] = field(default_factory=list)
    riemannian_norm_history: list[float] = field(default_factory=list)
    utility_history: list[float] = field(default_factory=list)
    angular_error_history: list[float] = field(default_factory=list)

    @property
    def final_grad_norm(self) -> float:
        return self.grad_norm_history[-1] if self.grad_norm_history else float("nan")

    @property
    def final_riemannian_norm(self) -> float:
        return self.riemannian_norm_history[-1] if self.riemannian_norm_history else float("nan")


@dataclass(frozen=True)
class GameConfig:
    """Hyperparameters shared by every player of one run.

    ``step_size=None`` selects 1 / (2 ||M||_2), with the norm taken from the
    exact spectrum.
    """

    step_size: float | None = None
    sigma: float = 0.0
    grad_tolerance: float = 1e-3
    max_iterations_per_player: int = 100_000
    num_players: int = 1

    def __post_init__(self):
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.grad_tolerance <= 0:
            raise ValueError("grad_tolerance must be positive")
        if self.max_iterations_per_player < 1:
            raise ValueError("max_iterations_per_player must be at least 1")
        if self.num_players < 1:
            raise ValueError("num_players must be at least 1")


def utility(v: np.ndarray, parents, m) -> float:
    """Player utility: v^T M v minus alignment penalties against frozen parents."""
    mat = _as_real_symmetric(m)
    parents = _coerce_parents(mat, parents)
    v = np.asarray(v, dtype=np.float64)
    value = float(v @ (mat @ v))
    for p in parents:
        cross = float(v @ p.m_times_vector)
        value -= cross * cross / p.rayleigh
    return value


def exact_gradient(v: np.ndarray, parents, m) -> np.ndarray:
    """2 M (v - sum_j (v^T M v_j / v_j^T M v_j) v_j)."""
    mat = _as_real_symmetric(m)
    parents = _coerce_parents(mat, parents)
    v = np.asarray(v, dtype=np.float64)
    shrunk = v.copy()
    for p in parents:
        shrunk -= (float(v @ p.m_times_vector) / p.rayleigh) * p.vector
    return 2.0 * (mat @ shrunk)


def finite_diff_error_term(parents, m) -> np.ndarray:
    """sigma-independent part of the forward-differences error: diag(M) - sum_j (M v_j)^{o2} / v_j^T M v_j.

    Constant in the player's own vector, so solvers compute it once per player.
    """
    mat = _as_real_symmetric(m)
    parents = _coerce_parents(mat, parents)
    err = np.diag(mat).copy()
    for p in parents:
        err -= p.m_times_vector**2 / p.rayleigh
    return err


def finite_diff_gradient(v: np.ndarray, parents, m, sigma: float) -> np.ndarray:
    """Closed form of the forward-differences gradient: exact gradient + sigma * error term."""
    return exact_gradient(v, parents, m) + sigma * finite_diff_error_term(parents, m)


def numeric_forward_difference(v: np.ndarray, parents, m, sigma: float) -> np.ndarray:
    """Literal forward quotient [f(v + sigma e_k) - f(v)] / sigma, two utility calls per component.

    The perturbed point is deliberately not renormalized: the utility is a
    quadratic in each component, which makes this quotient algebraically equal
    to ``finite_diff_gradient``.
    """
    if sigma <= 0:
        raise InvalidPerturbationError("sigma must be strictly positive")
    v = np.asarray(v, dtype=np.float64)
    grad = np.empty_like(v)
    for k in range(v.shape[0]):
        shifted = v.copy()
        shifted[k] += sigma
        grad[k] = (utility(shifted, parents, m) - utility(v, parents, m)) / sigma
    return grad


def angular_error(v: np.ndarray, v_star: np.ndarray) -> float:
    """arccos of the absolute inner product; invariant to sign and global phase."""
    v = np.asarray(v)
    v_star = np.asarray(v_star)
    for name, x in (("v", v), ("v_star", v_star)):
        if abs(np.linalg.norm(x) - 1.0) > 1e-6:
            raise NormalizationError(f"{name} is not unit norm")
    return float(np.arccos(min(1.0, abs(complex(np.vdot(v, v_star))))))


def eigengame_player(
    m,
    init: np.ndarray,
    parents,
    cfg: GameConfig,
    mode: GradientMode = "exact",
    index: int = 1,
    oracle_vector: np.ndarray | None = None,
    step_size: float | None = None,
) -> PlayerState:
    """Run one player's ascent: v <- normalize(v + alpha g) until the gradient is radial.

    The stopping test is on the tangential (Riemannian) norm of the mode's own
    gradient, ||(I - v v^T) g||, which vanishes at the ascent's fixed points;
    the raw ambient norm never does (it equals twice the Rayleigh quotient at
    an eigenvector) and is recorded as telemetry instead.
    """
    mat = _as_real_symmetric(m)
    parents = _coerce_parents(mat, parents)
    v = np.asarray(init, dtype=np.float64).copy()
    if abs(np.linalg.norm(v) - 1.0) > UNIT_NORM_ATOL:
        raise NormalizationError("init vector must be unit norm")

    alpha = step_size if step_size is not None else cfg.step_size
    if alpha is None:
        alpha = 1.0 / (2.0 * np.abs(np.linalg.eigvalsh(mat)).max())

    sigma = cfg.sigma if mode == "zeroth_order" else 0.0
    error_term = finite_diff_error_term(parents, mat) if mode == "zeroth_order" else None

    state = PlayerState(index=index, vector=v, parents=parents)
    mv_parents = [p.m_times_vector for p in parents]
    rayleighs = [p.rayleigh for p in parents]

    for _ in range(cfg.max_iterations_per_player + 1):
        mv = mat @ v
        # g = 2 M (v - sum_j c_j v_j) = 2 (Mv - sum_j c_j Mv_j), c_j = (v . Mv_j) / r_j
        shrunk_mv = mv.copy()
        cross_terms = []
        for mvj, rj in zip(mv_parents, rayleighs):
            cross = float(v @ mvj)
            cross_terms.append(cross)
            shrunk_mv -= (cross / rj) * mvj
        grad = 2.0 * shrunk_mv
        if error_term is not None:
            grad = grad + sigma * error_term

        if not np.all(np.isfinite(grad)):
            raise NumericalOverflowError("gradient stopped being finite")

        value = float(v @ mv) - sum(c * c / r for c, r in zip(cross_terms, rayleighs))
        if not np.isfinite(value):
            raise NumericalOverflowError("utility stopped being finite")

        riemannian = grad - float(grad @ v) * v
        rnorm = float(np.linalg.norm(riemannian))
        state.grad_norm_history.append(float(np.linalg.norm(grad)))
        state.riemannian_norm_history.append(rnorm)
        state.utility_history.append(value)
        if oracle_vector is not None:
            state.angular_error_history.append(angular_error(v, oracle_vector))

        if rnorm <= cfg.grad_tolerance:
            state.converged = True
            break
        if state.iterations_used >= cfg.max_iterations_per_player:
            break

        stepped = v + alpha * grad
        norm = float(np.linalg.norm(stepped))
        if norm < 1e-300:
            raise DivergenceError("update produced a zero vector")
        v = stepped / norm
        state.iterations_used += 1

    state.vector = v
    return state


@dataclass
class SequentialResult:
    """All players of one sequential run, in solve order."""

    players: list[PlayerState]
    eigenvalues: list[float]
    total_iterations: int
    all_converged: bool
    mode: GradientMode
    spectrum: Spectrum | None = None


def run_sequential(
    m,
    cfg: GameConfig,
    seed: int,
    mode: GradientMode = "exact",
    spectrum: Spectrum | None = None,
) -> SequentialResult:
    """Solve players 1..k in order, broadcasting each converged vector to its children.

    A player that misses tolerance is restarted once from a fresh seeded
    initialization; if it still misses, the run stops there and the result
    carries every completed player plus ``all_converged=False``.
    """
    mat = _as_real_symmetric(m)
    dim = mat.shape[0]
    if cfg.num_players > dim:
        raise ValueError(f"num_players {cfg.num_players} exceeds matrix dimension {dim}")

    if spectrum is None:
        spectrum = exact_eigendecomposition(HermitianMatrix(mat.astype(np.complex128)))
    if spectrum.gaps.size and spectrum.gaps[: cfg.num_players].min() < 1e-6:
        warnings.warn("leading eigengaps below 1e-6; convergence may be ill-conditioned", stacklevel=2)

    alpha = cfg.step_size if cfg.step_size is not None else 1.0 / (2.0 * spectrum.spectral_norm)

    players: list[PlayerState] = []
    eigenvalues: list[float] = []
    parents: list[ParentVector] = []
    total_iterations = 0
    all_converged = True

    for i in range(1, cfg.num_players + 1):
        oracle_vec = spectrum.eigenvector(i - 1).real if spectrum is not None else None
        state = None
        for attempt in range(2):  # one automatic re-seed on non-convergence
            rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i, attempt)))
            init = rng.standard_normal(dim)
            init /= np.linalg.norm(init)
            candidate = eigengame_player(
                mat, init, parents, cfg, mode=mode, index=i,
                oracle_vector=oracle_vec, step_size=alpha,
            )
            total_iterations += candidate.iterations_used
            state = candidate
            if candidate.converged:
                break
        players.append(state)
        eigenvalues.append(float(state.vector @ (mat @ state.vector)))
        if not state.converged:
            all_converged = False
            break
        parents.append(ParentVector.from_vector(mat, state.vector))

    return SequentialResult(
        players=players,
        eigenvalues=eigenvalues,
        total_iterations=total_iterations,
        all_converged=all_converged,
        mode=mode,
        spectrum=spectrum,
    )


TELEMETRY_HEADER = (
    "player_index,iteration,utility,grad_norm,riemannian_grad_norm,angular_error_vs_oracle"
)


def telemetry_rows(result: SequentialResult) -> list[tuple]:
    """Flatten per-iteration telemetry into CSV-ready rows.

    Columns: player_index, iteration, utility, grad_norm, riemannian_grad_norm,
    angular_error_vs_oracle (empty when no oracle was supplied).
    """
    rows = []
    for player in result.players:
        have_angle = bool(player.angular_error_history)
        for t in range(len(player.grad_norm_history)):
            rows.append(
                (
                    player.index,
                    t,
                    player.utility_history[t],
                    player.grad_norm_history[t],
                    player.riemannian_norm_history[t],
                    player.angular_error_history[t] if have_angle else "",
                )
            )
    return rows


def telemetry_to_csv(result: SequentialResult) -> str:
    lines = [TELEMETRY_HEADER]
    for row in telemetry_rows(result):
        lines.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
    return "\n".join(lines) + "\n"
