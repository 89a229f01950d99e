"""Dense statevector simulation: ansatz circuits, Pauli expectations, shot noise,
parameter-shift gradients, and the two inner-product circuits.

Conventions: qubit t corresponds to character t of a Pauli string and to bit
(q - 1 - t) of the amplitude index, i.e. string character order matches the
Kronecker factor order of the dense form.  Ancilla qubits are appended as the
last (least significant) position.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BindingError,
    DimensionMismatchError,
    InvalidShotCountError,
    NormalizationError,
)
from .hamiltonian import PauliSum

NORM_ATOL = 1e-10

ROTATION_KINDS = ("RX", "RY", "RZ")


@dataclass(frozen=True)
class StateVector:
    """Normalized complex amplitudes over 2**num_qubits basis states."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.num_qubits,):
            raise DimensionMismatchError(
                f"expected {2**self.num_qubits} amplitudes for {self.num_qubits} qubits, got {amps.shape}"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_ATOL:
            raise NormalizationError(f"state norm {norm} deviates from 1 beyond {NORM_ATOL}")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    def to_csv(self) -> str:
        lines = [f"{repr(float(z.real))},{repr(float(z.imag))}" for z in self.amplitudes]
        return "\n".join(lines) + "\n"


def zero_state(num_qubits: int) -> StateVector:
    amps = np.zeros(2**num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


def plus_state(num_qubits: int) -> StateVector:
    amps = np.full(2**num_qubits, 2.0 ** (-num_qubits / 2.0), dtype=np.complex128)
    return StateVector(num_qubits, amps)


# ---------------------------------------------------------------------------
# Gate application on raw amplitude arrays
# ---------------------------------------------------------------------------

def _single_qubit_gate(amps: np.ndarray, gate: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    """Apply a 2x2 unitary to one qubit of a dense amplitude vector."""
    before = 2**qubit
    after = 2 ** (num_qubits - qubit - 1)
    work = amps.reshape(before, 2, after)
    return np.einsum("ab,ibj->iaj", gate, work).reshape(-1)


def _cnot(amps: np.ndarray, control: int, target: int, num_qubits: int) -> np.ndarray:
    work = amps.reshape((2,) * num_qubits).copy()
    sel: list = [slice(None)] * num_qubits
    sel[control] = 1
    # Indexing drops the control axis, shifting later axes down by one.
    flip_axis = target - 1 if target > control else target
    work[tuple(sel)] = np.flip(work[tuple(sel)], axis=flip_axis).copy()
    return work.reshape(-1)


def rotation_gate(kind: str, theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if kind == "RZ":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=np.complex128)
    raise ValueError(f"unknown rotation kind {kind!r}")


HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)
S_GATE = np.array([[1, 0], [0, 1j]], dtype=np.complex128)


# ---------------------------------------------------------------------------
# Ansatz
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnsatzSpec:
    """Fixed circuit layout: per-layer parameterized rotations plus a CNOT ring.

    ``layer_rotations[l]`` lists (gate kind, target qubit, slot) triples; slot s
    of layer l reads parameter l * slots_per_layer + s, so every slot is used
    exactly once.
    """

    num_qubits: int
    num_layers: int
    layer_rotations: tuple[tuple[tuple[str, int, int], ...], ...]
    entangler_pairs: tuple[tuple[int, int], ...]
    initial_state: str = "plus"  # 'plus' or 'zero'
    seed: int | None = None

    def __post_init__(self):
        if self.initial_state not in ("plus", "zero"):
            raise ValueError("initial_state must be 'plus' or 'zero'")
        if len(self.layer_rotations) != self.num_layers:
            raise ValueError("layer_rotations length must equal num_layers")
        seen = set()
        for layer in self.layer_rotations:
            for kind, qubit, slot in layer:
                if kind not in ROTATION_KINDS:
                    raise ValueError(f"unknown gate kind {kind!r}")
                if not 0 <= qubit < self.num_qubits:
                    raise ValueError(f"qubit {qubit} out of range")
                if slot in seen:
                    raise ValueError(f"parameter slot {slot} referenced twice")
                seen.add(slot)
        if seen != set(range(len(seen))):
            raise ValueError("parameter slots must be 0..m-1 with no holes")

    @property
    def num_parameters(self) -> int:
        return sum(len(layer) for layer in self.layer_rotations)

    def bind(self, values: Sequence[float]) -> "ParameterTensor":
        return ParameterTensor.for_spec(self, values)

    def describe(self) -> str:
        """Structured text form, one line per layer, for run manifests."""
        lines = [
            f"ansatz qubits={self.num_qubits} layers={self.num_layers} "
            f"parameters={self.num_parameters} initial={self.initial_state} seed={self.seed}"
        ]
        for l, layer in enumerate(self.layer_rotations):
            gates = "; ".join(f"{kind} q{qubit} slot{slot}" for kind, qubit, slot in layer)
            ent = ", ".join(f"({c},{t})" for c, t in self.entangler_pairs)
            lines.append(f"layer {l}: {gates} | cnot ring: {ent if ent else 'none'}")
        return "\n".join(lines)


@dataclass(frozen=True)
class ParameterTensor:
    """Flat real parameter vector addressable as (layer, slot)."""

    values: np.ndarray
    slots_per_layer: tuple[int, ...]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).copy()
        if vals.ndim != 1:
            raise BindingError("parameter values must be a flat vector")
        if vals.shape[0] != sum(self.slots_per_layer):
            raise BindingError(
                f"got {vals.shape[0]} values for a layout of {sum(self.slots_per_layer)} slots"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @staticmethod
    def for_spec(spec: AnsatzSpec, values: Sequence[float]) -> "ParameterTensor":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (spec.num_parameters,):
            raise BindingError(
                f"spec has {spec.num_parameters} parameters, got vector of shape {values.shape}"
            )
        return ParameterTensor(values, tuple(len(layer) for layer in spec.layer_rotations))

    def __getitem__(self, layer_slot: tuple[int, int]) -> float:
        layer, slot = layer_slot
        if not 0 <= layer < len(self.slots_per_layer):
            raise IndexError(f"layer {layer} out of range")
        if not 0 <= slot < self.slots_per_layer[layer]:
            raise IndexError(f"slot {slot} out of range for layer {layer}")
        return float(self.values[sum(self.slots_per_layer[:layer]) + slot])

    def with_values(self, values: np.ndarray) -> "ParameterTensor":
        return ParameterTensor(values, self.slots_per_layer)


def _ring_pairs(num_qubits: int) -> tuple[tuple[int, int], ...]:
    if num_qubits < 2:
        return ()
    if num_qubits == 2:
        return ((0, 1),)
    return tuple((i, (i + 1) % num_qubits) for i in range(num_qubits))


def random_layers_ansatz(
    num_qubits: int,
    num_layers: int,
    rotations_per_layer: int,
    seed: int,
    initial_state: str = "plus",
) -> AnsatzSpec:
    """Per layer: seeded-random rotation axes on seeded-random qubits, then a CNOT ring."""
    rng = np.random.default_rng(seed)
    layers = []
    slot = 0
    for _ in range(num_layers):
        gates = []
        for _ in range(rotations_per_layer):
            kind = ROTATION_KINDS[int(rng.integers(0, 3))]
            qubit = int(rng.integers(0, num_qubits))
            gates.append((kind, qubit, slot))
            slot += 1
        layers.append(tuple(gates))
    return AnsatzSpec(
        num_qubits=num_qubits,
        num_layers=num_layers,
        layer_rotations=tuple(layers),
        entangler_pairs=_ring_pairs(num_qubits),
        initial_state=initial_state,
        seed=seed,
    )


def layered_ansatz(num_qubits: int, num_layers: int, initial_state: str = "plus") -> AnsatzSpec:
    """Deterministic RY+RZ-per-qubit layers with a CNOT ring; expressive on small registers."""
    layers = []
    slot = 0
    for _ in range(num_layers):
        gates = []
        for qubit in range(num_qubits):
            gates.append(("RY", qubit, slot)); slot += 1
            gates.append(("RZ", qubit, slot)); slot += 1
        layers.append(tuple(gates))
    return AnsatzSpec(
        num_qubits=num_qubits,
        num_layers=num_layers,
        layer_rotations=tuple(layers),
        entangler_pairs=_ring_pairs(num_qubits),
        initial_state=initial_state,
    )


def apply_ansatz(spec: AnsatzSpec, theta: ParameterTensor | Sequence[float]) -> StateVector:
    """Prepare |psi(theta)> by running the layout's layers on its initial state."""
    if not isinstance(theta, ParameterTensor):
        theta = spec.bind(theta)
    if theta.values.shape[0] != spec.num_parameters:
        raise BindingError("parameter tensor does not match the ansatz layout")
    amps = (plus_state if spec.initial_state == "plus" else zero_state)(spec.num_qubits).amplitudes.copy()
    flat = theta.values
    for layer in spec.layer_rotations:
        for kind, qubit, slot in layer:
            amps = _single_qubit_gate(amps, rotation_gate(kind, flat[slot]), qubit, spec.num_qubits)
        for control, target in spec.entangler_pairs:
            amps = _cnot(amps, control, target, spec.num_qubits)
    return StateVector(spec.num_qubits, amps)


# ---------------------------------------------------------------------------
# Pauli expectations and the shot-noise model
# ---------------------------------------------------------------------------

def _apply_pauli_string(amps: np.ndarray, string: str) -> np.ndarray:
    num_qubits = len(string)
    work = amps.reshape((2,) * num_qubits)
    for qubit, ch in enumerate(string):
        if ch == "I":
            continue
        if ch == "X":
            work = np.flip(work, axis=qubit)
        elif ch == "Y":
            work = np.flip(work, axis=qubit).copy()
            sel0: list = [slice(None)] * num_qubits
            sel1: list = [slice(None)] * num_qubits
            sel0[qubit] = 0
            sel1[qubit] = 1
            work[tuple(sel0)] = work[tuple(sel0)] * (-1j)
            work[tuple(sel1)] = work[tuple(sel1)] * 1j
        elif ch == "Z":
            work = work.copy()
            sel1 = [slice(None)] * num_qubits
            sel1[qubit] = 1
            work[tuple(sel1)] = -work[tuple(sel1)]
    return work.reshape(-1)


def pauli_sum_apply(h: PauliSum, amps: np.ndarray) -> np.ndarray:
    """M |psi> accumulated term by term, without building the dense matrix."""
    out = np.zeros_like(amps)
    for coeff, string in h.terms:
        out += coeff * _apply_pauli_string(amps, string)
    return out


def expectation(h: PauliSum, psi: StateVector) -> float:
    """Exact <psi| M |psi>; the imaginary residue must vanish for Hermitian M."""
    if h.num_qubits != psi.num_qubits:
        raise DimensionMismatchError(
            f"operator acts on {h.num_qubits} qubits, state has {psi.num_qubits}"
        )
    value = complex(np.vdot(psi.amplitudes, pauli_sum_apply(h, psi.amplitudes)))
    if abs(value.imag) > NORM_ATOL:
        raise ValueError(f"expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def expectation_and_variance(h: PauliSum, psi: StateVector) -> tuple[float, float]:
    """(<M>, Var(M)) with Var(M) = <M^2> - <M>^2 = ||M psi||^2 - <M>^2."""
    if h.num_qubits != psi.num_qubits:
        raise DimensionMismatchError(
            f"operator acts on {h.num_qubits} qubits, state has {psi.num_qubits}"
        )
    m_psi = pauli_sum_apply(h, psi.amplitudes)
    mean = float(np.vdot(psi.amplitudes, m_psi).real)
    var = float(np.vdot(m_psi, m_psi).real) - mean * mean
    return mean, max(var, 0.0)


@dataclass(frozen=True)
class ShotModel:
    """Finite-shot estimator noise: Gaussian with std sqrt(Var(M)/N).

    ``num_shots=None`` means exact (infinite-shot) evaluation.  The seed only
    fixes the stream produced by ``make_rng``; callers running trajectories
    hold one generator for the whole run.
    """

    num_shots: int | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_shots is not None and self.num_shots < 1:
            raise InvalidShotCountError("num_shots must be >= 1 when finite")

    @property
    def is_exact(self) -> bool:
        return self.num_shots is None

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)

    def perturb(self, mean: float, variance: float, rng: np.random.Generator | None = None) -> float:
        if self.is_exact:
            return mean
        rng = self.make_rng() if rng is None else rng
        scale = np.sqrt(max(variance, 0.0) / self.num_shots)
        return float(mean + rng.normal(0.0, 1.0) * scale)


def shot_noisy_expectation(
    h: PauliSum,
    psi: StateVector,
    shots: ShotModel,
    rng: np.random.Generator | None = None,
) -> float:
    """<M> plus Gaussian noise of std sqrt(Var(M)/N); exact when Var(M) = 0."""
    if shots.is_exact:
        return expectation(h, psi)
    mean, var = expectation_and_variance(h, psi)
    return shots.perturb(mean, var, rng)


# ---------------------------------------------------------------------------
# Inner-product circuits
# ---------------------------------------------------------------------------

def _interference_states(psi_r: StateVector, psi_j: StateVector) -> tuple[np.ndarray, np.ndarray]:
    """Ancilla circuit states for the Re and Im read-outs of <psi_r| M |psi_j>.

    Builds (|psi_j>|0> + |psi_r>|1>)/sqrt(2) on q+1 qubits (ancilla last),
    then applies H to the ancilla; the Im variant applies S before H.
    """
    if psi_r.num_qubits != psi_j.num_qubits:
        raise DimensionMismatchError("states act on different qubit counts")
    q = psi_r.num_qubits
    superposed = np.zeros(2 ** (q + 1), dtype=np.complex128)
    superposed[0::2] = psi_j.amplitudes / np.sqrt(2.0)
    superposed[1::2] = psi_r.amplitudes / np.sqrt(2.0)
    re_state = _single_qubit_gate(superposed, HADAMARD, q, q + 1)
    im_state = _single_qubit_gate(superposed, S_GATE, q, q + 1)
    im_state = _single_qubit_gate(im_state, HADAMARD, q, q + 1)
    return re_state, im_state


def _extend_with_ancilla_z(h: PauliSum) -> PauliSum:
    """M x Z on q+1 qubits: each string gains a trailing 'Z' on the ancilla."""
    return PauliSum(h.num_qubits + 1, tuple((c, s + "Z") for c, s in h.terms))


def mixed_expectation_states(h: PauliSum, psi_r: StateVector, psi_j: StateVector) -> complex:
    """<psi_r| M |psi_j> from two expectations of M x Z on the ancilla circuit."""
    if h.num_qubits != psi_r.num_qubits:
        raise DimensionMismatchError("operator and states act on different qubit counts")
    re_state, im_state = _interference_states(psi_r, psi_j)
    observable = _extend_with_ancilla_z(h)
    q = h.num_qubits + 1
    re_val = float(np.vdot(re_state, pauli_sum_apply(observable, re_state)).real)
    im_val = float(np.vdot(im_state, pauli_sum_apply(observable, im_state)).real)
    return complex(re_val, im_val)


def mixed_expectation(
    h: PauliSum,
    spec: AnsatzSpec,
    theta_r: ParameterTensor | Sequence[float],
    theta_j: ParameterTensor | Sequence[float],
) -> complex:
    """<psi(theta_r)| M |psi(theta_j)> via the (q+1)-qubit interference circuit."""
    return mixed_expectation_states(h, apply_ansatz(spec, theta_r), apply_ansatz(spec, theta_j))


def mixed_expectation_noisy(
    h: PauliSum,
    psi_r: StateVector,
    psi_j: StateVector,
    shots: ShotModel,
    rng: np.random.Generator | None = None,
) -> complex:
    """Shot-noisy variant: both M x Z read-outs carry their own estimator noise."""
    if shots.is_exact:
        return mixed_expectation_states(h, psi_r, psi_j)
    re_state, im_state = _interference_states(psi_r, psi_j)
    observable = _extend_with_ancilla_z(h)
    parts = []
    for state in (re_state, im_state):
        m_state = pauli_sum_apply(observable, state)
        mean = float(np.vdot(state, m_state).real)
        var = float(np.vdot(m_state, m_state).real) - mean * mean
        parts.append(shots.perturb(mean, var, rng))
    return complex(parts[0], parts[1])


def swap_test_overlap(psi1: StateVector, psi2: StateVector) -> float:
    """|<psi1|psi2>|^2 read off a simulated (2q+1)-qubit SwapTest.

    The ancilla-0 probability satisfies P(0) = 1/2 + |<psi1|psi2>|^2 / 2, so
    the overlap is 2 P(0) - 1.
    """
    if psi1.num_qubits != psi2.num_qubits:
        raise DimensionMismatchError("states act on different qubit counts")
    p0 = _swap_test_p0(psi1, psi2)
    return float(np.clip(2.0 * p0 - 1.0, 0.0, 1.0))


def _swap_test_p0(psi1: StateVector, psi2: StateVector) -> float:
    """Ancilla-0 probability of the SwapTest circuit (ancilla first, H-cSWAP-H)."""
    q = psi1.num_qubits
    block = np.kron(psi1.amplitudes, psi2.amplitudes)
    amps = np.zeros(2 ** (2 * q + 1), dtype=np.complex128)
    amps[: block.size] = block
    amps = _single_qubit_gate(amps, HADAMARD, 0, 2 * q + 1)
    work = amps.reshape(2, 2**q, 2**q)
    work[1] = work[1].T.copy()  # controlled register swap
    amps = _single_qubit_gate(work.reshape(-1), HADAMARD, 0, 2 * q + 1)
    return float(np.sum(np.abs(amps[: 2 ** (2 * q)]) ** 2))


def swap_test_overlap_noisy(
    psi1: StateVector,
    psi2: StateVector,
    shots: ShotModel,
    rng: np.random.Generator | None = None,
) -> float:
    """SwapTest overlap with Bernoulli sampling noise on the ancilla probability."""
    if shots.is_exact:
        return swap_test_overlap(psi1, psi2)
    p0 = _swap_test_p0(psi1, psi2)
    p_hat = shots.perturb(p0, p0 * (1.0 - p0), rng)
    return float(np.clip(2.0 * p_hat - 1.0, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Parameter-shift gradients
# ---------------------------------------------------------------------------

def parameter_shift_gradient(
    objective: Callable[[np.ndarray], float],
    theta: np.ndarray,
    shift_eigenvalue: float = 0.5,
) -> np.ndarray:
    """Exact gradient for rotation-generated circuits: lam * [f(+pi/4lam) - f(-pi/4lam)].

    Exact whenever the objective is a first-harmonic trigonometric polynomial
    in each parameter, which holds for expectation values of rotation-gate
    circuits where every parameter feeds exactly one gate.  Uses 2m objective
    evaluations.
    """
    theta = np.asarray(theta, dtype=np.float64)
    shift = np.pi / (4.0 * shift_eigenvalue)
    grad = np.empty_like(theta)
    for k in range(theta.shape[0]):
        plus = theta.copy()
        minus = theta.copy()
        plus[k] += shift
        minus[k] -= shift
        grad[k] = shift_eigenvalue * (objective(plus) - objective(minus))
    return grad
