"""Hermitian operators: construction, Pauli-sum form, and exact diagonalization.

Everything downstream consumes either a dense ``HermitianMatrix`` or a
``PauliSum`` (the measurable form of the same operator).  The dense
eigendecomposition here is the ground-truth oracle for every solver test.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    HermiticityError,
    InvalidDimensionError,
    MalformedPauliError,
    PauliFormatError,
)

HERMITICITY_ATOL = 1e-12
GAP_FLOOR = 1e-6
EIGENVALUE_CLAMP = 1e-4
DEGENERACY_FLAG_TOL = 1e-9

PAULI_MATRICES = {
    "I": np.array([[1, 0], [0, 1]], dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class HermitianMatrix:
    """Dense Hermitian operator; immutable after construction."""

    def __init__(self, entries: np.ndarray):
        entries = np.array(entries, dtype=np.complex128)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise InvalidDimensionError(f"expected a square matrix, got shape {entries.shape}")
        if entries.shape[0] == 0:
            raise InvalidDimensionError("dimension must be at least 1")
        if not np.allclose(entries, entries.conj().T, rtol=0.0, atol=HERMITICITY_ATOL):
            worst = np.abs(entries - entries.conj().T).max()
            raise HermiticityError(f"matrix is not Hermitian (max |M - M^H| = {worst:.3e})")
        self.entries = _readonly(entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def num_qubits(self) -> int:
        """Qubit count when dim is a power of two; errors otherwise."""
        q = self.dim.bit_length() - 1
        if 2**q != self.dim:
            raise InvalidDimensionError(f"dim {self.dim} is not a power of two")
        return q

    def real_symmetric(self) -> np.ndarray:
        """The real part, after checking the imaginary part is negligible.

        The classical game operates on real symmetric matrices only.
        """
        if np.abs(self.entries.imag).max() > HERMITICITY_ATOL:
            raise HermiticityError("matrix has a non-negligible imaginary part")
        return _readonly(self.entries.real.copy())

    def to_csv(self) -> str:
        """Row-major CSV with interleaved re,im columns."""
        lines = []
        for row in self.entries:
            cells = []
            for z in row:
                cells.append(repr(float(z.real)))
                cells.append(repr(float(z.imag)))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PauliSum:
    """Weighted sum of Pauli strings with real coefficients.

    Real coefficients make the summed operator Hermitian automatically.
    """

    num_qubits: int
    terms: tuple[tuple[float, str], ...]

    def __post_init__(self):
        if self.num_qubits < 1:
            raise InvalidDimensionError("num_qubits must be positive")
        for coeff, string in self.terms:
            if len(string) != self.num_qubits:
                raise MalformedPauliError(
                    f"string {string!r} has length {len(string)}, expected {self.num_qubits}"
                )
            bad = set(string) - set("IXYZ")
            if bad:
                raise MalformedPauliError(f"string {string!r} has illegal characters {bad}")
            if isinstance(coeff, complex):
                raise MalformedPauliError("coefficients must be real")

    @property
    def one_norm(self) -> float:
        """Sum of |coefficients|; an upper bound on the spectral radius."""
        return float(sum(abs(c) for c, _ in self.terms))

    def scaled(self, factor: float) -> "PauliSum":
        return PauliSum(self.num_qubits, tuple((factor * c, s) for c, s in self.terms))

    def plus_identity(self, offset: float) -> "PauliSum":
        """Add offset * I, merging with an existing identity term if present."""
        identity = "I" * self.num_qubits
        terms = list(self.terms)
        for i, (c, s) in enumerate(terms):
            if s == identity:
                terms[i] = (c + offset, s)
                break
        else:
            terms.append((offset, identity))
        return PauliSum(self.num_qubits, tuple(terms))


@dataclass(frozen=True)
class Spectrum:
    """Full eigendecomposition, eigenvalues sorted descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column i pairs with eigenvalues[i]
    gaps: np.ndarray = field(init=False)
    degenerate: bool = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=np.float64)
        vecs = np.asarray(self.eigenvectors, dtype=np.complex128)
        if np.any(np.diff(vals) > 0):
            raise ValueError("eigenvalues must be sorted descending")
        gaps = -np.diff(vals)
        object.__setattr__(self, "eigenvalues", _readonly(vals))
        object.__setattr__(self, "eigenvectors", _readonly(vecs))
        object.__setattr__(self, "gaps", _readonly(gaps))
        object.__setattr__(self, "degenerate", bool(gaps.size and gaps.min() < DEGENERACY_FLAG_TOL))

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def eigenvector(self, i: int) -> np.ndarray:
        return self.eigenvectors[:, i]

    @property
    def spectral_norm(self) -> float:
        return float(np.abs(self.eigenvalues).max())


def random_orthonormal(dim: int, seed: int) -> np.ndarray:
    """Random real orthogonal matrix from a QR factorization; deterministic per seed.

    Real orthogonality satisfies the unitarity contract P^H P = I while keeping
    similarity transforms of real diagonals real symmetric, which the classical
    game requires.
    """
    if dim < 1:
        raise InvalidDimensionError("dim must be at least 1")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    # Fix the column signs so the factorization (and hence the output) is unique.
    q = q * np.sign(np.diag(r))
    return q


def build_powerlaw_hamiltonian(
    dim: int,
    seed: int,
    exponent: float = 2.0,
    basis: np.ndarray | None = None,
) -> tuple[HermitianMatrix, Spectrum]:
    """Random test Hamiltonian with a known, well-separated power-law spectrum.

    Eigenvalues are u**exponent for u ~ Uniform(0, 1), clamped into
    (1e-4, 1 - 1e-4) and redrawn until every adjacent gap exceeds 1e-6, so
    eigengap-dependent bounds stay finite.  M = P^T D P for a random
    orthogonal P (pass ``basis`` to override, e.g. the identity for debugging).
    """
    if dim < 2:
        raise InvalidDimensionError("dim must be at least 2")
    if exponent <= 0:
        raise ValueError("exponent must be positive")
    rng = np.random.default_rng(seed)
    eigenvalues = None
    for _ in range(1000):
        draw = np.sort(rng.uniform(0.0, 1.0, size=dim) ** exponent)[::-1]
        draw = np.clip(draw, EIGENVALUE_CLAMP, 1.0 - EIGENVALUE_CLAMP)
        if np.all(-np.diff(draw) > GAP_FLOOR):
            eigenvalues = draw
            break
    if eigenvalues is None:
        raise RuntimeError("could not draw a spectrum with all gaps above the floor")

    p = random_orthonormal(dim, seed) if basis is None else np.asarray(basis, dtype=np.float64)
    m = p.T @ np.diag(eigenvalues) @ p
    m = 0.5 * (m + m.T)  # kill rounding asymmetry
    # Columns of P^T are the eigenvectors of M = P^T D P.
    spectrum = Spectrum(eigenvalues=eigenvalues.copy(), eigenvectors=p.T.astype(np.complex128))
    return HermitianMatrix(m), spectrum


def pauli_sum_to_matrix(h: PauliSum) -> HermitianMatrix:
    """Dense form of a Pauli sum: sum_i a_i * kron(P_i1, ..., P_iq)."""
    dim = 2**h.num_qubits
    total = np.zeros((dim, dim), dtype=np.complex128)
    for coeff, string in h.terms:
        term = np.eye(1, dtype=np.complex128)
        for ch in string:
            term = np.kron(term, PAULI_MATRICES[ch])
        total += coeff * term
    return HermitianMatrix(total)


def exact_eigendecomposition(m: HermitianMatrix) -> Spectrum:
    """Brute-force dense diagonalization; the oracle every solver is checked against."""
    vals, vecs = np.linalg.eigh(m.entries)
    order = np.argsort(vals)[::-1]
    spectrum = Spectrum(eigenvalues=vals[order], eigenvectors=vecs[:, order])
    if spectrum.degenerate:
        warnings.warn("spectrum contains (near-)degenerate eigenvalues", stacklevel=2)
    return spectrum


def load_pauli_sum(path: str | Path) -> PauliSum:
    """Parse a Pauli-sum text file: '#' comment lines, then '<coeff> <string>' per line."""
    path = Path(path)
    terms: list[tuple[float, str]] = []
    lengths: set[int] = set()
    with path.open("r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise PauliFormatError(lineno, f"expected '<coefficient> <pauli string>', got {line!r}")
            coeff_text, string = parts
            try:
                coeff = float(coeff_text)
            except ValueError:
                raise PauliFormatError(lineno, f"bad coefficient {coeff_text!r}") from None
            if set(string) - set("IXYZ"):
                raise PauliFormatError(lineno, f"bad pauli string {string!r}")
            lengths.add(len(string))
            if len(lengths) > 1:
                raise MalformedPauliError(
                    f"line {lineno}: string {string!r} disagrees with earlier term lengths {sorted(lengths)}"
                )
            terms.append((coeff, string))
    if not terms:
        raise PauliFormatError(0, "file contains no terms")
    return PauliSum(num_qubits=lengths.pop(), terms=tuple(terms))


def save_pauli_sum(h: PauliSum, path: str | Path, header: Sequence[str] = ()) -> None:
    """Write the text form; coefficients use shortest round-trip decimals."""
    path = Path(path)
    lines = [f"# {text}" for text in header]
    lines += [f"{repr(coeff)} {string}" for coeff, string in h.terms]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def bundled_h2_path() -> Path:
    """Path of the shipped two-qubit H2 Pauli file."""
    return Path(__file__).parent / "data" / "h2_parity_2q.txt"
