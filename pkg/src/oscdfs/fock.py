"""Truncated multimode Fock space: ladder operators, density matrices, state functionals.

Basis ordering is fixed with mode 1 most significant::

    index = sum_i n_i * (cutoff + 1) ** (num_modes - 1 - i)

so for two modes with cutoff 1 the basis is |0,0>, |0,1>, |1,0>, |1,1>.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_CUTOFF = 3

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = -1e-10


@dataclass(frozen=True)
class FockSpace:
    num_modes: int
    cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if self.num_modes < 1:
            raise ValueError(f"num_modes must be positive, got {self.num_modes}")
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")

    @property
    def levels(self) -> int:
        return self.cutoff + 1

    @property
    def dim(self) -> int:
        return self.levels ** self.num_modes

    def index(self, occupations: Sequence[int]) -> int:
        if len(occupations) != self.num_modes:
            raise ValueError(
                f"expected {self.num_modes} occupations, got {len(occupations)}"
            )
        idx = 0
        for n in occupations:
            if not 0 <= n <= self.cutoff:
                raise ValueError(f"occupation {n} outside 0..{self.cutoff}")
            idx = idx * self.levels + int(n)
        return idx

    def occupations(self, index: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.num_modes):
            index, n = divmod(index, self.levels)
            out.append(n)
        return tuple(reversed(out))

    def basis(self) -> list[tuple[int, ...]]:
        return list(itertools.product(range(self.levels), repeat=self.num_modes))

    def labels(self) -> list[str]:
        return ["_".join(str(n) for n in occ) for occ in self.basis()]

    def total_excitations(self) -> np.ndarray:
        return np.array([sum(occ) for occ in self.basis()])

    def basis_ket(self, occupations: Sequence[int]) -> np.ndarray:
        ket = np.zeros(self.dim, dtype=complex)
        ket[self.index(occupations)] = 1.0
        return ket


@dataclass(frozen=True, eq=False)
class FockOperator:
    space: FockSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match space dim {self.space.dim}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def dag(self) -> "FockOperator":
        return FockOperator(self.space, self.matrix.conj().T)

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        _check_same_space(self.space, other.space)
        return FockOperator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        _check_same_space(self.space, other.space)
        return FockOperator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        _check_same_space(self.space, other.space)
        return FockOperator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "FockOperator":
        return FockOperator(self.space, scalar * self.matrix)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated density matrix.

    Construction checks Hermiticity, unit trace and positivity against the
    module tolerances; pass ``validate=False`` for intermediate states whose
    checks are done elsewhere (e.g. with a looser integrator tolerance).
    """

    space: FockSpace
    matrix: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match space dim {self.space.dim}"
            )
        if self.validate:
            check_density(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def expect(self, op: FockOperator) -> complex:
        _check_same_space(self.space, op.space)
        return complex(np.trace(op.matrix @ self.matrix))

    def element(self, bra: Sequence[int], ket: Sequence[int]) -> complex:
        return complex(self.matrix[self.space.index(bra), self.space.index(ket)])


def check_density(
    m: np.ndarray,
    herm_tol: float = HERMITIAN_TOL,
    trace_tol: float = TRACE_TOL,
    eig_floor: float = POSITIVITY_TOL,
) -> None:
    herm = np.max(np.abs(m - m.conj().T))
    if herm > herm_tol:
        raise ValueError(f"density matrix not Hermitian: max|rho - rho^+| = {herm:.3e}")
    tr = np.trace(m)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr.real:.15g} differs from 1")
    lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
    if lo < eig_floor:
        raise ValueError(f"density matrix not positive: smallest eigenvalue {lo:.3e}")


def _check_same_space(a: FockSpace, b: FockSpace) -> None:
    if a != b:
        raise ValueError(f"space mismatch: {a} vs {b}")


def _single_mode_annihilator(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)


def ladder_operator(space: FockSpace, mode: int, kind: str = "annihilate") -> FockOperator:
    """Return a, a^+ or a^+ a on ``mode`` (1-based), identity on the other modes."""
    if not 1 <= mode <= space.num_modes:
        raise ValueError(f"mode {mode} out of range 1..{space.num_modes}")
    single = _single_mode_annihilator(space.cutoff)
    if kind == "annihilate":
        local = single
    elif kind == "create":
        local = single.conj().T
    elif kind == "number":
        local = single.conj().T @ single
    else:
        raise ValueError(f"unknown operator kind {kind!r}")
    eye = np.eye(space.levels, dtype=complex)
    out = np.ones((1, 1), dtype=complex)
    for m in range(1, space.num_modes + 1):
        out = np.kron(out, local if m == mode else eye)
    return FockOperator(space, out)


def identity(space: FockSpace) -> FockOperator:
    return FockOperator(space, np.eye(space.dim, dtype=complex))


def collective_operator(space: FockSpace, weights: Sequence[complex], kind: str = "annihilate") -> FockOperator:
    """sum_j weights[j] * a_j (or its adjoint for ``kind='create'``)."""
    if len(weights) != space.num_modes:
        raise ValueError(f"need {space.num_modes} weights, got {len(weights)}")
    acc = np.zeros((space.dim, space.dim), dtype=complex)
    for j, w in enumerate(weights, start=1):
        acc += w * ladder_operator(space, j, "annihilate").matrix
    op = FockOperator(space, acc)
    if kind == "annihilate":
        return op
    if kind == "create":
        return op.dag()
    raise ValueError(f"unknown operator kind {kind!r}")


def rotation_matrix(theta: float) -> np.ndarray:
    """Rows give the coupled and decoupled collective modes in terms of a_1, a_2."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def rotated_mode_operator(
    space: FockSpace, theta: float, kind: str = "annihilate", which: str = "coupled"
) -> FockOperator:
    """A_1 = cos(theta) a_1 + sin(theta) a_2 (coupled) or A_2 = -sin(theta) a_1 + cos(theta) a_2."""
    if space.num_modes != 2:
        raise ValueError("rotated modes are defined for two oscillators only")
    rows = {"coupled": 0, "decoupled": 1}
    if which not in rows:
        raise ValueError(f"which must be 'coupled' or 'decoupled', got {which!r}")
    return collective_operator(space, rotation_matrix(theta)[rows[which]], kind)


def pure_state_density(
    space: FockSpace, amplitudes: Iterable[tuple[Sequence[int], complex]]
) -> DensityMatrix:
    amplitudes = list(amplitudes)
    if not amplitudes:
        raise ValueError("amplitude list is empty")
    psi = np.zeros(space.dim, dtype=complex)
    for occ, amp in amplitudes:
        psi[space.index(occ)] += amp
    norm = np.linalg.norm(psi)
    if norm == 0.0:
        raise ValueError("state has zero norm")
    psi /= norm
    rho = np.outer(psi, psi.conj())
    # exact Hermitian symmetrization of rounding noise
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(space, rho)


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Overlap tr(rho sigma); equals the fidelity when either argument is pure."""
    _check_same_space(rho.space, sigma.space)
    val = float(np.real(np.sum(rho.matrix * sigma.matrix.T)))
    return min(max(val, 0.0), 1.0)


@dataclass(frozen=True)
class Observables:
    trace: float
    purity: float
    min_eigenvalue: float
    populations: np.ndarray


def observables(rho: DensityMatrix) -> Observables:
    m = rho.matrix
    herm = 0.5 * (m + m.conj().T)
    return Observables(
        trace=float(np.real(np.trace(m))),
        purity=float(np.real(np.sum(m * m.T))),
        min_eigenvalue=float(np.linalg.eigvalsh(herm)[0]),
        populations=np.real(np.diag(m)).copy(),
    )
