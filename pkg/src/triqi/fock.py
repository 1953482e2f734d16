"""Truncated multimode Fock space: basis indexing, ladder operators, kets,
structured density operators, tensor products and partial traces.

Basis convention (frozen): row-major ordering with mode 0 slowest, i.e. the
basis index of occupations (n_0, ..., n_{M-1}) is
``n_0 * c_1 * ... * c_{M-1} + n_1 * c_2 * ... + n_{M-1}``
for per-mode cutoffs ``(c_0, ..., c_{M-1})``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy import sparse

from .errors import DenseLimitError, NumericalError

DEFAULT_DENSE_LIMIT = 4096

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-12
NORM_TOL = 1e-12


@dataclass(frozen=True)
class SpaceDescriptor:
    """Tensor product of truncated single-mode Fock spaces.

    Mode m holds levels 0 .. cutoffs[m]-1.  ``dense_limit`` caps the dimension
    at which dense matrices may be materialized; structured representations
    are exempt.
    """

    cutoffs: tuple[int, ...]
    dense_limit: int = DEFAULT_DENSE_LIMIT

    @property
    def modes(self) -> int:
        return len(self.cutoffs)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.cutoffs))

    def index_of(self, occupations) -> int:
        """Basis index of an occupation tuple (row-major, mode 0 slowest)."""
        if len(occupations) != self.modes:
            raise ValueError(f"expected {self.modes} occupation numbers, got {len(occupations)}")
        return int(np.ravel_multi_index(tuple(occupations), self.cutoffs))

    def occupations_of(self, index: int) -> tuple[int, ...]:
        """Occupation tuple of a basis index."""
        return tuple(int(n) for n in np.unravel_index(index, self.cutoffs))

    def mode_occupations(self, mode: int) -> np.ndarray:
        """Occupation number on ``mode`` for every basis index, as a vector."""
        self._check_mode(mode)
        grid = np.unravel_index(np.arange(self.total_dim), self.cutoffs)
        return grid[mode].astype(np.int64)

    def subspace(self, keep: tuple[int, ...]) -> "SpaceDescriptor":
        return SpaceDescriptor(tuple(self.cutoffs[m] for m in keep), self.dense_limit)

    def require_dense(self, what: str = "dense operation") -> None:
        if self.total_dim > self.dense_limit:
            raise DenseLimitError(
                f"{what} needs dimension {self.total_dim} > dense limit {self.dense_limit}; "
                "use a structured path or raise dense_limit"
            )

    def _check_mode(self, mode: int) -> None:
        if not 0 <= mode < self.modes:
            raise ValueError(f"mode {mode} out of range for {self.modes}-mode space")


def build_space(modes: int, cutoffs, dense_limit: int = DEFAULT_DENSE_LIMIT) -> SpaceDescriptor:
    """Validated construction of a SpaceDescriptor."""
    if modes < 1:
        raise ValueError("need at least one mode")
    cutoffs = tuple(int(c) for c in cutoffs)
    if len(cutoffs) != modes:
        raise ValueError(f"expected {modes} cutoffs, got {len(cutoffs)}")
    if any(c < 1 for c in cutoffs):
        raise ValueError(f"all cutoffs must be >= 1, got {cutoffs}")
    return SpaceDescriptor(cutoffs, int(dense_limit))


@dataclass(frozen=True)
class Ket:
    """Unit-norm complex amplitude vector over a truncated Fock basis."""

    space: SpaceDescriptor
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.space.total_dim,):
            raise ValueError(f"amplitude vector has shape {amps.shape}, expected ({self.space.total_dim},)")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise NumericalError(f"ket norm {norm} deviates from 1 by more than {NORM_TOL}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, space: SpaceDescriptor, amplitudes, normalize: bool = False) -> "Ket":
        amps = np.asarray(amplitudes, dtype=complex)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise ValueError("cannot normalize the zero vector")
            amps = amps / norm
        return cls(space, amps)

    @classmethod
    def basis_state(cls, space: SpaceDescriptor, occupations) -> "Ket":
        amps = np.zeros(space.total_dim, dtype=complex)
        amps[space.index_of(occupations)] = 1.0
        return cls(space, amps)

    def overlap(self, other: "Ket") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def annihilation(space: SpaceDescriptor, mode: int) -> sparse.csr_matrix:
    """Sparse annihilation operator on ``mode``: a|n> = sqrt(n)|n-1>.

    Identity on all other modes; population at the top truncated level has
    nowhere to go under the adjoint (creation) operator and is dropped.
    """
    space._check_mode(mode)
    c = space.cutoffs[mode]
    a_single = sparse.diags(np.sqrt(np.arange(1, c)), offsets=1, format="csr")
    left = sparse.identity(int(np.prod(space.cutoffs[:mode])), format="csr")
    right = sparse.identity(int(np.prod(space.cutoffs[mode + 1:])), format="csr")
    return sparse.kron(sparse.kron(left, a_single), right).tocsr()


def creation(space: SpaceDescriptor, mode: int) -> sparse.csr_matrix:
    """Sparse creation operator, the adjoint of :func:`annihilation`."""
    return annihilation(space, mode).conj().T.tocsr()


def number_operator(space: SpaceDescriptor, mode: int) -> sparse.csr_matrix:
    a = annihilation(space, mode)
    return (a.conj().T @ a).tocsr()


def tensor_ket(factors, space: SpaceDescriptor | None = None) -> Ket:
    """Tensor product of kets; factor spaces concatenate in order (mode 0 slowest).

    When a target ``space`` is given, the concatenated factor cutoffs must
    match it exactly.
    """
    factors = list(factors)
    if not factors:
        raise ValueError("need at least one factor")
    cutoffs = sum((f.space.cutoffs for f in factors), ())
    if space is not None and space.cutoffs != cutoffs:
        raise ValueError(f"factor cutoffs {cutoffs} do not match the target space {space.cutoffs}")
    dense_limit = max(f.space.dense_limit for f in factors)
    amps = reduce(np.kron, [f.amplitudes for f in factors])
    return Ket(space or SpaceDescriptor(cutoffs, dense_limit), amps)


# ---------------------------------------------------------------------------
# density operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dense:
    """Explicit Hermitian matrix."""
    matrix: np.ndarray


@dataclass(frozen=True)
class Diagonal:
    """Diagonal operator in the Fock basis; ``probs`` holds the real diagonal."""
    probs: np.ndarray


@dataclass(frozen=True)
class TensorProduct:
    """Tensor product of factor density operators over disjoint mode blocks."""
    factors: tuple


@dataclass(frozen=True)
class DiagPlusLowRank:
    """Operator ``diag_scale * diag(diag) + sum_r weights[r] v_r v_r^dag``.

    ``diag`` and the columns of ``vectors`` live in the structure's own basis.
    ``mode_rotations`` maps that basis back to the Fock basis as a per-mode
    unitary (None meaning identity on that mode); the represented operator is
    ``R S R^dag`` with ``R`` the kron of the rotations.
    """

    diag: np.ndarray
    diag_scale: float
    weights: tuple[float, ...]
    vectors: np.ndarray  # shape (dim, r)
    mode_rotations: tuple | None = None

    @property
    def rank(self) -> int:
        return len(self.weights)


def _rotation_matrix(space: SpaceDescriptor, mode_rotations) -> np.ndarray | None:
    if mode_rotations is None or all(r is None for r in mode_rotations):
        return None
    mats = []
    for m, rot in enumerate(mode_rotations):
        mats.append(np.eye(space.cutoffs[m]) if rot is None else rot)
    return reduce(np.kron, mats)


def apply_mode_unitaries(vec: np.ndarray, space: SpaceDescriptor, mode_rotations,
                         adjoint: bool = False) -> np.ndarray:
    """Apply per-mode unitaries (or their adjoints) to a state vector."""
    if mode_rotations is None:
        return np.asarray(vec, dtype=complex)
    out = np.asarray(vec, dtype=complex).reshape(space.cutoffs)
    for m, rot in enumerate(mode_rotations):
        if rot is None:
            continue
        u = rot.conj().T if adjoint else rot
        out = np.moveaxis(np.tensordot(u, out, axes=([1], [m])), 0, m)
    return out.reshape(-1)


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian PSD operator with a structural tag and (optionally) unit trace."""

    space: SpaceDescriptor
    structure: object
    trace_normalized: bool = True

    # -- constructors -------------------------------------------------------

    @classmethod
    def dense(cls, space: SpaceDescriptor, matrix, trace_normalized: bool = True) -> "DensityOperator":
        space.require_dense("dense density operator")
        mat = np.asarray(matrix, dtype=complex)
        if mat.shape != (space.total_dim, space.total_dim):
            raise ValueError(f"matrix shape {mat.shape} does not match dimension {space.total_dim}")
        mat.setflags(write=False)
        return cls(space, Dense(mat), trace_normalized)

    @classmethod
    def diagonal(cls, space: SpaceDescriptor, probs, trace_normalized: bool = True) -> "DensityOperator":
        p = np.asarray(probs, dtype=float)
        if p.shape != (space.total_dim,):
            raise ValueError(f"diagonal has shape {p.shape}, expected ({space.total_dim},)")
        p.setflags(write=False)
        return cls(space, Diagonal(p), trace_normalized)

    @classmethod
    def from_ket(cls, ket: Ket) -> "DensityOperator":
        ket.space.require_dense("pure-state projector")
        mat = np.outer(ket.amplitudes, ket.amplitudes.conj())
        return cls.dense(ket.space, mat)

    @classmethod
    def product(cls, factors, trace_normalized: bool = True) -> "DensityOperator":
        flat: list[DensityOperator] = []
        for f in factors:
            if isinstance(f.structure, TensorProduct):
                flat.extend(f.structure.factors)
            else:
                flat.append(f)
        if len(flat) == 1:
            return flat[0]
        cutoffs = sum((f.space.cutoffs for f in flat), ())
        dense_limit = max(f.space.dense_limit for f in flat)
        space = SpaceDescriptor(cutoffs, dense_limit)
        return cls(space, TensorProduct(tuple(flat)), trace_normalized)

    @classmethod
    def diag_plus_low_rank(cls, space: SpaceDescriptor, diag, diag_scale: float,
                           weights, vectors, mode_rotations=None,
                           trace_normalized: bool = True) -> "DensityOperator":
        d = np.asarray(diag, dtype=float)
        vecs = np.asarray(vectors, dtype=complex)
        if vecs.ndim == 1:
            vecs = vecs[:, None]
        if d.shape != (space.total_dim,) or vecs.shape[0] != space.total_dim:
            raise ValueError("diagonal/vector dimensions do not match the space")
        d.setflags(write=False)
        vecs.setflags(write=False)
        structure = DiagPlusLowRank(d, float(diag_scale), tuple(float(w) for w in weights),
                                    vecs, mode_rotations)
        return cls(space, structure, trace_normalized)

    # -- basic queries -------------------------------------------------------

    def trace(self) -> float:
        s = self.structure
        if isinstance(s, Dense):
            return float(np.real(np.trace(s.matrix)))
        if isinstance(s, Diagonal):
            return float(np.sum(s.probs))
        if isinstance(s, TensorProduct):
            return float(np.prod([f.trace() for f in s.factors]))
        if isinstance(s, DiagPlusLowRank):
            t = s.diag_scale * float(np.sum(s.diag))
            for w, col in zip(s.weights, s.vectors.T):
                t += w * float(np.real(np.vdot(col, col)))
            return t
        raise TypeError(f"unknown structure {type(s)}")

    def to_dense(self) -> np.ndarray:
        """Materialize the full matrix in the Fock basis (dense-limit guarded)."""
        self.space.require_dense("materialization")
        s = self.structure
        if isinstance(s, Dense):
            return np.array(s.matrix)
        if isinstance(s, Diagonal):
            return np.diag(s.probs.astype(complex))
        if isinstance(s, TensorProduct):
            return reduce(np.kron, [f.to_dense() for f in s.factors])
        if isinstance(s, DiagPlusLowRank):
            mat = np.diag(s.diag_scale * s.diag.astype(complex))
            for w, col in zip(s.weights, s.vectors.T):
                mat += w * np.outer(col, col.conj())
            rot = _rotation_matrix(self.space, s.mode_rotations)
            if rot is not None:
                mat = rot @ mat @ rot.conj().T
            return mat
        raise TypeError(f"unknown structure {type(s)}")

    def validate(self) -> None:
        """Check the Hermitian / PSD / trace invariants at the standard tolerances."""
        s = self.structure
        if isinstance(s, Diagonal):
            self._check_diag_psd(s.probs)
        elif isinstance(s, TensorProduct):
            for f in s.factors:
                DensityOperator(f.space, f.structure, trace_normalized=False).validate()
        elif isinstance(s, DiagPlusLowRank):
            self._check_diag_psd(s.diag_scale * s.diag)
            if any(w < 0 for w in s.weights):
                raise NumericalError("negative low-rank weight breaks positive semidefiniteness")
        else:
            mat = self.to_dense()
            herm = np.max(np.abs(mat - mat.conj().T))
            if herm > HERMITIAN_TOL:
                raise NumericalError(f"Hermiticity violation {herm} > {HERMITIAN_TOL}")
            eigs = np.linalg.eigvalsh(mat)
            top = max(eigs.max(), 0.0)
            if eigs.min() < -PSD_TOL * max(top, 1e-300):
                raise NumericalError(f"negative eigenvalue {eigs.min()} below PSD tolerance")
        if self.trace_normalized and abs(self.trace() - 1.0) > TRACE_TOL:
            raise NumericalError(f"trace {self.trace()} deviates from 1 beyond {TRACE_TOL}")

    @staticmethod
    def _check_diag_psd(diag: np.ndarray) -> None:
        top = max(float(np.max(diag, initial=0.0)), 0.0)
        if float(np.min(diag, initial=0.0)) < -PSD_TOL * max(top, 1e-300):
            raise NumericalError("negative diagonal entry below PSD tolerance")


def as_diag_plus_low_rank(rho: DensityOperator) -> DensityOperator:
    """Re-express a compatible operator as DiagPlusLowRank in its own eigenbasis.

    Diagonal operators convert directly; tensor products convert factor by
    factor (dense factors through a per-factor eigendecomposition, which is
    cheap because factors are small).  The result has no low-rank terms, only
    the eigen-diagonal plus the per-mode rotations.
    """
    s = rho.structure
    if isinstance(s, DiagPlusLowRank):
        return rho
    if isinstance(s, Diagonal):
        return DensityOperator.diag_plus_low_rank(
            rho.space, s.probs, 1.0, (), np.zeros((rho.space.total_dim, 0)),
            mode_rotations=None, trace_normalized=rho.trace_normalized)
    if not isinstance(s, TensorProduct):
        raise NumericalError(f"cannot convert structure {type(s).__name__} to DiagPlusLowRank")

    diag_parts = []
    rotations: list[np.ndarray | None] = []
    for f in s.factors:
        fs = f.structure
        if isinstance(fs, Diagonal):
            diag_parts.append(fs.probs)
            rotations.extend([None] * f.space.modes)
        elif isinstance(fs, Dense):
            if f.space.modes != 1:
                raise NumericalError("dense tensor factors must be single-mode for structured conversion")
            evals, evecs = np.linalg.eigh(fs.matrix)
            diag_parts.append(evals)
            rotations.append(evecs)
        else:
            raise NumericalError(f"cannot convert nested structure {type(fs).__name__}")
    diag = reduce(np.kron, diag_parts)
    return DensityOperator.diag_plus_low_rank(
        rho.space, diag, 1.0, (), np.zeros((rho.space.total_dim, 0)),
        mode_rotations=tuple(rotations), trace_normalized=rho.trace_normalized)


def same_rotations(a, b, tol: float = 1e-12) -> bool:
    """True when two DiagPlusLowRank structures share the same basis rotations."""
    ra = a.mode_rotations
    rb = b.mode_rotations
    if ra is None and rb is None:
        return True
    if ra is None or rb is None:
        return all(r is None for r in (ra or rb))
    if len(ra) != len(rb):
        return False
    for x, y in zip(ra, rb):
        if x is None and y is None:
            continue
        if x is None or y is None:
            return False
        if x.shape != y.shape or np.max(np.abs(x - y)) > tol:
            return False
    return True


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Reduced density operator on the kept modes (ascending order preserved)."""
    keep = tuple(sorted(set(int(m) for m in keep)))
    if not keep:
        raise ValueError("keep set must be nonempty")
    if any(m < 0 or m >= rho.space.modes for m in keep):
        raise ValueError(f"keep modes {keep} out of range for {rho.space.modes}-mode space")
    if len(keep) == rho.space.modes:
        return rho

    s = rho.structure
    sub = rho.space.subspace(keep)
    traced = tuple(m for m in range(rho.space.modes) if m not in keep)

    if isinstance(s, Diagonal):
        probs = s.probs.reshape(rho.space.cutoffs).sum(axis=traced).reshape(-1)
        return DensityOperator.diagonal(sub, probs, rho.trace_normalized)

    if isinstance(s, TensorProduct):
        out_factors = []
        scalar = 1.0
        offset = 0
        for f in s.factors:
            fmodes = tuple(range(offset, offset + f.space.modes))
            fkeep = tuple(m - offset for m in keep if m in fmodes)
            offset += f.space.modes
            if not fkeep:
                scalar *= f.trace()
            elif len(fkeep) == f.space.modes:
                out_factors.append(f)
            else:
                out_factors.append(partial_trace(f, fkeep))
        result = DensityOperator.product(out_factors, rho.trace_normalized)
        if abs(scalar - 1.0) > 1e-15:
            result = _scale(result, scalar)
        return result

    # Dense and DiagPlusLowRank go through materialization.
    mat = rho.to_dense()
    tensor = mat.reshape(rho.space.cutoffs + rho.space.cutoffs)
    modes_left = rho.space.modes
    for m in sorted(traced, reverse=True):
        tensor = np.trace(tensor, axis1=m, axis2=m + modes_left)
        modes_left -= 1
    red = tensor.reshape(sub.total_dim, sub.total_dim)
    return DensityOperator.dense(sub, red, rho.trace_normalized)


def _scale(rho: DensityOperator, factor: float) -> DensityOperator:
    s = rho.structure
    if isinstance(s, Diagonal):
        return DensityOperator.diagonal(rho.space, s.probs * factor, rho.trace_normalized)
    return DensityOperator.dense(rho.space, rho.to_dense() * factor, rho.trace_normalized)
