"""Finite-dimensional operator algebra on composite Hilbert spaces.

Dense complex matrices only: every target problem in this package lives in
dimension <= ~64, so sparse or structured storage would be premature.
All container types are immutable after construction and safe to share
between threads or worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

__all__ = [
    "HilbertSpace",
    "Operator",
    "DensityMatrix",
    "KetState",
    "tensor_product",
    "make_atom_ops",
    "make_cavity_ops",
    "partial_trace",
    "identity",
    "embed",
    "basis_ket",
    "commutator",
    "anticommutator",
    "expectation",
]

DEFAULT_TOL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class HilbertSpace:
    """Composite space as an ordered tensor product of finite factors.

    The factor order is fixed; all operators sharing a space use the same
    ordering (e.g. ``[2, n_max + 1]`` for atom (x) truncated field mode).
    """

    factor_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"factor dims must be positive integers, got {dims}")
        object.__setattr__(self, "factor_dims", dims)

    @property
    def total_dim(self) -> int:
        return prod(self.factor_dims)

    @property
    def n_factors(self) -> int:
        return len(self.factor_dims)


@dataclass(frozen=True)
class Operator:
    """Square complex matrix attached to a Hilbert space."""

    space: HilbertSpace
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.space.total_dim
        if m.shape != (d, d):
            raise ValueError(
                f"operator {self.label!r}: matrix shape {m.shape} does not match space dim {d}"
            )
        object.__setattr__(self, "matrix", _freeze(m))

    def dagger(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T, label=f"{self.label}^dag")

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.matrix))

    def is_hermitian(self, tol: float = DEFAULT_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_space(other)
        return Operator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        self._check_space(other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_space(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.space, self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.matrix)

    def _check_space(self, other: "Operator"):
        if self.space != other.space:
            raise ValueError("operators live on different spaces")


@dataclass(frozen=True)
class DensityMatrix:
    """State matrix with hygiene checks at construction.

    ``trace_target=1.0`` is a full state; ``trace_target=None`` admits
    sub-normalized conditional blocks (trace <= 1).
    """

    space: HilbertSpace
    matrix: np.ndarray
    tolerance: float = DEFAULT_TOL
    trace_target: float | None = 1.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.space.total_dim
        if m.shape != (d, d):
            raise ValueError(f"density matrix shape {m.shape} does not match space dim {d}")
        tol = float(self.tolerance)
        if tol < 0:
            raise ValueError("tolerance must be non-negative")
        herm = float(np.max(np.abs(m - m.conj().T)))
        if herm > tol:
            raise ValueError(f"density matrix not Hermitian: max |rho - rho^dag| = {herm:.3e}")
        tr = m.trace()
        if abs(tr.imag) > tol:
            raise ValueError(f"density matrix trace has imaginary part {tr.imag:.3e}")
        if self.trace_target is not None:
            if abs(tr.real - self.trace_target) > tol:
                raise ValueError(
                    f"trace {tr.real!r} differs from declared trace {self.trace_target!r}"
                )
        elif tr.real > 1.0 + tol or tr.real < -tol:
            raise ValueError(f"sub-normalized block must have trace in [0, 1], got {tr.real!r}")
        evals = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
        if evals.size and evals[0] < -tol:
            raise ValueError(f"density matrix has negative eigenvalue {evals[0]:.3e}")
        object.__setattr__(self, "matrix", _freeze(m))

    @property
    def trace(self) -> float:
        return float(self.matrix.trace().real)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True)
class KetState:
    """Pure state vector; sub-normalized amplitudes are allowed."""

    space: HilbertSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if v.shape != (self.space.total_dim,):
            raise ValueError(
                f"amplitude vector length {v.size} does not match space dim {self.space.total_dim}"
            )
        n = float(np.linalg.norm(v))
        if n > 1.0 + 1e-9:
            raise ValueError(f"ket norm {n!r} exceeds 1")
        object.__setattr__(self, "amplitudes", _freeze(v))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def projector(self, tolerance: float = DEFAULT_TOL) -> DensityMatrix:
        m = np.outer(self.amplitudes, self.amplitudes.conj())
        target = 1.0 if abs(self.norm() - 1.0) <= tolerance else None
        return DensityMatrix(self.space, m, tolerance=tolerance, trace_target=target)


def tensor_product(a: Operator, b: Operator) -> Operator:
    """Kronecker composition; factor order is a's factors then b's."""
    space = HilbertSpace(a.space.factor_dims + b.space.factor_dims)
    label = f"{a.label}(x){b.label}" if a.label or b.label else ""
    return Operator(space, np.kron(a.matrix, b.matrix), label=label)


def tensor_product_kets(a: KetState, b: KetState) -> KetState:
    space = HilbertSpace(a.space.factor_dims + b.space.factor_dims)
    return KetState(space, np.kron(a.amplitudes, b.amplitudes))


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.total_dim), label="I")


def embed(local: np.ndarray, space: HilbertSpace, factor: int, label: str = "") -> Operator:
    """Lift a single-factor matrix into the full space: I (x) ... (x) local (x) ... (x) I."""
    dims = space.factor_dims
    if not 0 <= factor < len(dims):
        raise ValueError(f"factor index {factor} out of range for {len(dims)} factors")
    local = np.asarray(local, dtype=complex)
    if local.shape != (dims[factor], dims[factor]):
        raise ValueError(
            f"local matrix shape {local.shape} does not match factor dim {dims[factor]}"
        )
    m = np.eye(prod(dims[:factor]), dtype=complex)
    m = np.kron(m, local)
    m = np.kron(m, np.eye(prod(dims[factor + 1:]), dtype=complex))
    return Operator(space, m, label=label)


def make_atom_ops(space: HilbertSpace, factor: int = 0) -> dict[str, Operator]:
    """Two-level operators on the given factor, embedded in the full space.

    Basis convention: index 0 is the excited state |+>, index 1 the ground
    state |->, so S_z = diag(+1, -1) and S_plus = |+><-|.
    """
    if space.factor_dims[factor] != 2:
        raise ValueError(f"factor {factor} has dim {space.factor_dims[factor]}, need a 2-level factor")
    s_z = np.diag([1.0, -1.0]).astype(complex)
    s_plus = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    s_minus = s_plus.conj().T
    return {
        "S_z": embed(s_z, space, factor, label="S_z"),
        "S_plus": embed(s_plus, space, factor, label="S_plus"),
        "S_minus": embed(s_minus, space, factor, label="S_minus"),
    }


def make_cavity_ops(space: HilbertSpace, factor: int = 1) -> dict[str, Operator]:
    """Truncated-mode ladder operators on the given factor (dim = n_max + 1).

    a|n> = sqrt(n)|n-1> with hard truncation: a_dag|n_max> = 0. Below the
    truncation level the canonical commutator [a, a_dag] = 1 holds exactly.
    """
    dim = space.factor_dims[factor]
    if dim < 2:
        raise ValueError(f"cavity factor needs n_max >= 1, got dim {dim}")
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    a_dag = a.conj().T
    return {
        "a": embed(a, space, factor, label="a"),
        "a_dag": embed(a_dag, space, factor, label="a_dag"),
        "n_op": embed(a_dag @ a, space, factor, label="n"),
    }


def basis_ket(space: HilbertSpace, indices: tuple[int, ...]) -> KetState:
    """Product basis state |i_0, i_1, ...> with one index per factor."""
    if len(indices) != space.n_factors:
        raise ValueError(f"need {space.n_factors} indices, got {len(indices)}")
    flat = 0
    for i, d in zip(indices, space.factor_dims):
        if not 0 <= i < d:
            raise ValueError(f"index {i} out of range for factor dim {d}")
        flat = flat * d + i
    v = np.zeros(space.total_dim, dtype=complex)
    v[flat] = 1.0
    return KetState(space, v)


def partial_trace(rho: DensityMatrix, keep: tuple[int, ...] | list[int]) -> DensityMatrix:
    """Trace out all factors not listed in ``keep`` (trace- and Hermiticity-preserving)."""
    keep = tuple(sorted(set(int(k) for k in keep)))
    dims = rho.space.factor_dims
    if not keep or any(not 0 <= k < len(dims) for k in keep):
        raise ValueError(f"keep must be a non-empty subset of factor indices 0..{len(dims) - 1}")
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    # contract each traced factor with its bra-side partner
    traced = [i for i in range(n) if i not in keep]
    for count, i in enumerate(traced):
        # after each trace the tensor loses one ket and one bra axis
        offset = sum(1 for j in traced[:count] if j < i)
        ket_ax = i - offset
        bra_ax = ket_ax + (n - count)
        t = np.trace(t, axis1=ket_ax, axis2=bra_ax)
    d_keep = prod(dims[k] for k in keep)
    m = t.reshape(d_keep, d_keep)
    sub = HilbertSpace(tuple(dims[k] for k in keep))
    return DensityMatrix(sub, m, tolerance=rho.tolerance, trace_target=rho.trace_target)


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def anticommutator(a: Operator, b: Operator) -> Operator:
    return a @ b + b @ a


def expectation(rho: DensityMatrix | np.ndarray, op: Operator) -> complex:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return complex(np.trace(op.matrix @ m))
