"""Spectral decomposition of Hamiltonians and ladder eigenoperators.

For a Hermitian H with (clustered) eigenvalues eps and projectors P(eps),
a Hermitian coupling operator A splits into frequency components

    A(w) = sum_{eps' - eps = w} P(eps) A P(eps'),

each satisfying [H, A(w)] = -w A(w), A(w)^dag = A(-w), and
sum_w A(w) = A.  These components are the jump-channel building blocks of
the dissipator and of the non-Hermitian no-jump generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HilbertSpace, Operator, tensor_product, identity

__all__ = [
    "SpectralDecomposition",
    "EigenOperator",
    "decompose",
    "eigenoperators",
    "verify_rwa_conservation",
]

# zero-norm frequency blocks would pollute the dissipator sums
BLOCK_DROP_TOL = 1e-12


@dataclass(frozen=True)
class SpectralDecomposition:
    """Clustered eigenvalues with their eigenspace projectors."""

    space: HilbertSpace
    eigenvalues: tuple[float, ...]
    projectors: tuple[Operator, ...]
    degeneracy_tol: float

    def __post_init__(self):
        if len(self.eigenvalues) != len(self.projectors):
            raise ValueError("eigenvalue/projector count mismatch")
        evs = sorted(self.eigenvalues)
        for i in range(len(evs) - 1):
            if evs[i + 1] - evs[i] <= self.degeneracy_tol:
                raise ValueError("clustered eigenvalues are not separated beyond degeneracy_tol")


@dataclass(frozen=True)
class EigenOperator:
    """Single-frequency component of a coupling operator.

    ``source_index`` identifies which coupling channel the component came
    from when several operators couple to the same environment.
    """

    frequency: float
    op: Operator
    source_index: int = 0


def _default_tol(eigenvalues: np.ndarray) -> float:
    scale = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    return 1e-8 * scale


def decompose(H: Operator, degeneracy_tol: float | None = None) -> SpectralDecomposition:
    """Diagonalize a Hermitian operator, merging eigenvalues closer than the tolerance."""
    herm_defect = float(np.max(np.abs(H.matrix - H.matrix.conj().T)))
    if herm_defect > 1e-9 * max(1.0, float(np.max(np.abs(H.matrix)))):
        raise ValueError(f"Hamiltonian not Hermitian: max |H - H^dag| = {herm_defect:.3e}")
    evals, vecs = np.linalg.eigh((H.matrix + H.matrix.conj().T) / 2.0)
    tol = _default_tol(evals) if degeneracy_tol is None else float(degeneracy_tol)

    clustered: list[float] = []
    projectors: list[Operator] = []
    i = 0
    while i < len(evals):
        j = i + 1
        while j < len(evals) and evals[j] - evals[j - 1] <= tol:
            j += 1
        group = vecs[:, i:j]
        clustered.append(float(np.mean(evals[i:j])))
        projectors.append(Operator(H.space, group @ group.conj().T))
        i = j
    return SpectralDecomposition(H.space, tuple(clustered), tuple(projectors), tol)


def eigenoperators(
    A: Operator,
    decomp: SpectralDecomposition,
    source_index: int = 0,
    drop_tol: float = BLOCK_DROP_TOL,
) -> list[EigenOperator]:
    """Split a coupling operator into its energy-lowering/raising components.

    Returns one component per distinct frequency difference w = eps' - eps
    with non-negligible block norm; frequencies within the decomposition's
    tolerance are merged.  The components sum back to A.
    """
    if A.space != decomp.space:
        raise ValueError("coupling operator and decomposition live on different spaces")
    evs = decomp.eigenvalues
    projs = [p.matrix for p in decomp.projectors]

    by_freq: dict[int, tuple[float, np.ndarray]] = {}
    freqs: list[float] = []
    for i, eps in enumerate(evs):
        for j, eps_p in enumerate(evs):
            w = eps_p - eps
            block = projs[i] @ A.matrix @ projs[j]
            if np.max(np.abs(block)) < drop_tol:
                continue
            key = None
            for k, f in enumerate(freqs):
                if abs(f - w) <= decomp.degeneracy_tol:
                    key = k
                    break
            if key is None:
                freqs.append(w)
                key = len(freqs) - 1
                by_freq[key] = (w, np.zeros_like(A.matrix))
            f0, acc = by_freq[key]
            by_freq[key] = (f0, acc + block)

    out = []
    for key in sorted(by_freq, key=lambda k: by_freq[k][0]):
        w, m = by_freq[key]
        if float(np.linalg.norm(m)) < drop_tol:
            continue
        out.append(
            EigenOperator(w, Operator(A.space, m, label=f"{A.label}({w:g})"), source_index)
        )
    return out


def verify_rwa_conservation(
    H_S: Operator,
    H_B: Operator,
    pairs: list[tuple[Operator, Operator]],
) -> float:
    """Residual norm of the free-energy conservation check.

    Builds the interaction H_I = sum_k A_k (x) B_k from the given
    system/bath operator pairs and returns ||[H_S (x) I + I (x) H_B, H_I]||
    (Frobenius).  The residual vanishes when every pair matches a
    lowering component A(w) with a raising bath component B(-w) at the
    same frequency, and reports the mismatch scale otherwise.
    """
    if not pairs:
        raise ValueError("need at least one (system, bath) operator pair")
    for a, b in pairs:
        if a.space != H_S.space or b.space != H_B.space:
            raise ValueError("pair operators do not match the system/bath spaces")
    H_free = tensor_product(H_S, identity(H_B.space)) + tensor_product(identity(H_S.space), H_B)
    H_I = tensor_product(pairs[0][0], pairs[0][1])
    for a, b in pairs[1:]:
        H_I = H_I + tensor_product(a, b)
    comm = H_free @ H_I - H_I @ H_free
    return float(np.linalg.norm(comm.matrix))
