"""Markovian master equation with a cross-correlated decay-rate tensor.

The generator is

    d rho / dt = -i [H_S + H_LS, rho] + D(rho)

with the dissipator summing over frequencies and channel pairs:

    D(rho) = sum_w sum_{a,b} gamma_{a,b}(w)
             ( A_b(w) rho A_a(w)^dag - 1/2 {A_a(w)^dag A_b(w), rho} ).

Off-diagonal gamma entries encode channels that share an environment and
are the source of the cooperative effects this package targets.  Only
zero-temperature dynamics is evolved; finite-temperature tensors can be
validated against detailed balance but not integrated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DensityMatrix, HilbertSpace, Operator
from .eigenops import EigenOperator

__all__ = [
    "SpectralTensor",
    "MasterEquation",
    "DetailedBalanceReport",
    "IntegrationError",
    "build_dissipator",
    "build_lamb_shift",
    "apply_t0_filter",
    "validate_detailed_balance",
    "integrate",
    "diagonalize_gamma",
    "jump_operators",
]

GAMMA_HERM_TOL = 1e-12
GAMMA_PSD_TOL = 1e-10
FREQ_MATCH_TOL = 1e-9


class IntegrationError(RuntimeError):
    """Numerical failure during time evolution; carries the failing time."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t = {t!r})")
        self.t = t


@dataclass(frozen=True)
class SpectralTensor:
    """Per-frequency rate matrices gamma(w) and optional shift matrices s(w).

    Each gamma(w) must be Hermitian and positive semidefinite: cross rates
    beyond the Cauchy-Schwarz bound |gamma_12|^2 <= gamma_11 gamma_22 make
    the equation unphysical and are rejected, not warned about.
    """

    frequencies: tuple[float, ...]
    gamma: tuple[np.ndarray, ...]
    lamb: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        freqs = tuple(float(w) for w in self.frequencies)
        if len(freqs) != len(self.gamma):
            raise ValueError("one gamma matrix required per frequency")
        ordered = sorted(freqs)
        if any(b - a <= FREQ_MATCH_TOL for a, b in zip(ordered, ordered[1:])):
            raise ValueError("tensor frequencies are duplicated or unresolvably close")
        mats = []
        n = None
        for w, g in zip(freqs, self.gamma):
            g = np.array(g, dtype=complex)
            if g.ndim != 2 or g.shape[0] != g.shape[1]:
                raise ValueError(f"gamma({w}) is not square")
            if n is None:
                n = g.shape[0]
            elif g.shape[0] != n:
                raise ValueError("gamma matrices differ in channel count")
            herm = float(np.max(np.abs(g - g.conj().T)))
            if herm > GAMMA_HERM_TOL:
                raise ValueError(f"gamma({w}) not Hermitian: defect {herm:.3e}")
            evals = np.linalg.eigvalsh((g + g.conj().T) / 2.0)
            if evals.size and evals[0] < -GAMMA_PSD_TOL:
                raise ValueError(
                    f"gamma({w}) not positive semidefinite: eigenvalue {evals[0]:.3e}"
                )
            g.setflags(write=False)
            mats.append(g)
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "gamma", tuple(mats))
        if self.lamb is not None:
            if len(self.lamb) != len(freqs):
                raise ValueError("one lamb matrix required per frequency")
            shifts = []
            for w, s in zip(freqs, self.lamb):
                s = np.array(s, dtype=complex)
                if s.shape != (n, n):
                    raise ValueError(f"lamb({w}) has wrong shape")
                herm = float(np.max(np.abs(s - s.conj().T)))
                if herm > GAMMA_HERM_TOL:
                    raise ValueError(f"lamb({w}) not Hermitian: defect {herm:.3e}")
                s.setflags(write=False)
                shifts.append(s)
            object.__setattr__(self, "lamb", tuple(shifts))

    @property
    def n_channels(self) -> int:
        return self.gamma[0].shape[0] if self.gamma else 0

    def gamma_at(self, w: float) -> np.ndarray | None:
        for f, g in zip(self.frequencies, self.gamma):
            if abs(f - w) <= FREQ_MATCH_TOL:
                return g
        return None

    def has_nonpositive_frequencies(self) -> bool:
        return any(w <= FREQ_MATCH_TOL for w in self.frequencies)


@dataclass(frozen=True)
class MasterEquation:
    """Assembled generator: Hamiltonian, optional shift, channels, tensor.

    ``couplings[a]`` is the family of frequency components of channel a.
    Immutable after assembly; integrations of the same object may run
    concurrently.
    """

    H_S: Operator
    couplings: tuple[tuple[EigenOperator, ...], ...]
    tensor: SpectralTensor
    H_LS: Operator | None = None
    temperature_mode: str = "zero"

    def __post_init__(self):
        if self.temperature_mode not in ("zero", "validated-finite"):
            raise ValueError(f"unknown temperature_mode {self.temperature_mode!r}")
        fams = tuple(tuple(f) for f in self.couplings)
        if len(fams) != self.tensor.n_channels:
            raise ValueError(
                f"{len(fams)} coupling families for {self.tensor.n_channels} tensor channels"
            )
        for fam in fams:
            for eo in fam:
                if eo.op.space != self.H_S.space:
                    raise ValueError("coupling operator space mismatch")
        if self.H_LS is not None and self.H_LS.space != self.H_S.space:
            raise ValueError("Lamb-shift operator space mismatch")
        object.__setattr__(self, "couplings", fams)

    @property
    def space(self) -> HilbertSpace:
        return self.H_S.space

    def coupling_at(self, channel: int, w: float) -> np.ndarray:
        for eo in self.couplings[channel]:
            if abs(eo.frequency - w) <= FREQ_MATCH_TOL:
                return eo.op.matrix
        return np.zeros((self.space.total_dim,) * 2, dtype=complex)

    def hamiltonian_matrix(self) -> np.ndarray:
        h = self.H_S.matrix
        if self.H_LS is not None:
            h = h + self.H_LS.matrix
        return h

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        """Right-hand side of the master equation for a raw state matrix."""
        h = self.hamiltonian_matrix()
        out = -1j * (h @ rho - rho @ h)
        return out + build_dissipator(self)(rho)

    def rate_scale(self) -> float:
        """Largest decay rate in the tensor (sets the dissipative time scale)."""
        best = 0.0
        for g in self.tensor.gamma:
            evals = np.linalg.eigvalsh((g + g.conj().T) / 2.0)
            if evals.size:
                best = max(best, float(evals[-1]))
        return best

    def frequency_scale(self) -> float:
        """Largest Hamiltonian/tensor frequency (sets the coherent time scale)."""
        evals = np.linalg.eigvalsh((self.H_S.matrix + self.H_S.matrix.conj().T) / 2.0)
        spread = float(evals[-1] - evals[0]) if evals.size else 0.0
        wmax = max((abs(w) for w in self.tensor.frequencies), default=0.0)
        return max(spread, wmax)


def build_dissipator(me: MasterEquation):
    """Return the dissipator as a callable on raw state matrices.

    For any input the output is Hermiticity- and trace-preserving by
    construction (anticommutator uses K = sum gamma_{a,b} A_a^dag A_b).
    Terms with an exactly-zero rate are skipped, so a tensor with zero
    cross rates performs bit-for-bit the same arithmetic as a diagonal
    (independent-channels) tensor.
    """
    terms = []  # (gamma_ab, A_b, A_a_dag)
    K = np.zeros((me.space.total_dim,) * 2, dtype=complex)
    for w, g in zip(me.tensor.frequencies, me.tensor.gamma):
        ops = [me.coupling_at(a, w) for a in range(me.tensor.n_channels)]
        for a in range(me.tensor.n_channels):
            for b in range(me.tensor.n_channels):
                rate = complex(g[a, b])
                if rate == 0:
                    continue
                terms.append((rate, ops[b], ops[a].conj().T))
                K = K + rate * (ops[a].conj().T @ ops[b])

    def dissipator(rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(K)
        for rate, A_b, A_a_dag in terms:
            out = out + rate * (A_b @ rho @ A_a_dag)
        out = out - 0.5 * (K @ rho + rho @ K)
        return out

    return dissipator


def lamb_shift_commutation_defect(h_ls: Operator, h_s: Operator) -> float:
    """||[H_LS, H_S]||: diagnostic only, never enforced.

    A nonzero value means the shift does more than re-tune level energies
    (it mixes eigenstates), which is worth knowing before neglecting it.
    """
    c = h_ls.matrix @ h_s.matrix - h_s.matrix @ h_ls.matrix
    return float(np.linalg.norm(c))


def build_lamb_shift(
    couplings: tuple[tuple[EigenOperator, ...], ...],
    tensor: SpectralTensor,
) -> Operator:
    """Environment-induced Hermitian correction sum_w s_{a,b}(w) A_a(w)^dag A_b(w).

    Use :func:`lamb_shift_commutation_defect` to see how badly the result
    fails to commute with the system Hamiltonian.
    """
    if tensor.lamb is None:
        raise ValueError("tensor carries no Lamb-shift coefficients")
    space = None
    for fam in couplings:
        for eo in fam:
            space = eo.op.space
            break
        if space:
            break
    if space is None:
        raise ValueError("no coupling operators given")
    dim = space.total_dim
    h = np.zeros((dim, dim), dtype=complex)

    def at(channel, w):
        for eo in couplings[channel]:
            if abs(eo.frequency - w) <= FREQ_MATCH_TOL:
                return eo.op.matrix
        return np.zeros((dim, dim), dtype=complex)

    for w, s in zip(tensor.frequencies, tensor.lamb):
        ops = [at(a, w) for a in range(tensor.n_channels)]
        for a in range(tensor.n_channels):
            for b in range(tensor.n_channels):
                if s[a, b] == 0:
                    continue
                h = h + s[a, b] * (ops[a].conj().T @ ops[b])
    return Operator(space, h, label="H_LS")


def apply_t0_filter(tensor: SpectralTensor) -> SpectralTensor:
    """Drop all non-positive-frequency entries (no absorption at zero temperature).

    Idempotent: filtering an already-filtered tensor returns an equal tensor.
    """
    keep = [i for i, w in enumerate(tensor.frequencies) if w > FREQ_MATCH_TOL]
    lamb = tuple(tensor.lamb[i] for i in keep) if tensor.lamb is not None else None
    return SpectralTensor(
        tuple(tensor.frequencies[i] for i in keep),
        tuple(tensor.gamma[i] for i in keep),
        lamb,
    )


@dataclass(frozen=True)
class DetailedBalanceReport:
    passed: bool
    max_violation: float


def validate_detailed_balance(
    tensor: SpectralTensor,
    beta: float,
    tol: float = 1e-10,
) -> DetailedBalanceReport:
    """Check the thermal relation gamma(w) = exp(-beta w) gamma(-w) entrywise.

    ``beta = math.inf`` encodes the zero-temperature limit, where the check
    reduces to: every negative-frequency rate matrix vanishes.  This is a
    pure validator; it never modifies the tensor.
    """
    worst = 0.0
    if math.isinf(beta):
        for w, g in zip(tensor.frequencies, tensor.gamma):
            if w < -FREQ_MATCH_TOL:
                worst = max(worst, float(np.max(np.abs(g))))
        return DetailedBalanceReport(worst <= tol, worst)

    for w, g in zip(tensor.frequencies, tensor.gamma):
        if w <= FREQ_MATCH_TOL:
            continue
        g_neg = tensor.gamma_at(-w)
        if g_neg is None:
            g_neg = np.zeros_like(g)
        worst = max(worst, float(np.max(np.abs(g - math.exp(-beta * w) * g_neg))))
    return DetailedBalanceReport(worst <= tol, worst)


SUPEROP_DIM_LIMIT = 32


def liouvillian_matrix(me: MasterEquation) -> np.ndarray:
    """Full generator as a dim^2 x dim^2 matrix acting on row-major vec(rho).

    Exactly the same term set (and term order) as :func:`build_dissipator`
    plus the commutator, so the two paths agree to the last bit of each
    assembled coefficient.  Intended for dimensions up to
    ``SUPEROP_DIM_LIMIT``; memory grows as dim^4.
    """
    d = me.space.total_dim
    eye = np.eye(d, dtype=complex)
    h = me.hamiltonian_matrix()
    L = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    K = np.zeros((d, d), dtype=complex)
    for w, g in zip(me.tensor.frequencies, me.tensor.gamma):
        ops = [me.coupling_at(a, w) for a in range(me.tensor.n_channels)]
        for a in range(me.tensor.n_channels):
            for b in range(me.tensor.n_channels):
                rate = complex(g[a, b])
                if rate == 0:
                    continue
                L = L + rate * np.kron(ops[b], ops[a].conj())
                K = K + rate * (ops[a].conj().T @ ops[b])
    L = L - 0.5 * (np.kron(K, eye) + np.kron(eye, K.T))
    return L


def default_max_step(me: MasterEquation) -> float:
    """Fixed-step rule: 1/50 of the fastest coherent period or decay time."""
    candidates = []
    w = me.frequency_scale()
    if w > 0:
        candidates.append(2.0 * math.pi / w)
    g = me.rate_scale()
    if g > 0:
        candidates.append(1.0 / g)
    return min(candidates) / 50.0 if candidates else math.inf


MAX_SUBSTEPS = 10_000_000


def _rk4_span(rhs, y: np.ndarray, t0: float, t1: float, h_max: float) -> np.ndarray:
    span = t1 - t0
    if span <= 0:
        return y
    n_sub = max(1, int(math.ceil(span / h_max))) if math.isfinite(h_max) else 1
    if n_sub > MAX_SUBSTEPS:
        raise IntegrationError("step size underflow: required substep count too large", t0)
    h = span / n_sub
    for _ in range(n_sub):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def integrate(
    me: MasterEquation,
    rho0: DensityMatrix,
    t_grid: np.ndarray,
    max_step: float | None = None,
    hygiene_tol: float = 1e-8,
) -> list[DensityMatrix]:
    """Evolve a state over an increasing time grid with fixed-step RK4.

    The first grid point carries the initial state.  Every output is
    checked for trace and Hermiticity drift (tolerance ``hygiene_tol``)
    and eigenvalue positivity (min eigenvalue > -1e-7); a violation is
    reported as an :class:`IntegrationError` with the failing time.
    """
    if me.temperature_mode != "zero":
        raise ValueError("only zero-temperature evolution is implemented")
    if me.tensor.has_nonpositive_frequencies():
        raise ValueError("tensor contains non-positive frequencies; filter it first")
    if rho0.space != me.space:
        raise ValueError("initial state lives on the wrong space")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 1 or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")

    h_max = default_max_step(me) if max_step is None else float(max_step)
    dim = me.space.total_dim
    if dim <= SUPEROP_DIM_LIMIT:
        lmat = liouvillian_matrix(me)

        def rhs(y_flat):
            return lmat @ y_flat
    else:
        hamiltonian = me.hamiltonian_matrix()
        dissipator = build_dissipator(me)

        def rhs(y_flat):
            rho = y_flat.reshape(dim, dim)
            out = -1j * (hamiltonian @ rho - rho @ hamiltonian) + dissipator(rho)
            return out.reshape(-1)

    target_trace = rho0.trace
    out = [rho0]
    y = np.array(rho0.matrix)
    for k in range(1, len(t)):
        y = _rk4_span(rhs, y.reshape(-1), t[k - 1], t[k], h_max).reshape(dim, dim)
        tr_err = abs(y.trace().real - target_trace) + abs(y.trace().imag)
        herm_err = float(np.max(np.abs(y - y.conj().T)))
        if tr_err > hygiene_tol or herm_err > hygiene_tol:
            raise IntegrationError(
                f"state hygiene lost: trace drift {tr_err:.3e}, hermiticity {herm_err:.3e}",
                float(t[k]),
            )
        min_eig = float(np.linalg.eigvalsh((y + y.conj().T) / 2.0)[0])
        if min_eig < -1e-7:
            raise IntegrationError(f"state positivity lost: eigenvalue {min_eig:.3e}", float(t[k]))
        out.append(
            DensityMatrix(
                me.space,
                (y + y.conj().T) / 2.0,
                tolerance=max(1e-7, hygiene_tol),
                trace_target=None if rho0.trace_target is None else target_trace,
            )
        )
    return out


def diagonalize_gamma(
    tensor: SpectralTensor,
    couplings: tuple[tuple[EigenOperator, ...], ...],
    rank_tol: float = 1e-12,
) -> list[tuple[float, Operator]]:
    """Rotate each gamma(w) to diagonal form, emitting unit-coefficient jump operators.

    For gamma(w) = V diag(lam) V^dag the operators

        L_k(w) = sqrt(lam_k) sum_b conj(V[b, k]) A_b(w)

    satisfy sum_k L_k rho L_k^dag - 1/2 {L_k^dag L_k, rho} = D(rho)
    exactly; the rebuilt dissipator is tested against the pair-sum form,
    which stays the authority.  One operator per eigenvalue above
    ``rank_tol`` is emitted, so the count equals rank(gamma(w)).
    """
    space = None
    for fam in couplings:
        for eo in fam:
            space = eo.op.space
            break
        if space:
            break
    if space is None:
        raise ValueError("no coupling operators given")
    dim = space.total_dim

    def at(channel, w):
        for eo in couplings[channel]:
            if abs(eo.frequency - w) <= FREQ_MATCH_TOL:
                return eo.op.matrix
        return np.zeros((dim, dim), dtype=complex)

    out: list[tuple[float, Operator]] = []
    for w, g in zip(tensor.frequencies, tensor.gamma):
        lam, vecs = np.linalg.eigh((g + g.conj().T) / 2.0)
        if lam.size and lam[0] < -GAMMA_PSD_TOL:
            raise ValueError(f"gamma({w}) not positive semidefinite: eigenvalue {lam[0]:.3e}")
        ops = [at(b, w) for b in range(tensor.n_channels)]
        for k in range(len(lam) - 1, -1, -1):  # largest rate first
            if lam[k] <= rank_tol:
                continue
            m = np.zeros((dim, dim), dtype=complex)
            for b in range(tensor.n_channels):
                m = m + np.conj(vecs[b, k]) * ops[b]
            out.append((w, Operator(space, math.sqrt(lam[k]) * m, label=f"L({w:g},{k})")))
    return out


def jump_operators(me: MasterEquation) -> list[Operator]:
    """Unit-coefficient jump operators of the diagonalized dissipator."""
    return [op for _, op in diagonalize_gamma(me.tensor, me.couplings)]
