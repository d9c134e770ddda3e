import math

import numpy as np
import pytest
from scipy.linalg import expm

from cobath.core import DensityMatrix, HilbertSpace, KetState, Operator, basis_ket, make_atom_ops, make_cavity_ops
from cobath.eigenops import EigenOperator
from cobath.jc import JCParams, build_jc, excitation_number, jc_initial, jc_space
from cobath.master_equation import MasterEquation, SpectralTensor, integrate
from cobath.trajectories import (
    effective_generator,
    jump_feed,
    mcwf_unravel,
    propagate_deterministic,
    reconstruct,
    solve_hierarchy,
)


def cavity_only_me(omega0=1.0, gamma=0.08, n_max=2):
    space = HilbertSpace((n_max + 1,))
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)
    h = Operator(space, omega0 * (a.conj().T @ a), label="H")
    fam = (EigenOperator(omega0, Operator(space, a, label="a"), 0),)
    tensor = SpectralTensor((omega0,), (np.array([[gamma]], dtype=complex),))
    number = Operator(space, np.diag(np.arange(n_max + 1)).astype(complex))
    return MasterEquation(h, (fam,), tensor), space, number


def jc_setup(g11=0.01, g22=0.02, g12=0.01, eps=0.1, n_exc=1):
    p = JCParams(omega0=1.0, eps=eps, g11=g11, g22=g22, g12=g12, n_exc=n_exc)
    me = build_jc(p)
    return p, me, jc_space(p)


# ------------------------------------------------------ effective generator

def test_generator_reduces_to_hamiltonian_without_damping():
    _, me, _ = jc_setup(g11=0.0, g22=0.0, g12=0.0)
    gen = effective_generator(me)
    np.testing.assert_array_equal(gen.B.matrix, me.H_S.matrix)


def test_generator_single_channel_damping():
    me, space, _ = cavity_only_me(gamma=0.08)
    gen = effective_generator(me)
    a = me.couplings[0][0].op.matrix
    np.testing.assert_allclose(gen.Hprime.matrix, 0.08 * a.conj().T @ a, atol=1e-15)


def test_generator_matches_independent_assembly():
    g11, g22, g12 = 0.01, 0.02, 0.006 + 0.004j
    p, me, space = jc_setup(g11=g11, g22=g22, g12=g12)
    gen = effective_generator(me)
    atom = make_atom_ops(space, 0)
    cav = make_cavity_ops(space, 1)
    sm, sp_ = atom["S_minus"].matrix, atom["S_plus"].matrix
    a, ad = cav["a"].matrix, cav["a_dag"].matrix
    hp = g11 * sp_ @ sm + g12 * sp_ @ a + np.conj(g12) * ad @ sm + g22 * ad @ a
    b_alt = me.H_S.matrix - 0.5j * hp
    assert np.max(np.abs(gen.B.matrix - b_alt)) < 1e-15

    # one-excitation sector entries of the generator
    n_ph = space.factor_dims[1]
    i1, i2 = 0, n_ph + 1
    b = gen.B.matrix
    assert b[i1, i1] == pytest.approx(0.5 * 1.0 - 0.5j * g11)
    assert b[i2, i2] == pytest.approx(0.5 * 1.0 - 0.5j * g22)
    assert b[i1, i2] == pytest.approx(0.1 - 0.5j * g12)
    assert b[i2, i1] == pytest.approx(0.1 - 0.5j * np.conj(g12))


def test_generator_rejects_unfiltered_tensor():
    me, space, _ = cavity_only_me()
    a = me.couplings[0][0]
    fam = (a, EigenOperator(-1.0, a.op.dagger(), 0))
    tensor = SpectralTensor((1.0, -1.0), (me.tensor.gamma[0], np.zeros((1, 1))))
    with pytest.raises(ValueError, match="filter"):
        effective_generator(MasterEquation(me.H_S, (fam,), tensor))


# --------------------------------------------------- deterministic propagation

def test_propagate_identity_at_zero_time(rng):
    _, me, space = jc_setup()
    gen = effective_generator(me)
    f = np.diag(rng.uniform(size=space.total_dim)).astype(complex)
    np.testing.assert_allclose(propagate_deterministic(gen, f, 0.0), f, atol=1e-14)


def test_propagate_unitary_limit_preserves_trace(rng):
    _, me, space = jc_setup(g11=0.0, g22=0.0, g12=0.0)
    gen = effective_generator(me)
    f = np.diag(rng.uniform(size=space.total_dim)).astype(complex)
    out = propagate_deterministic(gen, f, 3.7)
    assert np.trace(out).real == pytest.approx(np.trace(f).real, abs=1e-12)


def test_propagate_single_photon_survival():
    me, space, _ = cavity_only_me(gamma=0.08, n_max=2)
    gen = effective_generator(me)
    f = np.zeros((3, 3), dtype=complex)
    f[1, 1] = 1.0
    for t in (0.5, 2.0, 10.0):
        out = propagate_deterministic(gen, f, t)
        assert np.trace(out).real == pytest.approx(math.exp(-0.08 * t), rel=1e-10)


def test_propagate_trace_monotone_for_psd_damping(rng):
    _, me, space = jc_setup()
    gen = effective_generator(me)
    g = rng.normal(size=(space.total_dim,) * 2) + 1j * rng.normal(size=(space.total_dim,) * 2)
    f = g @ g.conj().T
    f /= np.trace(f).real
    traces = [np.trace(propagate_deterministic(gen, f, t)).real for t in np.linspace(0, 50, 11)]
    assert all(b <= a + 1e-12 for a, b in zip(traces, traces[1:]))


# ----------------------------------------------------------------- hierarchy

def test_ground_start_is_constant():
    p, me, space = jc_setup()
    rho0 = basis_ket(space, (1, 0)).projector()
    t = np.linspace(0.0, 20.0, 21)
    h = solve_hierarchy(me, rho0, t, excitation_number(space))
    assert h.n_max_exc == 0
    for k in range(len(t)):
        np.testing.assert_allclose(h.blocks[0][k], rho0.matrix, atol=1e-12)


def test_single_excitation_ground_block_weight():
    # the ground block is (1 - r11 - r22) |0,-><0,-|
    p, me, space = jc_setup()
    t = np.linspace(0.0, 60.0, 61)
    h = solve_hierarchy(me, jc_initial(p), t, excitation_number(space))
    n_ph = space.factor_dims[1]
    ig = n_ph  # |-,0>
    i1, i2 = 0, n_ph + 1
    for k in range(0, len(t), 10):
        top = h.blocks[1][k]
        ground = h.blocks[0][k]
        expected = 1.0 - top[i1, i1].real - top[i2, i2].real
        assert ground[ig, ig].real == pytest.approx(expected, abs=1e-9)
        off = ground.copy()
        off[ig, ig] = 0.0
        assert np.max(np.abs(off)) < 1e-10


def test_hierarchy_rejects_mixed_sectors():
    p, me, space = jc_setup()
    m = 0.5 * basis_ket(space, (1, 0)).projector().matrix
    m += 0.5 * basis_ket(space, (0, 0)).projector().matrix
    rho0 = DensityMatrix(space, m)
    with pytest.raises(ValueError, match="sector"):
        solve_hierarchy(me, rho0, np.linspace(0, 1, 2), excitation_number(space))


def test_hierarchy_telescoping_trace():
    p, me, space = jc_setup(n_exc=2)
    t = np.linspace(0.0, 40.0, 41)
    h = solve_hierarchy(me, jc_initial(p), t, excitation_number(space))
    for k in range(len(t)):
        assert np.trace(h.total(k)).real == pytest.approx(1.0, abs=1e-10)


def test_hierarchy_blocks_stay_psd():
    p, me, space = jc_setup(n_exc=2)
    t = np.linspace(0.0, 80.0, 41)
    h = solve_hierarchy(me, jc_initial(p), t, excitation_number(space))
    for i, block in enumerate(h.blocks):
        for k in range(len(t)):
            m = (block[k] + block[k].conj().T) / 2
            assert np.linalg.eigvalsh(m)[0] > -1e-7


def test_first_shell_matches_nested_quadrature():
    # Duhamel check: the one-jump block from direct trapezoid quadrature of
    #   f(t) = int_0^t U(s)^-1 J(rho_top(s)) U(s)^-dag ds,  rho(t) = U f U^dag
    p, me, space = jc_setup()
    gen = effective_generator(me)
    feed = jump_feed(me)
    rho_top0 = jc_initial(p).matrix
    n_quad = 2000
    t_max = 10.0
    s_grid = np.linspace(0.0, t_max, n_quad + 1)
    b = gen.B.matrix
    integrand = []
    for s in s_grid:
        u = expm(-1j * b * s)
        u_inv = expm(1j * b * s)
        rho_top = u @ rho_top0 @ u.conj().T
        integrand.append(u_inv @ feed(rho_top) @ u_inv.conj().T)
    integrand = np.array(integrand)
    ds = s_grid[1] - s_grid[0]

    coarse = np.array([0.0, 2.0, 5.0, 10.0])
    h = solve_hierarchy(me, jc_initial(p), coarse, excitation_number(space))
    for t in coarse[1:]:
        k = int(round(t / ds))
        f = np.trapezoid(integrand[: k + 1], dx=ds, axis=0)
        u = expm(-1j * b * t)
        oracle = u @ f @ u.conj().T
        block = h.block_at(0, t)
        assert np.max(np.abs(block - oracle)) < 1e-5


def test_reconstruct_matches_direct_integration():
    for n_exc in (1, 2):
        p, me, space = jc_setup(n_exc=n_exc)
        t = np.linspace(0.0, 50.0, 101)
        h = solve_hierarchy(me, jc_initial(p), t, excitation_number(space))
        rec = reconstruct(h, space=space)
        direct = integrate(me, jc_initial(p), t)
        dev = max(np.max(np.abs(a.matrix - b.matrix)) for a, b in zip(rec, direct))
        assert dev < 1e-6


def test_no_jump_conditional_equals_top_block():
    p, me, space = jc_setup(g11=0.01, g22=0.01, g12=0.01)
    gen = effective_generator(me)
    t = np.linspace(0.0, 120.0, 13)
    h = solve_hierarchy(me, jc_initial(p), t, excitation_number(space))
    psi0 = jc_initial(p).matrix
    for tv in (40.0, 120.0):
        cond = propagate_deterministic(gen, psi0, tv)
        cond /= np.trace(cond).real
        top = h.block_at(1, tv)
        top = top / np.trace(top).real
        assert np.max(np.abs(cond - top)) < 1e-7


# ----------------------------------------------------------------- MCWF

def test_mcwf_without_damping_is_schroedinger():
    p, me, space = jc_setup(g11=0.0, g22=0.0, g12=0.0)
    psi0 = basis_ket(space, (0, 0))
    t = np.linspace(0.0, 30.0, 16)
    res = mcwf_unravel(me, psi0, t, n_traj=3, seed=11)
    assert all(len(r) == 0 for r in res.jump_records)
    for k, tv in enumerate(t):
        u = expm(-1j * me.H_S.matrix * tv)
        v = u @ psi0.amplitudes
        np.testing.assert_allclose(res.averages[-1][k], np.outer(v, v.conj()), atol=1e-10)


def test_mcwf_jump_fraction_matches_survival():
    me, space, _ = cavity_only_me(gamma=0.08, n_max=2)
    psi0 = KetState(space, np.array([0.0, 1.0, 0.0], dtype=complex))
    t_end = 10.0
    n_traj = 500
    res = mcwf_unravel(me, psi0, np.linspace(0.0, t_end, 11), n_traj=n_traj, seed=5)
    frac = sum(1 for r in res.jump_records if len(r) >= 1) / n_traj
    p_jump = 1.0 - math.exp(-0.08 * t_end)
    sigma = math.sqrt(p_jump * (1 - p_jump) / n_traj)
    assert abs(frac - p_jump) <= 3 * sigma


def test_mcwf_converges_to_integration():
    p, me, space = jc_setup(g11=0.01, g22=0.01, g12=0.01)
    psi0 = basis_ket(space, (0, 0))
    t = np.linspace(0.0, 150.0, 31)
    res = mcwf_unravel(me, psi0, t, n_traj=800, seed=3, snapshot_counts=(50,))
    direct = integrate(me, jc_initial(p), t)
    dev_small = max(
        np.max(np.abs(res.averages[0][k] - direct[k].matrix)) for k in range(len(t))
    )
    dev_full = max(
        np.max(np.abs(res.averages[-1][k] - direct[k].matrix)) for k in range(len(t))
    )
    assert dev_full < 0.08
    assert dev_full < dev_small  # more trajectories, closer ensemble


def test_mcwf_zero_jump_fraction_matches_block_weight():
    p, me, space = jc_setup(g11=0.01, g22=0.01, g12=0.01)
    psi0 = basis_ket(space, (0, 0))
    t = np.linspace(0.0, 200.0, 21)
    n_traj = 600
    res = mcwf_unravel(me, psi0, t, n_traj=n_traj, seed=17)
    h = solve_hierarchy(me, jc_initial(p), t, excitation_number(space))
    surv = np.trace(h.block_at(1, 200.0)).real
    frac = sum(1 for r in res.jump_records if len(r) == 0) / n_traj
    sigma = math.sqrt(surv * (1 - surv) / n_traj)
    assert abs(frac - surv) <= 3 * sigma


def test_mcwf_requires_normalized_ket():
    p, me, space = jc_setup()
    with pytest.raises(ValueError, match="normalized"):
        mcwf_unravel(me, np.zeros(space.total_dim), np.linspace(0, 1, 2), 1, 0)


def test_mcwf_is_seed_deterministic():
    p, me, space = jc_setup(g11=0.02, g22=0.02, g12=0.0)
    psi0 = basis_ket(space, (0, 0))
    t = np.linspace(0.0, 60.0, 7)
    a = mcwf_unravel(me, psi0, t, n_traj=40, seed=9)
    b = mcwf_unravel(me, psi0, t, n_traj=40, seed=9)
    assert a.jump_records == b.jump_records
    np.testing.assert_array_equal(a.averages[-1], b.averages[-1])
    # chunking must not change the ordered reduction
    c = mcwf_unravel(me, psi0, t, n_traj=40, seed=9, chunk_size=7)
    np.testing.assert_allclose(c.averages[-1], a.averages[-1], atol=1e-13)
    assert c.jump_records == a.jump_records
