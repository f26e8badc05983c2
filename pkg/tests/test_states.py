import numpy as np
import pytest

from spinbath.errors import ConfigError
from spinbath.hilbert import CompiledHamiltonian, partial_trace_env, site_operator, SPIN_OPS
from spinbath.model import Coupling, CouplingFamily, Family, RngStreams, build_topology, sample_couplings
from spinbath.observables import pair_correlators, total_magnetization
from spinbath.states import StateLabel, lowest_eigenpairs, make_state, product_state


def heisenberg_pair(j):
    return [Coupling(0, 1, a, j) for a in "xyz"]


def rho_of(psi):
    return np.outer(psi, psi.conj())


def test_ud_two_spin_correlation():
    psi = make_state("UD", 2)
    assert psi[2] == 1.0  # spin 1 up, spin 2 down
    corr = pair_correlators(rho_of(psi))
    assert abs(corr["SzSz"] - (-0.25)) < 1e-14


def test_uu_four_spin():
    psi = make_state("UU", 4)
    assert psi[0] == 1.0
    assert abs(total_magnetization(rho_of(psi)) - 2.0) < 1e-14


def test_near_ud_correlation_offset():
    psi = make_state("NEAR_UD", 4, epsilon=0.05)
    corr = pair_correlators(rho_of(partial_trace_env(psi, 2)))
    assert abs(corr["SzSz"] - (-0.25 + 0.05)) < 1e-12
    default = make_state("NEAR_UD", 2)
    corr = pair_correlators(rho_of(default))
    assert abs(corr["SzSz"] - (-0.2)) < 1e-12
    with pytest.raises(ConfigError):
        make_state("NEAR_UD", 2, epsilon=0.9)


def test_ground_antiferro_is_singlet():
    rng = RngStreams(1)
    psi = make_state("GROUND", 2, heisenberg_pair(-1.0), rng.generator("state-sys"))
    corr = pair_correlators(rho_of(psi))
    assert abs(corr["SS"] - (-0.75)) < 1e-12
    op = CompiledHamiltonian(heisenberg_pair(-1.0), 2)
    assert np.linalg.norm(op.apply(psi) - (3 * (-1.0) / 4) * psi) < 1e-8


def test_ground_ferro_degenerate_combination():
    # J > 0: triplet ground manifold; random combination, energy still E_T
    op = CompiledHamiltonian(heisenberg_pair(2.0), 2)
    a = make_state("GROUND", 2, op, RngStreams(7).generator("state-sys"))
    b = make_state("GROUND", 2, op, RngStreams(7).generator("state-sys"))
    c = make_state("GROUND", 2, op, RngStreams(8).generator("state-sys"))
    assert np.allclose(a, b)
    assert abs(abs(np.vdot(a, c)) - 1.0) > 1e-3  # different seed, different mix
    assert np.linalg.norm(op.apply(a) - (-2.0 / 4) * a) < 1e-8


def test_ground_lanczos_path_residual():
    # dim 2^10 > 512 forces the sparse path
    rng = RngStreams(3)
    edges = build_topology("spin_glass", 10).edges
    terms = sample_couplings(CouplingFamily(Family.HEISENBERG_TYPE, 1.0), edges, rng.named("couplings-env"))
    op = CompiledHamiltonian(terms, 10)
    psi = make_state("GROUND", 10, op, rng.generator("state-env"))
    e0, _, _, _ = lowest_eigenpairs(op, 10, rng.generator("state-env"))
    assert np.linalg.norm(op.apply(psi) - e0 * psi) < 1e-8


def test_near_ground_mixture():
    rng = RngStreams(5)
    op = CompiledHamiltonian(heisenberg_pair(-1.0), 2)
    eps = 0.05
    psi = make_state("NEAR_GROUND", 2, op, rng.generator("state-sys"), epsilon=eps)
    e = np.vdot(psi, op.apply(psi)).real
    e0, et = 3 * (-1.0) / 4, -(-1.0) / 4
    assert abs(e - ((1 - eps) * e0 + eps * et)) < 1e-10
    singlet = np.zeros(4, dtype=complex)
    singlet[2], singlet[1] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    assert abs(abs(np.vdot(singlet, psi)) ** 2 - (1 - eps)) < 1e-10


def test_random_state_moments():
    # Haar moments: zero mean, E|amp|^2 = 2^-n, over >= 1e3 draws
    n, draws = 4, 1200
    rng = RngStreams(11).generator("state-env")
    amps = np.array([make_state("RANDOM", n, rng=rng) for _ in range(draws)])
    dim = 1 << n
    mean = amps.mean(axis=0)
    se_mean = 1.0 / np.sqrt(dim * draws)
    assert np.abs(mean).max() < 4 * se_mean
    per_amp = (np.abs(amps) ** 2).mean(axis=0)
    se = np.sqrt(1.0 / dim**2) / np.sqrt(draws)  # |amp|^2 has std ~ 1/dim
    assert np.abs(per_amp - 1.0 / dim).max() < 4 * se


def test_random_state_unitary_invariance():
    # distribution invariant under a fixed unitary: moments of U psi match
    n, draws = 3, 1500
    g = np.random.default_rng(0)
    m = g.standard_normal((8, 8)) + 1j * g.standard_normal((8, 8))
    u, _ = np.linalg.qr(m)
    rng = RngStreams(13).generator("state-env")
    amps = np.array([u @ make_state("RANDOM", n, rng=rng) for _ in range(draws)])
    per_amp = (np.abs(amps) ** 2).mean(axis=0)
    se = (1.0 / 8) / np.sqrt(draws)
    assert np.abs(per_amp - 1.0 / 8).max() < 4 * se


def test_rr_product_structure_and_bloch_mean():
    rng = RngStreams(17).generator("state-env")
    psi = make_state("RR", 5, rng=rng)
    for k in range(5):
        # single-spin reduced state is pure for a product state
        perm_psi = psi.reshape([2] * 5)[...]  # bits: axis 4-k
        rho = partial_trace_env(np.moveaxis(perm_psi, 4 - k, 4).reshape(-1), 1)
        purity = np.vdot(rho, rho).real
        assert abs(purity - 1.0) < 1e-12
    # ensemble average of every component vanishes
    draws = 3000
    acc = np.zeros(3)
    for _ in range(draws):
        one = make_state("RR", 1, rng=rng)
        rho = rho_of(one)
        acc += [np.trace(rho @ SPIN_OPS[a]).real for a in "xyz"]
    assert np.abs(acc / draws).max() < 4 * 0.5 / np.sqrt(3 * draws)


def test_all_constructors_normalized():
    rng = RngStreams(23)
    for label in StateLabel:
        kwargs = {}
        ham = heisenberg_pair(-1.0) if label in (StateLabel.GROUND, StateLabel.NEAR_GROUND) else None
        psi = make_state(label, 2, ham, rng.generator("state-sys"), **kwargs)
        assert abs(np.linalg.norm(psi) - 1.0) < 1e-12


def test_product_state_composition():
    sys_state = make_state("UD", 2)
    env_state = make_state("UU", 2)
    full = product_state(sys_state, env_state)
    assert full[2] == 1.0  # env bits 0, sys index 2
    rng = RngStreams(29)
    env_state = make_state("RANDOM", 3, rng=rng.generator("state-env"))
    full = product_state(sys_state, env_state)
    rho = partial_trace_env(full, 2)
    assert np.linalg.norm(rho - rho_of(sys_state)) < 1e-12
    assert abs(np.vdot(rho, rho).real - 1.0) < 1e-12


def test_state_errors():
    with pytest.raises(ConfigError):
        make_state("RANDOM", 3)  # rng required
    with pytest.raises(ConfigError):
        make_state("GROUND", 3)  # hamiltonian required
