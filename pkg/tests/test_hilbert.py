import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinbath.errors import BudgetError, DimensionMismatch, NumericalError
from spinbath.hilbert import (
    CompiledHamiltonian,
    apply_hamiltonian,
    dense_hamiltonian,
    expectation,
    partial_trace_env,
)
from spinbath.model import Coupling, CouplingFamily, Family, RngStreams, build_topology, sample_couplings

FAMILIES = list(Family)


def random_terms(seed, n_spins, family):
    rng = RngStreams(seed)
    edges = build_topology("spin_glass", n_spins).edges
    return sample_couplings(CouplingFamily(family, 1.3), edges, rng.named("couplings-sys"))


def haar(dim, seed):
    g = np.random.default_rng(seed)
    v = g.standard_normal(dim) + 1j * g.standard_normal(dim)
    return v / np.linalg.norm(v)


def heisenberg_pair(j):
    return [Coupling(0, 1, a, j) for a in "xyz"]


def test_matrix_free_matches_dense_all_families():
    # independent oracle: H built from explicit Kronecker products
    checked = 0
    for family in FAMILIES:
        for seed in range(17):
            n = 4 + seed % 3
            terms = random_terms(seed, n, family)
            h = dense_hamiltonian(terms, n)
            psi = haar(1 << n, 1000 + seed)
            dev = np.linalg.norm(apply_hamiltonian(terms, psi, n) - h @ psi)
            assert dev < 1e-12
            checked += 1
    assert checked >= 100


def test_two_spin_matrix_elements():
    # 4x4 brute-force matrix of -J S1.S2
    j = -5.0
    h = dense_hamiltonian(heisenberg_pair(j), 2)
    up_down = np.zeros(4, dtype=complex)
    up_down[2] = 1.0  # spin 1 up (bit0=0), spin 2 down (bit1=1)
    down_up = np.zeros(4, dtype=complex)
    down_up[1] = 1.0
    hpsi = apply_hamiltonian(heisenberg_pair(j), up_down, 2)
    assert abs(np.vdot(up_down, hpsi) - j / 4) < 1e-14
    assert abs(np.vdot(down_up, hpsi) - (-j / 2)) < 1e-14
    assert np.linalg.norm(hpsi - h @ up_down) < 1e-14


@pytest.mark.parametrize("j", [-5.0, 1.0, 3.7])
def test_singlet_triplet_eigenstates(j):
    op = CompiledHamiltonian(heisenberg_pair(j), 2)
    singlet = np.zeros(4, dtype=complex)
    singlet[2] = 1 / np.sqrt(2)
    singlet[1] = -1 / np.sqrt(2)
    triplet0 = np.abs(singlet).astype(complex)
    assert np.linalg.norm(op.apply(singlet) - (3 * j / 4) * singlet) < 1e-14
    assert np.linalg.norm(op.apply(triplet0) - (-j / 4) * triplet0) < 1e-14


def test_expectation_table_values():
    # operator S1.S2 corresponds to coupling c = -1 under the H = -c S S convention
    s_dot_s = [Coupling(0, 1, a, -1.0) for a in "xyz"]
    szsz = [Coupling(0, 1, "z", -1.0)]
    singlet = np.zeros(4, dtype=complex)
    singlet[2], singlet[1] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    up_up = np.zeros(4, dtype=complex)
    up_up[0] = 1.0
    up_down = np.zeros(4, dtype=complex)
    up_down[2] = 1.0
    assert abs(expectation(s_dot_s, singlet, 2) - (-0.75)) < 1e-14
    assert abs(expectation(szsz, up_up, 2) - 0.25) < 1e-14
    assert abs(expectation(s_dot_s, up_down, 2) - (-0.25)) < 1e-14


@given(seed=st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_hermiticity(seed):
    terms = random_terms(seed, 5, FAMILIES[seed % len(FAMILIES)])
    op = CompiledHamiltonian(terms, 5)
    phi, psi = haar(32, seed + 1), haar(32, seed + 2)
    lhs = np.vdot(phi, op.apply(psi))
    rhs = np.conj(np.vdot(psi, op.apply(phi)))
    assert abs(lhs - rhs) < 1e-12


def test_partial_trace_product_state_is_pure():
    sys_state = haar(4, 1)
    env_state = haar(8, 2)
    rho = partial_trace_env(np.kron(env_state, sys_state), 2)
    assert abs(np.trace(rho) - 1) < 1e-12
    assert abs(np.vdot(rho, rho).real - 1) < 1e-12  # Tr rho^2 = 1
    assert np.linalg.norm(rho - np.outer(sys_state, sys_state.conj())) < 1e-12


def test_partial_trace_bell_pair():
    bell = np.zeros(4, dtype=complex)
    bell[0] = bell[3] = 1 / np.sqrt(2)  # (|up,up> + |down,down>)/sqrt(2) across the cut
    rho = partial_trace_env(bell, 1)
    assert np.allclose(rho, np.diag([0.5, 0.5]), atol=1e-14)


def test_partial_trace_matches_bruteforce():
    from spinbath.runner import _partial_trace_bruteforce

    psi = haar(64, 9)  # 3 + 3 spins
    rho = partial_trace_env(psi, 3)
    oracle = _partial_trace_bruteforce(psi, 3)
    assert np.abs(rho - oracle).max() < 1e-12
    ev = np.linalg.eigvalsh(rho)
    assert ev.min() > -1e-10
    assert abs(np.trace(rho) - 1) < 1e-12


@given(seed=st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_partial_trace_preserves_expectation(seed):
    # Tr_S(rho A) = <psi|(A x 1)|psi> for random Hermitian system observables
    g = np.random.default_rng(seed)
    psi = haar(64, seed)
    rho = partial_trace_env(psi, 2)
    a = g.standard_normal((4, 4)) + 1j * g.standard_normal((4, 4))
    a = a + a.conj().T
    full = np.kron(np.eye(16), a)
    lhs = np.trace(rho @ a)
    rhs = np.vdot(psi, full @ psi)
    assert abs(lhs - rhs) < 1e-12


def test_partial_trace_input_validation():
    psi = haar(8, 0)
    with pytest.raises(DimensionMismatch):
        partial_trace_env(psi, 5)
    with pytest.raises(NumericalError):
        partial_trace_env(2.0 * psi, 1)
    with pytest.raises(DimensionMismatch):
        partial_trace_env(np.ones(6, dtype=complex), 1)


def test_apply_dimension_mismatch():
    op = CompiledHamiltonian(heisenberg_pair(1.0), 2)
    with pytest.raises(DimensionMismatch):
        op.apply(np.ones(8, dtype=complex))


def test_dense_budget():
    with pytest.raises(BudgetError):
        dense_hamiltonian([Coupling(0, 13, "z", 1.0)], 14)


def test_anisotropic_double_flip_channel():
    # distinct c_x, c_y generate the aligned-pair channel; dense oracle check
    terms = [Coupling(0, 1, "x", 0.9), Coupling(0, 1, "y", -0.4)]
    h = dense_hamiltonian(terms, 2)
    # <down,down|H|up,up> = -(cx - cy)/4
    assert abs(h[3, 0] - (-(0.9 - (-0.4)) / 4)) < 1e-15
    psi = haar(4, 3)
    assert np.linalg.norm(apply_hamiltonian(terms, psi, 2) - h @ psi) < 1e-14
