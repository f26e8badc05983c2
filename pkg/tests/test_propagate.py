import numpy as np
import pytest

from spinbath.errors import BudgetError, SpectralBoundsError
from spinbath.hilbert import CompiledHamiltonian, dense_hamiltonian
from spinbath.model import Coupling, CouplingFamily, Family, RngStreams, build_topology, sample_couplings
from spinbath.propagate import (
    ChebyshevPropagator,
    PropagatorPlan,
    SpectralBounds,
    chebyshev_step,
    propagate_exact,
    spectral_bounds,
    tighten_bounds,
)

TAU = np.pi / 10


def haar(dim, seed):
    g = np.random.default_rng(seed)
    v = g.standard_normal(dim) + 1j * g.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_spec_terms(seed, n, family=Family.HEISENBERG_TYPE, scale=1.0):
    rng = RngStreams(seed)
    edges = build_topology("spin_glass", n).edges
    return sample_couplings(CouplingFamily(family, scale), edges, rng.named("couplings-sys"))


def heisenberg_pair(j):
    return [Coupling(0, 1, a, j) for a in "xyz"]


def test_bounds_enclose_two_spin_spectrum():
    op = CompiledHamiltonian(heisenberg_pair(-5.0), 2)
    bounds = spectral_bounds(op)
    assert bounds.encloses([3 * (-5.0) / 4, -(-5.0) / 4])  # {-3.75, 1.25}


def test_bounds_empty_hamiltonian_guard():
    op = CompiledHamiltonian([], 3)
    bounds = spectral_bounds(op)
    assert bounds.e_min < 0 < bounds.e_max
    assert bounds.e_max < 1e-8


def test_bounds_enclose_dense_spectrum():
    for seed in range(5):
        terms = random_terms = random_spec_terms(seed, 8)
        op = CompiledHamiltonian(terms, 8)
        ev = np.linalg.eigvalsh(dense_hamiltonian(terms, 8))
        assert spectral_bounds(op).encloses(ev)
        tight = tighten_bounds(op)
        assert tight.encloses(ev)
        assert tight.e_max - tight.e_min <= 2.2 * spectral_bounds(op).half_width


def test_chebyshev_matches_exact_oracle():
    for seed in range(4):
        n = 8
        terms = random_spec_terms(seed, n)
        op = CompiledHamiltonian(terms, n)
        psi = haar(1 << n, seed)
        plan = PropagatorPlan.build(op, 10.0)
        dev = np.linalg.norm(chebyshev_step(op, plan, psi) - propagate_exact(op, psi, 10.0))
        assert dev < 1e-10


def test_two_spin_precession_analytic():
    # |up,down> oscillates between singlet and triplet with splitting J:
    # <Sz_1>(t) = cos(J t)/2
    j = -5.0
    op = CompiledHamiltonian(heisenberg_pair(j), 2)
    plan = PropagatorPlan.build(op, TAU)
    prop = ChebyshevPropagator(op, plan)
    psi = np.zeros(4, dtype=complex)
    psi[2] = 1.0
    sz1 = np.array([0.5, -0.5, 0.5, -0.5])  # diagonal of Sz on bit 0
    for step in range(1, 40):
        psi = prop.step(psi)
        expected = 0.5 * np.cos(j * step * TAU)
        got = np.vdot(psi, sz1 * psi).real
        assert abs(got - expected) < 1e-10


def test_zero_time_step_is_identity():
    terms = random_spec_terms(3, 6)
    op = CompiledHamiltonian(terms, 6)
    psi = haar(64, 7)
    plan = PropagatorPlan.build(op, 0.0)
    assert np.linalg.norm(chebyshev_step(op, plan, psi) - psi) < 1e-14


def test_exact_propagator_identity_and_stationary():
    terms = random_spec_terms(1, 6)
    op = CompiledHamiltonian(terms, 6)
    psi = haar(64, 3)
    assert np.linalg.norm(propagate_exact(op, psi, 0.0) - psi) < 1e-12
    energies, vectors = np.linalg.eigh(dense_hamiltonian(terms, 6))
    phi = vectors[:, 5].astype(complex)
    out = propagate_exact(op, phi, 2.3)
    assert abs(abs(np.vdot(phi, out)) - 1.0) < 1e-12


def test_exact_propagator_singlet_phase():
    j = -5.0
    op = CompiledHamiltonian(heisenberg_pair(j), 2)
    singlet = np.zeros(4, dtype=complex)
    singlet[2], singlet[1] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    t = 1.234
    out = propagate_exact(op, singlet, t)
    assert np.linalg.norm(out - np.exp(-1j * (3 * j / 4) * t) * singlet) < 1e-12


def test_norm_and_energy_conservation_long_run():
    n = 8
    terms = random_spec_terms(5, n)
    op = CompiledHamiltonian(terms, n)
    plan = PropagatorPlan.build(op, TAU, tighten=True)
    prop = ChebyshevPropagator(op, plan)
    psi = haar(1 << n, 11)
    e0 = op.expectation(psi)
    worst_step = 0.0
    prev_norm = 1.0
    for step in range(10_000):
        psi = prop.step(psi)
        if step % 200 == 0:
            nrm = np.linalg.norm(psi)
            worst_step = max(worst_step, abs(nrm - prev_norm))
    nrm = np.linalg.norm(psi)
    assert abs(nrm - 1.0) < 1e-8  # cumulative drift over 1e4 steps
    e1 = op.expectation(psi / nrm)
    assert abs(e1 - e0) < 1e-10 * max(1.0, abs(e0))


def test_per_step_norm_conservation():
    terms = random_spec_terms(8, 6)
    op = CompiledHamiltonian(terms, 6)
    prop = ChebyshevPropagator(op, PropagatorPlan.build(op, TAU))
    psi = haar(64, 2)
    out = prop.step(psi)
    assert abs(np.linalg.norm(out) - 1.0) < 1e-10


def test_time_composability():
    terms = random_spec_terms(6, 6)
    op = CompiledHamiltonian(terms, 6)
    psi = haar(64, 4)
    half = PropagatorPlan.build(op, 0.7)
    full = PropagatorPlan.build(op, 1.4)
    twice = chebyshev_step(op, half, chebyshev_step(op, half, psi))
    once = chebyshev_step(op, full, psi)
    assert np.linalg.norm(twice - once) < 1e-12


def test_bessel_against_mpmath_reference():
    import mpmath
    from scipy.special import jv

    for z in (0.1, 1.0, 5.0, 14.0, 40.0):
        ks = np.arange(0, 61)
        ours = jv(ks, z)
        ref = np.array([float(mpmath.besselj(int(k), mpmath.mpf(z))) for k in ks])
        assert np.abs(ours - ref).max() < 1e-13


def test_corrupted_bounds_detected():
    terms = random_spec_terms(2, 6, scale=2.0)
    op = CompiledHamiltonian(terms, 6)
    bad = SpectralBounds(-0.05, 0.05)  # spectrum is much wider
    plan = PropagatorPlan.build(op, TAU, bounds=bad)
    psi = haar(64, 1)
    with pytest.raises(SpectralBoundsError):
        for _ in range(20):
            psi = chebyshev_step(op, plan, psi)


def test_exact_propagator_budget():
    with pytest.raises(BudgetError):
        propagate_exact([Coupling(0, 13, "z", 1.0)], np.zeros(1 << 14, dtype=complex), 1.0, n_total=14)


def test_plan_reports_order_and_tolerance():
    terms = random_spec_terms(0, 6)
    op = CompiledHamiltonian(terms, 6)
    plan = PropagatorPlan.build(op, TAU)
    assert plan.order >= 1
    assert plan.truncation_tol == 1e-14
    z = plan.bounds.half_width * TAU
    from scipy.special import jv

    assert abs(jv(plan.order, z)) < 1e-14
