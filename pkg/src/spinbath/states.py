"""Initial-state constructors for the system and environment registers.

Labels (used verbatim in config files):

  UU           all spins up (basis index 0)
  UD           alternating up/down along the register
  NEAR_UD      UD with one spin rotated so the first-pair <Sz Sz> sits
               eps above -1/4
  RR           product of independent Haar-random single-spin states
  RANDOM       Haar-random superposition of all basis states
  GROUND       lowest eigenvector (random combination if degenerate)
  NEAR_GROUND  sqrt(1-eps)|ground> + sqrt(eps)|first excited>

The full initial state of a run is the product of a system state and an
environment state, c(i, p) = c_S(i) * c_E(p).
"""

from __future__ import annotations

from enum import Enum
from functools import reduce

import numpy as np

from .errors import ConfigError, GroundStateError
from .hilbert import CompiledHamiltonian, check_normalized, dense_hamiltonian

NEAR_UD_EPSILON = 0.05
NEAR_GROUND_EPSILON = 0.05
DEGENERACY_RTOL = 1e-8
GROUND_RESIDUAL_TOL = 1e-8


class StateLabel(str, Enum):
    GROUND = "GROUND"
    NEAR_GROUND = "NEAR_GROUND"
    UU = "UU"
    UD = "UD"
    NEAR_UD = "NEAR_UD"
    RR = "RR"
    RANDOM = "RANDOM"


def _ud_index(n_spins: int) -> int:
    # spin k down for odd k: bit pattern ...1010
    return sum(1 << k for k in range(1, n_spins, 2))


def _haar_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def lowest_eigenpairs(h, n_spins: int, rng: np.random.Generator | None = None):
    """Ground cluster and first excited cluster of a sub-Hamiltonian.

    Returns (e0, ground_vectors, e1, excited_vectors) where the vector
    arrays hold one orthonormal eigenvector per column and clusters are
    grouped with relative tolerance 1e-8. Dense below 2^9, Lanczos above.
    """
    op = h if isinstance(h, CompiledHamiltonian) else CompiledHamiltonian(h, n_spins)
    dim = op.dim

    def split(energies, vectors):
        e0 = energies[0]
        tol = DEGENERACY_RTOL * max(1.0, abs(e0))
        g = energies <= e0 + tol
        if g.all():
            return float(e0), vectors[:, g], None, None
        e1 = energies[~g][0]
        x = ~g & (energies <= e1 + DEGENERACY_RTOL * max(1.0, abs(e1)))
        return float(e0), vectors[:, g], float(e1), vectors[:, x]

    if dim <= 512:
        energies, vectors = np.linalg.eigh(dense_hamiltonian(op.terms, op.n_total))
        return split(energies, vectors)

    from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

    lin = LinearOperator((dim, dim), matvec=lambda v: op.apply(np.asarray(v).ravel()), dtype=complex)
    v0 = (rng or np.random.default_rng(0)).standard_normal(dim)
    k = min(16, dim - 2)
    while True:
        try:
            energies, vectors = eigsh(lin, k=k, which="SA", v0=v0)
        except ArpackNoConvergence as exc:
            raise GroundStateError("Lanczos did not converge", iterations=k) from exc
        order = np.argsort(energies)
        energies, vectors = energies[order], vectors[:, order]
        e0, gv, e1, xv = split(energies, vectors)
        # cluster may be truncated if it reaches the end of the window
        if gv.shape[1] < k and (e1 is None or gv.shape[1] + (xv.shape[1] if xv is not None else 0) < k):
            return e0, gv, e1, xv
        if k >= dim - 2:
            return e0, gv, e1, xv
        k = min(2 * k, dim - 2)


def _combine(vectors: np.ndarray, rng: np.random.Generator | None) -> np.ndarray:
    if vectors.shape[1] == 1:
        v = vectors[:, 0]
        pivot = int(np.argmax(np.abs(v)))
        return v * (abs(v[pivot]) / v[pivot])
    if rng is None:
        raise ConfigError("degenerate ground state needs an rng for the random combination")
    w = rng.standard_normal(vectors.shape[1]) + 1j * rng.standard_normal(vectors.shape[1])
    v = vectors @ w
    return v / np.linalg.norm(v)


def make_state(
    label: StateLabel | str,
    n_spins: int,
    hamiltonian=None,
    rng: np.random.Generator | None = None,
    epsilon: float | None = None,
) -> np.ndarray:
    """Build one of the named states on an ``n_spins`` register.

    GROUND/NEAR_GROUND need the register's own Hamiltonian (a spec or
    compiled operator); RR/RANDOM and degenerate ground states consume rng.
    """
    label = StateLabel(label)
    dim = 1 << n_spins
    if label is StateLabel.UU:
        psi = np.zeros(dim, dtype=complex)
        psi[0] = 1.0
    elif label is StateLabel.UD:
        psi = np.zeros(dim, dtype=complex)
        psi[_ud_index(n_spins)] = 1.0
    elif label is StateLabel.NEAR_UD:
        eps = NEAR_UD_EPSILON if epsilon is None else epsilon
        if not 0.0 < eps < 0.5:
            raise ConfigError(f"NEAR_UD epsilon must be in (0, 0.5), got {eps}")
        # rotate spin 0 about y so <Sz_0 Sz_1> = -1/4 + eps
        theta = np.arccos(1.0 - 4.0 * eps)
        base = _ud_index(n_spins)
        psi = np.zeros(dim, dtype=complex)
        psi[base] = np.cos(theta / 2.0)
        psi[base ^ 1] = np.sin(theta / 2.0)
    elif label is StateLabel.RR:
        if rng is None:
            raise ConfigError("RR needs an rng")
        sites = [_haar_vector(2, rng) for _ in range(n_spins)]
        psi = reduce(lambda acc, site: np.kron(site, acc), sites, np.ones(1, dtype=complex))
    elif label is StateLabel.RANDOM:
        if rng is None:
            raise ConfigError("RANDOM needs an rng")
        psi = _haar_vector(dim, rng)
    elif label in (StateLabel.GROUND, StateLabel.NEAR_GROUND):
        if hamiltonian is None:
            raise ConfigError(f"{label.value} needs the register Hamiltonian")
        op = (
            hamiltonian
            if isinstance(hamiltonian, CompiledHamiltonian)
            else CompiledHamiltonian(hamiltonian, n_spins)
        )
        if op.dim != dim:
            raise ConfigError(f"Hamiltonian dim {op.dim} does not match register dim {dim}")
        e0, ground, e1, excited = lowest_eigenpairs(op, n_spins, rng)
        psi = _combine(ground, rng)
        if label is StateLabel.NEAR_GROUND:
            eps = NEAR_GROUND_EPSILON if epsilon is None else epsilon
            if not 0.0 < eps < 1.0:
                raise ConfigError(f"NEAR_GROUND epsilon must be in (0, 1), got {eps}")
            if excited is None:
                raise GroundStateError("no excited state available for NEAR_GROUND")
            psi = np.sqrt(1.0 - eps) * psi + np.sqrt(eps) * _combine(excited, rng)
            psi /= np.linalg.norm(psi)
        else:
            residual = np.linalg.norm(op.apply(psi) - e0 * psi)
            if residual > GROUND_RESIDUAL_TOL:
                raise GroundStateError(
                    f"ground-state residual {residual:g} above {GROUND_RESIDUAL_TOL:g}",
                    residual=residual,
                )
    else:  # pragma: no cover
        raise ConfigError(f"unknown state label {label}")
    check_normalized(psi, tol=1e-12)
    return psi


def product_state(sys_state: np.ndarray, env_state: np.ndarray) -> np.ndarray:
    """Tensor product with the system on the low bits: c(i,p) = c_S(i) c_E(p)."""
    check_normalized(sys_state, tol=1e-10)
    check_normalized(env_state, tol=1e-10)
    return np.kron(env_state, sys_state)
