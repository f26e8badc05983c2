"""Diagnostics of the reduced density matrix.

Everything here works on the 2^n_S x 2^n_S reduced density matrix. The
decoherence and thermalization measures are evaluated in the eigenbasis
of the system Hamiltonian:

  sigma  sqrt(sum_{i<j} |rho_ij|^2), global off-diagonal weight
  gamma  sqrt(sum over same-energy pairs of |rho_ii - rho_jj|^2)
  b      mean over pairs with E_i != E_j of [ln rho_jj - ln rho_ii]/(E_j - E_i)
  delta  Euclidean distance of the diagonal from exp(-b E_i)/Z

Degenerate eigenvectors are only defined up to a unitary within their
cluster, so before taking diagonals the density matrix is canonicalized:
each degenerate block is diagonalized and its weights sorted descending.
That makes sigma, gamma, b, delta invariant under any within-cluster
rotation (and leaves non-degenerate spectra untouched).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BudgetError, DimensionMismatch, NumericalError
from .hilbert import SPIN_OPS, dense_hamiltonian, site_operator
from .model import HamiltonianSpec

EIGEN_BUDGET_SPINS = 8
DEGENERACY_RTOL = 1e-9
BETA_FLOOR = 1e-12

#: permutation from the bit basis (spin k = bit k) to the conventional
#: two-spin ordering up-up, up-down, down-up, down-down
TWO_SPIN_STANDARD_ORDER = (0, 2, 1, 3)


@dataclass(frozen=True)
class EigenBasis:
    """Eigenvalues/vectors of H_S with degenerate clusters grouped."""

    energies: np.ndarray
    vectors: np.ndarray
    clusters: tuple[tuple[int, ...], ...]
    tol: float

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def cluster_ids(self) -> np.ndarray:
        ids = np.empty(self.dim, dtype=int)
        for cid, members in enumerate(self.clusters):
            ids[list(members)] = cid
        return ids

    def distinct_energies(self) -> list[float]:
        return [float(self.energies[c[0]]) for c in self.clusters]


def eigendecompose_system(h, degeneracy_rtol: float = DEGENERACY_RTOL, n_spins: int | None = None) -> EigenBasis:
    """Dense eigendecomposition of H_S with a deterministic phase convention.

    Accepts a full HamiltonianSpec (its system part is used), a system-only
    spec, or a bare term list plus ``n_spins``. Budgeted to 8 system spins.
    """
    if isinstance(h, HamiltonianSpec):
        if h.n_env > 0:
            h = h.system_part()
        n_spins = h.n_system
        terms = h.sys_terms
    else:
        terms = tuple(h)
        if n_spins is None:
            raise DimensionMismatch("n_spins required for bare term lists")
    if n_spins > EIGEN_BUDGET_SPINS:
        raise BudgetError(f"system eigenbasis limited to {EIGEN_BUDGET_SPINS} spins, got {n_spins}")

    energies, vectors = np.linalg.eigh(dense_hamiltonian(terms, n_spins))
    vectors = vectors.copy()
    for k in range(vectors.shape[1]):
        pivot = int(np.argmax(np.abs(vectors[:, k])))
        ref = vectors[pivot, k]
        vectors[:, k] *= abs(ref) / ref

    tol = degeneracy_rtol * float(np.max(np.abs(energies))) if energies.size else 0.0
    clusters: list[tuple[int, ...]] = []
    current = [0]
    for k in range(1, len(energies)):
        if energies[k] - energies[k - 1] > tol:
            clusters.append(tuple(current))
            current = []
        current.append(k)
    clusters.append(tuple(current))
    return EigenBasis(energies=energies, vectors=vectors, clusters=tuple(clusters), tol=tol)


def to_energy_basis(rho: np.ndarray, basis: EigenBasis) -> np.ndarray:
    """Rotate rho from the up/down basis into the H_S eigenbasis."""
    if rho.shape != (basis.dim, basis.dim):
        raise DimensionMismatch(f"rho shape {rho.shape} does not match basis dim {basis.dim}")
    v = basis.vectors
    return v.conj().T @ rho @ v


def canonicalize_clusters(rho_energy: np.ndarray, basis: EigenBasis) -> np.ndarray:
    """Diagonalize each degenerate block of rho; weights sorted descending.

    The result is what every diagonal-based metric is evaluated on, making
    them independent of the arbitrary eigenvector choice inside clusters.
    """
    out = rho_energy.copy()
    for members in basis.clusters:
        if len(members) < 2:
            continue
        sel = np.asarray(members)
        block = out[np.ix_(sel, sel)]
        w, u = np.linalg.eigh(0.5 * (block + block.conj().T))
        u = u[:, ::-1]  # descending weights
        out[:, sel] = out[:, sel] @ u
        out[sel, :] = u.conj().T @ out[sel, :]
    return out


def sigma(rho: np.ndarray, basis: EigenBasis | None = None) -> float:
    """Off-diagonal weight sqrt(sum_{i<j} |rho_ij|^2) in the energy basis.

    Pass ``basis`` to canonicalize degenerate clusters first (required for
    the value to be well defined when H_S has degeneracies).
    """
    if basis is not None:
        rho = canonicalize_clusters(rho, basis)
    total = np.vdot(rho, rho).real
    diag = float(np.sum(np.abs(np.diagonal(rho)) ** 2))
    return float(np.sqrt(max(0.0, (total - diag) / 2.0)))


def _gamma_from_diag(d: np.ndarray, basis: EigenBasis) -> float:
    acc = 0.0
    for members in basis.clusters:
        w = d[list(members)]
        for a in range(len(w) - 1):
            acc += float(np.sum((w[a] - w[a + 1 :]) ** 2))
    return float(np.sqrt(acc))


def gamma(rho_energy: np.ndarray, basis: EigenBasis) -> float:
    """Weight imbalance within degenerate clusters."""
    return _gamma_from_diag(canonical_diagonal(rho_energy, basis), basis)


def canonical_diagonal(rho_energy: np.ndarray, basis: EigenBasis) -> np.ndarray:
    """Real diagonal weights after cluster canonicalization."""
    return _diag_checked(canonicalize_clusters(rho_energy, basis))


def _diag_checked(rho_c: np.ndarray) -> np.ndarray:
    d = np.real(np.diagonal(rho_c)).copy()
    s = float(d.sum())
    if abs(s - 1.0) > 1e-10:
        raise NumericalError(f"diagonal weights sum to {s!r}, not 1")
    return d


def _beta_from_diag(d: np.ndarray, basis: EigenBasis, floor: float) -> float | None:
    e = basis.energies
    cid = basis.cluster_ids
    valid = d > floor
    logd = np.log(np.where(valid, d, 1.0))
    i, j = np.triu_indices(len(d), 1)
    mask = (cid[i] != cid[j]) & valid[i] & valid[j]
    if not mask.any():
        return None
    slopes = (logd[j[mask]] - logd[i[mask]]) / (e[j[mask]] - e[i[mask]])
    return float(np.mean(slopes))


def effective_beta(
    rho_energy: np.ndarray, basis: EigenBasis, floor: float = BETA_FLOOR
) -> float | None:
    """Pairwise log-slope estimate b of the inverse temperature.

    Averages [ln rho_jj - ln rho_ii]/(E_j - E_i) over pairs from different
    energy clusters whose diagonals both exceed ``floor`` (zero-weight
    eigenstates stay zero forever and would give infinite logs). Returns
    None when no admissible pair exists.
    """
    return _beta_from_diag(canonical_diagonal(rho_energy, basis), basis, floor)


def boltzmann_diagonal(energies: np.ndarray, b: float) -> np.ndarray:
    w = np.exp(-b * (energies - np.min(energies)))
    return w / w.sum()


def delta(rho_energy: np.ndarray, basis: EigenBasis, b: float | None) -> float | None:
    """Euclidean distance of the diagonal from the canonical form at b."""
    if b is None:
        return None
    d = canonical_diagonal(rho_energy, basis)
    return _delta_from_diag(d, basis, b)


def _delta_from_diag(d: np.ndarray, basis: EigenBasis, b: float | None) -> float | None:
    if b is None:
        return None
    return float(np.linalg.norm(d - boltzmann_diagonal(basis.energies, b)))


def quadratic_entropy(rho: np.ndarray) -> float:
    """1 - Tr rho^2 (basis independent)."""
    val = 1.0 - np.vdot(rho, rho).real
    if val < -1e-10:
        raise NumericalError(f"purity above one: 1 - Tr rho^2 = {val:g}")
    return max(0.0, float(val))


def loschmidt_echo(rho: np.ndarray, rho_ref: np.ndarray) -> float:
    """Tr(rho rho_ref) against the uncoupled (H_SE = 0) reference."""
    if rho.shape != rho_ref.shape:
        raise DimensionMismatch(f"shape mismatch {rho.shape} vs {rho_ref.shape}")
    val = complex(np.einsum("ij,ji->", rho, rho_ref))
    if abs(val.imag) > 1e-10:
        raise NumericalError(f"echo has imaginary part {val.imag:g}")
    return float(val.real)


def to_standard_two_spin_order(rho_bit: np.ndarray) -> np.ndarray:
    """Reorder a two-spin rho from the bit basis to up-up, up-down, down-up, down-down."""
    if rho_bit.shape != (4, 4):
        raise DimensionMismatch("two-spin rho must be 4x4")
    perm = list(TWO_SPIN_STANDARD_ORDER)
    return rho_bit[np.ix_(perm, perm)]


def concurrence(rho_std: np.ndarray) -> float:
    """Two-spin concurrence max(0, l1 - l2 - l3 - l4).

    ``rho_std`` must use the standard up-up, up-down, down-up, down-down
    ordering (see to_standard_two_spin_order). The l_k are the square roots
    of the eigenvalues of rho @ rho~ with rho~ the spin-flipped conjugate,
    sorted descending; round-off negatives are clamped at zero.
    """
    if rho_std.shape != (4, 4):
        raise DimensionMismatch("concurrence needs a 4x4 density matrix")
    herm = np.linalg.norm(rho_std - rho_std.conj().T)
    if herm > 1e-8:
        raise NumericalError(f"density matrix not Hermitian: |rho - rho^+| = {herm:g}")
    if np.linalg.eigvalsh(rho_std).min() < -1e-8:
        raise NumericalError("density matrix is not PSD")
    yy = np.zeros((4, 4), dtype=complex)
    yy[0, 3] = yy[3, 0] = -1.0
    yy[1, 2] = yy[2, 1] = 1.0
    rho_tilde = yy @ rho_std.conj() @ yy
    lam = np.sqrt(np.clip(np.linalg.eigvals(rho_std @ rho_tilde).real, 0.0, None))
    lam[::-1].sort()
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


@lru_cache(maxsize=64)
def _site_matrix(axis: str, site: int, n_spins: int):
    m = site_operator(SPIN_OPS[axis], site, n_spins)
    m.setflags(write=False)
    return m


def _expect(rho: np.ndarray, op: np.ndarray) -> float:
    val = complex(np.einsum("ij,ji->", rho, op))
    if abs(val.imag) > 1e-10:
        raise NumericalError(f"observable has imaginary part {val.imag:g}")
    return float(val.real)


def pair_correlators(rho: np.ndarray, i: int = 0, j: int = 1) -> dict[str, float]:
    """<S_i . S_j>, <Sz_i Sz_j>, <Sx_i Sx_j> from rho in the up/down basis."""
    n = rho.shape[0].bit_length() - 1
    parts = {}
    total = 0.0
    for axis in ("x", "y", "z"):
        op = _site_matrix(axis, i, n) @ _site_matrix(axis, j, n)
        val = _expect(rho, op)
        parts[axis] = val
        total += val
    return {"SS": total, "SzSz": parts["z"], "SxSx": parts["x"]}


def site_expectation(rho: np.ndarray, site: int, axis: str) -> float:
    n = rho.shape[0].bit_length() - 1
    return _expect(rho, _site_matrix(axis, site, n))


def total_magnetization(rho: np.ndarray) -> float:
    """M = sum_k <Sz_k>."""
    n = rho.shape[0].bit_length() - 1
    return sum(site_expectation(rho, k, "z") for k in range(n))


def system_energy(rho: np.ndarray, h, n_spins: int | None = None) -> float:
    """Tr(rho H_S) with rho in the up/down basis."""
    if isinstance(h, HamiltonianSpec):
        h_dense = dense_hamiltonian(h.system_part())
    else:
        h_dense = dense_hamiltonian(h, n_spins)
    return _expect(rho, h_dense)


def singlet_triplet_matrix() -> np.ndarray:
    """Columns T_+1, S, T_0, T_-1 expressed on the two-spin bit basis."""
    v = np.zeros((4, 4), dtype=complex)
    up_down, down_up = 2, 1  # bit-basis indices of the antiparallel states
    v[0, 0] = 1.0
    v[up_down, 1] = 1.0 / np.sqrt(2.0)
    v[down_up, 1] = -1.0 / np.sqrt(2.0)
    v[up_down, 2] = 1.0 / np.sqrt(2.0)
    v[down_up, 2] = 1.0 / np.sqrt(2.0)
    v[3, 3] = 1.0
    return v


def singlet_triplet_rho(rho_bit: np.ndarray) -> np.ndarray:
    """Two-spin rho in the fixed (T_+1, S, T_0, T_-1) eigenbasis.

    The singlet/triplet-zero coherence (the "rho_23" element in that fixed
    ordering) is entry [1, 2].
    """
    v = singlet_triplet_matrix()
    return v.conj().T @ rho_bit @ v


@dataclass
class MetricSample:
    """One row of the per-step diagnostics."""

    t: float
    sigma: float | None = None
    gamma: float | None = None
    delta: float | None = None
    b: float | None = None
    S_quad: float | None = None
    echo: float | None = None
    E_S: float | None = None
    rho_diag: tuple[float, ...] | None = None
    extras: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("sigma", "gamma", "delta", "S_quad"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise NumericalError(f"{name} must be nonnegative, got {v}")
        if self.rho_diag is not None and abs(sum(self.rho_diag) - 1.0) > 1e-10:
            raise NumericalError(f"rho_diag sums to {sum(self.rho_diag)!r}")


#: metrics that need the H_SE = 0 reference trajectory
ECHO_METRIC = "echo"

TWO_SPIN_METRICS = ("C", "re_rho23", "abs_rho23")
PAIR_METRICS = ("SS", "SzSz", "SxSx")
BASE_METRICS = ("sigma", "gamma", "delta", "b", "S_quad", "echo", "E_S", "rho_diag")
EXTRA_METRICS = PAIR_METRICS + ("M", "Sz1") + TWO_SPIN_METRICS
ALL_METRICS = BASE_METRICS + EXTRA_METRICS


def compute_metrics(
    t: float,
    rho: np.ndarray,
    basis: EigenBasis,
    want,
    beta_floor: float = BETA_FLOOR,
    rho_ref: np.ndarray | None = None,
) -> MetricSample:
    """Evaluate the requested metric names on one reduced density matrix."""
    want = set(want)
    unknown = want - set(ALL_METRICS)
    if unknown:
        raise NumericalError(f"unknown metrics {sorted(unknown)}")
    rho_e = to_energy_basis(rho, basis)
    rho_c = canonicalize_clusters(rho_e, basis)
    d = _diag_checked(rho_c)
    sample = MetricSample(t=t)
    if "sigma" in want:
        sample.sigma = sigma(rho_c)
    if "gamma" in want:
        sample.gamma = _gamma_from_diag(d, basis)
    b = None
    if want & {"b", "delta"}:
        b = _beta_from_diag(d, basis, beta_floor)
    if "b" in want:
        sample.b = b
    if "delta" in want:
        sample.delta = _delta_from_diag(d, basis, b)
    if "S_quad" in want:
        sample.S_quad = quadratic_entropy(rho)
    if "echo" in want:
        if rho_ref is None:
            raise NumericalError("echo requested without a reference trajectory")
        sample.echo = loschmidt_echo(rho, rho_ref)
    if "E_S" in want:
        sample.E_S = float(np.dot(d, basis.energies))
    if "rho_diag" in want:
        sample.rho_diag = tuple(float(x) for x in d)
    if want & set(PAIR_METRICS):
        corr = pair_correlators(rho, 0, 1)
        for name in PAIR_METRICS:
            if name in want:
                sample.extras[name] = corr[name]
    if "M" in want:
        sample.extras["M"] = total_magnetization(rho)
    if "Sz1" in want:
        sample.extras["Sz1"] = site_expectation(rho, 0, "z")
    if want & set(TWO_SPIN_METRICS):
        if rho.shape != (4, 4):
            raise DimensionMismatch("two-spin metrics need n_system = 2")
        if "C" in want:
            sample.extras["C"] = concurrence(to_standard_two_spin_order(rho))
        if {"re_rho23", "abs_rho23"} & want:
            st = singlet_triplet_rho(rho)
            if "re_rho23" in want:
                sample.extras["re_rho23"] = float(st[1, 2].real)
            if "abs_rho23" in want:
                sample.extras["abs_rho23"] = float(abs(st[1, 2]))
    return sample
