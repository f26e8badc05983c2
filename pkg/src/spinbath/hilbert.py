"""Matrix-free action of coupling tables on full state vectors.

Basis convention (fixed package-wide): spin k is bit k of the basis index,
bit value 0 means spin-up (S^z = +1/2), bit 1 spin-down. System spins sit
on bits 0..n_system-1, environment spins above them. A state vector is a
bare complex128 numpy array of length 2**n_total.

The kernel never materializes H. Per bond (i, j) the xy part splits into
two channels acting through the bit-flip permutation k -> k ^ (2^i | 2^j):

  flip-flop   (anti-aligned bits):  amplitude -(c_x + c_y)/4
  double-flip (aligned bits):       amplitude -(c_x - c_y)/4

so anisotropic families are exact; all z terms collapse into one diagonal.
Every amplitude out[k] is written by exactly one thread and the bond order
is fixed, so results are bitwise reproducible at any thread count.
"""

from __future__ import annotations

from typing import Iterable

import numba
import numpy as np
from numba import njit, prange

from .errors import BudgetError, DimensionMismatch, NumericalError
from .model import Coupling, HamiltonianSpec

# avoid probing TBB/OMP layers; workqueue is fork-safe for the batch runner
numba.config.THREADING_LAYER = "workqueue"

DENSE_BUDGET_SPINS = 12

SX = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex)
SY = np.array([[0.0, -0.5j], [0.5j, 0.0]], dtype=complex)
SZ = np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex)
SPIN_OPS = {"x": SX, "y": SY, "z": SZ}


@njit(cache=True, parallel=True)
def _apply_kernel(diag, ii, jj, aff, adf, psi, out):
    dim = psi.size
    for k in prange(dim):
        out[k] = diag[k] * psi[k]
    for b in range(ii.size):
        i = ii[b]
        j = jj[b]
        m = (np.int64(1) << i) | (np.int64(1) << j)
        ff = aff[b]
        df = adf[b]
        if df == 0.0:
            for k in prange(dim):
                if ((k >> i) ^ (k >> j)) & 1 == 1:
                    out[k] += ff * psi[k ^ m]
        elif ff == 0.0:
            for k in prange(dim):
                if ((k >> i) ^ (k >> j)) & 1 == 0:
                    out[k] += df * psi[k ^ m]
        else:
            for k in prange(dim):
                if ((k >> i) ^ (k >> j)) & 1 == 1:
                    out[k] += ff * psi[k ^ m]
                else:
                    out[k] += df * psi[k ^ m]


def _as_terms(h, n_total):
    if isinstance(h, HamiltonianSpec):
        return h.all_terms, h.n_total
    terms = tuple(Coupling(*t) for t in h)
    if n_total is None:
        raise DimensionMismatch("n_total required when passing bare terms")
    return terms, n_total


class CompiledHamiltonian:
    """Coupling table compiled to a diagonal plus flip channels.

    Accumulation order is the term-list order (z terms first into the
    diagonal, then bonds by first appearance), fixed for reproducibility.
    """

    def __init__(self, h, n_total: int | None = None):
        terms, n = _as_terms(h, n_total)
        self.terms = terms
        self.n_total = n
        self.dim = 1 << n
        self.gershgorin_sum = sum(abs(t.c) for t in terms) / 4.0

        idx = np.arange(self.dim, dtype=np.int64)
        diag = np.zeros(self.dim, dtype=np.float64)
        bonds: dict[tuple[int, int], list[float]] = {}
        for t in terms:
            if t.alpha == "z":
                par = ((idx >> t.i) ^ (idx >> t.j)) & 1
                diag -= (t.c / 4.0) * (1.0 - 2.0 * par)
            else:
                cxy = bonds.setdefault((t.i, t.j), [0.0, 0.0])
                cxy[0 if t.alpha == "x" else 1] += t.c

        ii, jj, aff, adf = [], [], [], []
        for (i, j), (cx, cy) in bonds.items():
            ff = -(cx + cy) / 4.0
            df = -(cx - cy) / 4.0
            if ff != 0.0 or df != 0.0:
                ii.append(i)
                jj.append(j)
                aff.append(ff)
                adf.append(df)
        self._diag = diag
        self._ii = np.array(ii, dtype=np.int64)
        self._jj = np.array(jj, dtype=np.int64)
        self._aff = np.array(aff, dtype=np.float64)
        self._adf = np.array(adf, dtype=np.float64)

    @property
    def diagonal(self) -> np.ndarray:
        return self._diag

    def apply(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Return H @ psi without building H."""
        if psi.shape != (self.dim,):
            raise DimensionMismatch(f"state has shape {psi.shape}, operator dim {self.dim}")
        psi = np.ascontiguousarray(psi, dtype=np.complex128)
        if out is None:
            out = np.empty(self.dim, dtype=np.complex128)
        _apply_kernel(self._diag, self._ii, self._jj, self._aff, self._adf, psi, out)
        return out

    def expectation(self, psi: np.ndarray) -> float:
        """<psi|H|psi> for normalized psi; asserts the value is real."""
        val = np.vdot(psi, self.apply(psi))
        scale = max(1.0, self.gershgorin_sum)
        if abs(val.imag) > 1e-10 * scale:
            raise NumericalError(f"expectation has imaginary part {val.imag:g}")
        return float(val.real)


def apply_hamiltonian(h, psi: np.ndarray, n_total: int | None = None) -> np.ndarray:
    """One-shot H @ psi; compile a CompiledHamiltonian for repeated use."""
    return CompiledHamiltonian(h, n_total).apply(psi)


def expectation(h, psi: np.ndarray, n_total: int | None = None) -> float:
    """One-shot <psi|H|psi> for a spec, term list, or compiled operator."""
    op = h if isinstance(h, CompiledHamiltonian) else CompiledHamiltonian(h, n_total)
    return op.expectation(psi)


def site_operator(op2: np.ndarray, site: int, n_total: int) -> np.ndarray:
    """Dense one-site operator acting on bit ``site`` of an n-spin register."""
    lo = np.eye(1 << site)
    hi = np.eye(1 << (n_total - 1 - site))
    return np.kron(hi, np.kron(op2, lo))


def dense_hamiltonian(h, n_total: int | None = None) -> np.ndarray:
    """Dense H built from explicit Kronecker products (test oracle path)."""
    terms, n = _as_terms(h, n_total)
    if n > DENSE_BUDGET_SPINS:
        raise BudgetError(f"dense build limited to {DENSE_BUDGET_SPINS} spins, got {n}")
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    for t in terms:
        op = SPIN_OPS[t.alpha]
        out -= t.c * (site_operator(op, t.i, n) @ site_operator(op, t.j, n))
    return out


def check_normalized(psi: np.ndarray, tol: float = 1e-10) -> None:
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > tol:
        raise NumericalError(f"state norm {nrm!r} deviates from 1 beyond {tol:g}")


def partial_trace_env(psi: np.ndarray, n_system: int) -> np.ndarray:
    """Reduced density matrix of the system register, rho[a,b] = sum_p c(a,p) c*(b,p).

    psi must be normalized on 2**n_total amplitudes with n_system <= n_total;
    the result is Hermitian, PSD, trace 1, in the up/down (bit) basis.
    """
    dim = psi.size
    n_total = dim.bit_length() - 1
    if 1 << n_total != dim:
        raise DimensionMismatch(f"state length {dim} is not a power of two")
    if not 0 <= n_system <= n_total:
        raise DimensionMismatch(f"n_system={n_system} out of range for {n_total} spins")
    check_normalized(psi)
    c = psi.reshape(1 << (n_total - n_system), 1 << n_system)
    rho = c.T @ c.conj()
    return 0.5 * (rho + rho.conj().T)
