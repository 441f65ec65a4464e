"""Real-amplitude linear algebra for the exact quantum simulations.

States are 1-D float arrays, operators square 2-D float arrays.  Everything
the constructions need is real (phases are +-1, Hadamards are real, Gram
matrices are real symmetric), so complex amplitudes are not supported.

Eigendecompositions use cyclic Jacobi rotations.  The matrices involved are
at most a few dozen rows, so this simple, unconditionally convergent method
is plenty.
"""

from __future__ import annotations

import json
import math
from typing import Mapping, Sequence

import numpy as np

from .errors import LengthMismatch, NotAPOVM, NotOrthonormal, NotPSD, NotSymmetric, PirError

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
CLAMP_TOL = 1e-9
NOT_PSD_TOL = 1e-6


def check_symmetric(M, tol: float = 1e-12) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if np.abs(M - M.T).max(initial=0.0) > tol * scale:
        raise NotSymmetric("matrix is not symmetric")
    return M


def jacobi_eigh(M, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigenvalues ``w`` and orthogonal ``Q`` with ``M = Q diag(w) Q^T``.

    Sweeps rotate every off-diagonal pair in row order until the Frobenius
    norm of the off-diagonal part is at most ``tol * max(1, ||M||_F)``.
    """
    A = np.array(check_symmetric(M), dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(A)))
    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * float(np.sum(np.triu(A, 1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                colp = A[:, p].copy()
                colq = A[:, q]
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp = A[p, :].copy()
                rowq = A[q, :]
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise PirError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return np.diag(A).copy(), V


def psd_factor(M) -> np.ndarray:
    """A matrix ``A`` with ``A^T A = M`` for positive semidefinite ``M``.

    Uses ``A = sqrt(diag(w)) Q^T``.  Eigenvalues in ``[-1e-9, 0)`` are round-off
    and clamped to zero; anything below ``-1e-6`` is rejected.
    """
    w, Q = jacobi_eigh(M)
    if w.size and w.min() < -NOT_PSD_TOL:
        raise NotPSD(f"smallest eigenvalue {w.min():.3e} is negative")
    w = np.where(w < 0, 0.0, w)
    return np.sqrt(w)[:, None] * Q.T


def is_unitary(U, tol: float = 1e-9) -> bool:
    U = np.asarray(U, dtype=float)
    return U.ndim == 2 and U.shape[0] == U.shape[1] and unitarity_error(U) <= tol


def unitarity_error(U) -> float:
    U = np.asarray(U, dtype=float)
    return float(np.abs(U.T @ U - np.eye(U.shape[1])).max(initial=0.0))


def complete_to_unitary(columns: Mapping[int, Sequence[float]], dim: int) -> np.ndarray:
    """Extend orthonormal columns, pinned at given positions, to a ``dim``-square unitary.

    The given columns are copied verbatim.  The free positions are filled, in
    increasing order, by Gram-Schmidt over ``e_0, e_1, ...`` (two passes per
    candidate), skipping candidates with residual norm below 1e-8.
    """
    if any(not 0 <= pos < dim for pos in columns):
        raise PirError(f"column positions must lie in [0, {dim})")
    given = {pos: np.asarray(v, dtype=float) for pos, v in columns.items()}
    for pos, v in given.items():
        if v.shape != (dim,):
            raise LengthMismatch(f"column {pos} has shape {v.shape}, expected ({dim},)")
    B = np.array([given[p] for p in sorted(given)]).reshape(len(given), dim).T
    if B.shape[1]:
        err = np.abs(B.T @ B - np.eye(B.shape[1])).max()
        if err > 1e-8:
            raise NotOrthonormal(f"given columns deviate from orthonormal by {err:.3e}")
    basis = [B[:, k] for k in range(B.shape[1])]
    extra = []
    for k in range(dim):
        if len(basis) == dim:
            break
        v = np.zeros(dim)
        v[k] = 1.0
        for _ in range(2):
            for u in basis:
                v -= (u @ v) * u
        norm = np.linalg.norm(v)
        if norm < 1e-8:
            continue
        v /= norm
        basis.append(v)
        extra.append(v)
    U = np.zeros((dim, dim))
    for pos, v in given.items():
        U[:, pos] = v
    free = [p for p in range(dim) if p not in given]
    for pos, v in zip(free, extra):
        U[:, pos] = v
    return U


def trace_norm(M) -> float:
    """Sum of singular values of a symmetric matrix, i.e. ``sum |eigenvalues|``."""
    w, _ = jacobi_eigh(M)
    return float(np.abs(w).sum())


def measure_probability(state, projector) -> float:
    """``<psi|P|psi>`` for a projector ``P``."""
    psi = np.asarray(state, dtype=float)
    P = np.asarray(projector, dtype=float)
    if P.ndim != 2 or P.shape != (psi.size, psi.size):
        raise LengthMismatch(f"state of dimension {psi.size} vs projector of shape {P.shape}")
    check_symmetric(P, 1e-9)
    if np.abs(P @ P - P).max(initial=0.0) > 1e-9:
        raise PirError("operator is not idempotent")
    return float(min(1.0, max(0.0, psi @ P @ psi)))


def is_psd(M, tol: float = CLAMP_TOL) -> bool:
    w, _ = jacobi_eigh(M)
    return bool(w.size == 0 or w.min() >= -tol)


def is_density(rho, tol: float = 1e-9) -> bool:
    rho = check_symmetric(rho, tol)
    return is_psd(rho, tol) and abs(np.trace(rho) - 1.0) <= tol


def povm_outcome_probs(rho, elements: Sequence) -> np.ndarray:
    """``tr(rho E_k)`` for every element of a POVM."""
    rho = check_symmetric(rho, 1e-9)
    d = rho.shape[0]
    total = np.zeros((d, d))
    for E in elements:
        E = np.asarray(E, dtype=float)
        if E.shape != (d, d):
            raise NotAPOVM(f"element of shape {E.shape} for a state of dimension {d}")
        try:
            check_symmetric(E, 1e-9)
        except NotSymmetric:
            raise NotAPOVM("POVM element is not symmetric") from None
        if not is_psd(E):
            raise NotAPOVM("POVM element is not positive semidefinite")
        total += E
    if np.abs(total - np.eye(d)).max(initial=0.0) > 1e-8:
        raise NotAPOVM("POVM elements do not sum to the identity")
    return np.array([float(np.sum(rho * np.asarray(E, dtype=float))) for E in elements])


def helstrom_povm(rho0, rho1) -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto the non-negative and negative eigenspaces of ``rho0 - rho1``.

    With equal priors, guessing 0 on ``E0`` succeeds with probability
    ``1/2 + ||rho0 - rho1||_tr / 4``, the best any measurement can do.
    """
    w, Q = jacobi_eigh(np.asarray(rho0, dtype=float) - np.asarray(rho1, dtype=float))
    pos = Q[:, w >= 0]
    E0 = pos @ pos.T
    return E0, np.eye(len(w)) - E0


# --------------------------------------------------------------------------
# phase basis


def phase_query_state(y, T) -> int:
    """The phase ``(-1)^(T.y)`` a query to an entry ``y`` imprints on ``|z_T>``."""
    y = np.asarray(y, dtype=np.uint8)
    T = np.asarray(T, dtype=np.uint8)
    if y.shape != T.shape:
        raise LengthMismatch(f"entry of length {y.size} vs subset mask of length {T.size}")
    return -1 if int(np.bitwise_and(y, T).sum()) & 1 else 1


def subset_index(T) -> int:
    """Register index of the subset mask ``T``: element ``k`` (0-based) is bit ``k``."""
    return int(sum(1 << k for k, v in enumerate(np.asarray(T).ravel()) if v))


def subset_from_index(index: int, ell: int) -> np.ndarray:
    return ((index >> np.arange(ell)) & 1).astype(np.uint8)


def popcount(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64)
    count = np.zeros_like(v)
    while np.any(v):
        count += v & 1
        v = v >> 1
    return count


def phase_basis_state(T_index: int, ell: int) -> np.ndarray:
    """``|z_T>`` written out in the ``2^ell`` computational basis, qubit 1 first."""
    T = subset_from_index(T_index, ell)
    vec = np.ones(1)
    for bit in T:
        vec = np.kron(vec, np.array([1.0, -1.0 if bit else 1.0]) / math.sqrt(2))
    return vec


def walsh_hadamard(b: int) -> np.ndarray:
    """``H^(x)b`` with entries ``(-1)^popcount(r & c) / sqrt(2^b)``."""
    idx = np.arange(1 << b)
    signs = 1 - 2 * (popcount(idx[:, None] & idx[None, :]) & 1)
    return signs / math.sqrt(1 << b)


# --------------------------------------------------------------------------
# serialization


def to_json(M) -> str:
    """``{"dim": d, "entries": [...]}``, row-major, 17 significant digits."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 2 and M.shape[0] != M.shape[1]:
        raise PirError("only square operators serialize")
    if M.ndim not in (1, 2):
        raise PirError("expected a state vector or a square operator")
    body = ", ".join(format(float(v), ".17g") for v in M.ravel())
    return f'{{"dim": {M.shape[0]}, "entries": [{body}]}}'


def from_json(text: str) -> np.ndarray:
    obj = json.loads(text)
    d = int(obj["dim"])
    entries = np.asarray(obj["entries"], dtype=float)
    if entries.size == d:
        return entries
    if entries.size == d * d:
        return entries.reshape(d, d)
    raise PirError(f"{entries.size} entries do not fit dimension {d}")
