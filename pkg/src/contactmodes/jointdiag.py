"""Joint diagonalisation of symmetric matrix sets by Givens-rotation
sweeps, with deviations, average-graph reconstruction, eigenvector
centrality, and a self-contained cyclic-Jacobi symmetric eigensolver.

The joint diagonaliser finds one orthogonal basis U that makes a whole
set of symmetric matrices H_1..H_M as diagonal as possible, minimising
the summed squared off-diagonal entries of the projections
C_i = U^T H_i U.  Each sweep visits every index pair (p, q) and applies
the closed-form Jacobi angle that is optimal for that pair across all
matrices simultaneously (the dominant eigenvector of the accumulated
2x2 matrix built from (C_i[p,p] - C_i[q,q], 2 C_i[p,q])).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConvergenceError
from .network import SymMatrix

# Rotations whose predicted off2 decrease falls below _GAIN_GUARD times the
# current total off2 are skipped: they cannot beat summation round-off, and
# skipping them keeps the recorded off2 history genuinely non-increasing.
_GAIN_GUARD = 1e-13


class OrthoBasis:
    """Orthogonal n x n basis; orthogonality is checked on construction."""

    __slots__ = ("_u",)

    def __init__(self, u, *, tol: float = 1e-10):
        u = np.array(u, dtype=float)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {u.shape}")
        err = float(np.abs(u.T @ u - np.eye(u.shape[0])).max())
        if err > tol:
            raise ValueError(f"basis is not orthogonal: max |U^T U - I| = {err:.3e}")
        u.setflags(write=False)
        self._u = u

    @property
    def n(self) -> int:
        return self._u.shape[0]

    @property
    def values(self) -> np.ndarray:
        return self._u

    def __array__(self, dtype=None):
        return np.asarray(self._u, dtype=dtype)

    def column(self, k: int) -> np.ndarray:
        return self._u[:, k]

    def __repr__(self) -> str:
        return f"OrthoBasis(n={self.n})"


@dataclass(frozen=True)
class JdResult:
    """Output of :func:`joint_diagonalise`.

    ``basis`` is the shared orthogonal basis, ``avg_diag`` the mean
    projected diagonal, ``deviations[i]`` the residual off2 of sample i in
    the shared basis, and ``off2_history`` the per-sweep total off2
    (entry 0 is the value before any sweep).
    """

    basis: OrthoBasis
    avg_diag: np.ndarray
    deviations: np.ndarray
    off2_history: np.ndarray
    converged: bool

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def n_samples(self) -> int:
        return len(self.deviations)

    def to_json_dict(self) -> dict:
        return {
            "basis": [[float(x) for x in row] for row in self.basis.values],
            "avg_diag": [float(x) for x in self.avg_diag],
            "deviations": [float(x) for x in self.deviations],
            "off2_history": [float(x) for x in self.off2_history],
            "converged": bool(self.converged),
        }

    def write_json(self, path: str | Path) -> None:
        with open(Path(path), "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "JdResult":
        with open(Path(path), "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(
            basis=OrthoBasis(np.array(raw["basis"])),
            avg_diag=np.array(raw["avg_diag"]),
            deviations=np.array(raw["deviations"]),
            off2_history=np.array(raw["off2_history"]),
            converged=bool(raw["converged"]),
        )


def off2(c) -> float:
    """Sum of squared off-diagonal entries."""
    a = np.asarray(c, dtype=float)
    a2 = a * a
    np.fill_diagonal(a2, 0.0)
    return float(a2.sum())


def project(h, basis: OrthoBasis) -> SymMatrix:
    """Project a symmetric matrix into the basis: C = U^T H U."""
    hv = np.asarray(h, dtype=float)
    u = basis.values
    if hv.shape != (u.shape[0], u.shape[0]):
        raise ValueError(f"dimension mismatch: matrix {hv.shape} vs basis n={u.shape[0]}")
    return SymMatrix.symmetrised(u.T @ hv @ u)


def _as_stack(matrices) -> np.ndarray:
    if hasattr(matrices, "matrices"):  # SampleBatch
        stack = matrices.matrices().astype(float)
    else:
        mats = [np.asarray(m, dtype=float) for m in matrices]
        if not mats:
            raise ValueError("need at least one matrix")
        stack = np.stack(mats)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ValueError(f"expected a stack of square matrices, got shape {stack.shape}")
    if not np.all(np.isfinite(stack)):
        raise ValueError("matrix entries must be finite")
    return stack


def _off2_by_matrix(stack: np.ndarray) -> np.ndarray:
    # zero the diagonals of a squared copy so the sum carries only
    # off-diagonal round-off, not cancellation against the diagonal mass
    s2 = stack * stack
    idx = np.arange(stack.shape[1])
    s2[:, idx, idx] = 0.0
    return s2.sum(axis=(1, 2))


def _pair_rounds(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Partition all index pairs into rounds of pairwise-disjoint pairs.

    Uses the circle method for round-robin scheduling: each of the n-1
    (or n, for odd n) rounds pairs every index at most once, and across
    a full cycle every unordered pair appears exactly once.  Rotations
    within a round touch disjoint rows and columns, so they commute and
    their off2 gains add exactly; applying them together is equivalent
    to any sequential order.
    """
    seats: list[int | None] = list(range(n))
    if n % 2 == 1:
        seats.append(None)
    m = len(seats)
    fixed, ring = seats[0], seats[1:]
    rounds = []
    for _ in range(m - 1):
        left = [fixed] + ring[: m // 2 - 1]
        right = ring[m // 2 - 1 :][::-1]
        pairs = sorted(
            (min(a, b), max(a, b))
            for a, b in zip(left, right)
            if a is not None and b is not None
        )
        rounds.append(
            (
                np.array([p for p, _ in pairs], dtype=np.intp),
                np.array([q for _, q in pairs], dtype=np.intp),
            )
        )
        ring = ring[-1:] + ring[:-1]
    return rounds


def joint_diagonalise(
    matrices,
    tol: float = 1e-9,
    max_sweeps: int = 100,
) -> JdResult:
    """Simultaneously diagonalise a set of symmetric matrices.

    Parameters
    ----------
    matrices : SampleBatch or sequence of SymMatrix / square arrays.
    tol : relative convergence tolerance; sweeps stop once a full sweep
        reduces the total off2 by less than ``tol`` times its initial
        value.
    max_sweeps : hard sweep limit; exceeding it returns ``converged=False``.

    Returns
    -------
    JdResult with columns of the basis ordered by decreasing average
    projected diagonal and signed so every column sums nonnegative.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    c = _as_stack(matrices).copy()
    m_count, n, _ = c.shape

    in_traces = np.einsum("mii->m", c).copy()
    in_fro2 = (c * c).sum(axis=(1, 2)).copy()

    initial = float(_off2_by_matrix(c).sum())
    history = [initial]
    converged = False
    u = np.eye(n)

    # Warm start in the eigenbasis of the mean matrix: for near-commuting
    # sets this basis is already close to the joint one, cutting the sweep
    # count sharply.  Adopted only when it does not raise the objective,
    # so the recorded history stays non-increasing from the input basis.
    try:
        _, seed_basis = eig_sym(c.mean(axis=0))
        warm_u = seed_basis.values.copy()
        warm_c = np.einsum("ki,mkl,lj->mij", warm_u, c, warm_u, optimize=True)
        warm_off = float(_off2_by_matrix(warm_c).sum())
        if warm_off <= initial:
            u, c = warm_u, warm_c
            history.append(warm_off)
    except ConvergenceError:
        pass

    rounds = _pair_rounds(n)
    diag_idx = np.arange(n)
    for _ in range(max_sweeps):
        rotations = 0
        guard = _GAIN_GUARD * max(history[-1], np.finfo(float).tiny)
        for pp, qq in rounds:
            diags = c[:, diag_idx, diag_idx]
            h0 = diags[:, pp] - diags[:, qq]
            h1 = c[:, pp, qq] + c[:, qq, pp]
            g00 = (h0 * h0).sum(axis=0)
            g01 = (h0 * h1).sum(axis=0)
            g11 = (h1 * h1).sum(axis=0)
            ton = g00 - g11
            toff = 2.0 * g01
            r = np.hypot(ton, toff)
            # off2 decreases by (r - ton) / 4 under the optimal angle
            active = (r - ton) / 4.0 > guard
            if not active.any():
                continue
            theta = 0.5 * np.arctan2(toff, ton + r)
            # degenerate branch point (equal diagonals): quarter turn
            theta[(toff == 0.0) & (ton + r <= 0.0)] = math.pi / 4.0
            theta[~active] = 0.0
            # a round pairs every index at most once, so the rotations act
            # as one permutation-style update: each row mixes with its
            # partner row, scaled by the pair's angle (p gets +sin, q -sin)
            partner = diag_idx.copy()
            partner[pp], partner[qq] = qq, pp
            cos_f = np.ones(n)
            sin_f = np.zeros(n)
            cos_f[pp] = cos_f[qq] = np.cos(theta)
            sin_f[pp] = np.sin(theta)
            sin_f[qq] = -np.sin(theta)

            c = cos_f[None, :, None] * c + sin_f[None, :, None] * c[:, partner, :]
            c = cos_f[None, None, :] * c + sin_f[None, None, :] * c[:, :, partner]
            u = cos_f[None, :] * u + sin_f[None, :] * u[:, partner]
            rotations += int(active.sum())
        if rotations == 0:
            converged = True
            break
        if float(np.abs(u.T @ u - np.eye(n)).max()) > 1e-10:
            raise ConvergenceError("basis lost orthogonality during sweeps")
        current = float(_off2_by_matrix(c).sum())
        history.append(current)
        if history[-2] - current < tol * initial:
            converged = True
            break

    # similarity sanity: orthogonal conjugation preserves traces and norms
    out_traces = np.einsum("mii->m", c)
    out_fro2 = (c * c).sum(axis=(1, 2))
    scale = 1.0 + np.abs(in_traces)
    if np.abs(out_traces - in_traces).max(initial=0.0) > 1e-8 * scale.max():
        raise ConvergenceError("trace drifted during joint diagonalisation")
    if np.abs(out_fro2 - in_fro2).max(initial=0.0) > 1e-8 * (1.0 + in_fro2.max()):
        raise ConvergenceError("Frobenius norm drifted during joint diagonalisation")

    diags = np.einsum("mii->mi", c)
    avg_diag = diags.mean(axis=0)
    order = np.argsort(-avg_diag, kind="stable")
    u = u[:, order]
    avg_diag = avg_diag[order]
    signs = np.where(u.sum(axis=0) < 0, -1.0, 1.0)
    u = u * signs

    deviations = _off2_by_matrix(c)

    return JdResult(
        basis=OrthoBasis(u),
        avg_diag=avg_diag,
        deviations=deviations,
        off2_history=np.array(history),
        converged=converged,
    )


def reconstruct_average(result: JdResult, force: bool = False) -> SymMatrix:
    """Average graph from the shared eigenstructure: U diag(avg) U^T.

    Entries are the sample-biased average weight of each link.  Refuses an
    unconverged result unless ``force`` is set.
    """
    if not result.converged and not force:
        raise ConvergenceError("joint diagonalisation did not converge; pass force=True to reconstruct anyway")
    u = result.basis.values
    return SymMatrix.symmetrised((u * result.avg_diag) @ u.T)


def eig_sym(m, max_sweeps: int = 60) -> tuple[np.ndarray, OrthoBasis]:
    """Full spectral decomposition of a symmetric matrix by cyclic Jacobi
    rotations.

    Returns eigenvalues sorted descending and the matching orthonormal
    eigenvector basis (one eigenvector per column).
    """
    a = np.array(np.asarray(m), dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a[0, :1].copy(), OrthoBasis(v)
    fro = math.sqrt(float((a * a).sum()))
    thresh = 1e-13 * max(fro, np.finfo(float).tiny)

    for _ in range(max_sweeps):
        rotations = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= thresh:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                cos_t = 1.0 / math.sqrt(1.0 + t * t)
                sin_t = t * cos_t
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = cos_t * row_p - sin_t * row_q
                a[q, :] = sin_t * row_p + cos_t * row_q
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = cos_t * col_p - sin_t * col_q
                a[:, q] = sin_t * col_p + cos_t * col_q
                a[p, q] = a[q, p] = 0.0
                v_p = v[:, p].copy()
                v[:, p] = cos_t * v_p - sin_t * v[:, q]
                v[:, q] = sin_t * v_p + cos_t * v[:, q]
                rotations += 1
        if rotations == 0:
            break
    else:
        raise ConvergenceError(f"Jacobi eigensolver did not settle in {max_sweeps} sweeps")

    eigvals = np.diag(a).copy()
    order = np.argsort(-eigvals, kind="stable")
    eigvals = eigvals[order]
    v = v[:, order]
    first_nonzero = np.argmax(np.abs(v) > 1e-12, axis=0)
    signs = np.where(v[first_nonzero, np.arange(n)] < 0, -1.0, 1.0)
    return eigvals, OrthoBasis(v * signs)


def eigenvector_centrality(m) -> np.ndarray:
    """Centrality from the eigenvector of the largest eigenvalue.

    The vector is signed so its entry sum is positive and scaled to unit
    Euclidean norm.  Requires an entrywise nonnegative matrix with at
    least one nonzero entry.
    """
    a = np.asarray(m, dtype=float)
    if np.any(a < 0):
        raise ValueError("eigenvector centrality needs a nonnegative matrix")
    if not np.any(a):
        raise ValueError("all-zero matrix has no principal direction")
    _, basis = eig_sym(a)
    vec = basis.column(0).copy()
    if vec.sum() < 0:
        vec = -vec
    return vec / np.linalg.norm(vec)
