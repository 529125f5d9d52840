"""Normalized-cut machinery: Laplacian, symmetric eigensolver, Fiedler partition.

Two eigensolver backends sit behind one contract (ascending eigenvalues,
orthonormal eigenvectors, a deterministic sign convention): a self-contained
cyclic Jacobi solver and LAPACK via numpy. Jacobi handles the small graphs
where its simplicity pays off; LAPACK handles production-size graphs (a one
minute utterance is ~600 nodes) where an interpreted Jacobi sweep would blow
the latency budget. Both are held to the same residual and orthonormality
tolerances by the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import check_square, check_symmetric

try:  # pragma: no cover - exercised implicitly wherever numba is installed
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

JACOBI_SWEEP_CAP = 100
JACOBI_OFF_TOL = 1e-12  # relative to the Frobenius norm of the input
JACOBI_MAX_AUTO_N = 16  # "auto" switches to LAPACK above this size


class EigenConvergenceError(RuntimeError):
    """Jacobi sweeps hit the cap before the off-diagonal mass vanished."""


def _jacobi_sweep_py(a: np.ndarray, v: np.ndarray) -> None:
    """One cyclic sweep of two-sided Jacobi rotations, vectorized per pair."""
    n = a.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = a[p, q]
            if apq == 0.0:
                continue
            gap = a[q, q] - a[p, p]
            if abs(apq) < 1e-18 * abs(gap):  # rotation angle below float resolution
                a[p, q] = 0.0
                a[q, p] = 0.0
                continue
            theta = gap / (2.0 * apq)
            if abs(theta) > 1e150:  # theta**2 would overflow; limit formula
                t = 0.5 / theta
            else:
                t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                if theta < 0.0:
                    t = -t
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            col_p = a[:, p].copy()
            col_q = a[:, q].copy()
            a[:, p] = c * col_p - s * col_q
            a[:, q] = s * col_p + c * col_q
            row_p = a[p, :].copy()
            row_q = a[q, :].copy()
            a[p, :] = c * row_p - s * row_q
            a[q, :] = s * row_p + c * row_q
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp = v[:, p].copy()
            vq = v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq


def _jacobi_sweep_scalar(a, v):  # numba kernel; scalar loops
    n = a.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = a[p, q]
            if apq == 0.0:
                continue
            gap = a[q, q] - a[p, p]
            if abs(apq) < 1e-18 * abs(gap):  # rotation angle below float resolution
                a[p, q] = 0.0
                a[q, p] = 0.0
                continue
            theta = gap / (2.0 * apq)
            if abs(theta) > 1e150:  # theta**2 would overflow; limit formula
                t = 0.5 / theta
            else:
                t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                if theta < 0.0:
                    t = -t
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            app = a[p, p]
            aqq = a[q, q]
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            a[q, p] = 0.0
            for i in range(n):
                if i != p and i != q:
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = c * aip - s * aiq
                    a[i, q] = s * aip + c * aiq
                    a[p, i] = a[i, p]
                    a[q, i] = a[i, q]
            for i in range(n):
                vip = v[i, p]
                viq = v[i, q]
                v[i, p] = c * vip - s * viq
                v[i, q] = s * vip + c * viq


if _HAVE_NUMBA:
    _jacobi_sweep = njit(cache=True)(_jacobi_sweep_scalar)
else:
    _jacobi_sweep = _jacobi_sweep_py


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def jacobi_eigh(
    a,
    tol: float = JACOBI_OFF_TOL,
    max_sweeps: int = JACOBI_SWEEP_CAP,
) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm falls below tol times the
    (rotation-invariant) Frobenius norm of the input. Returns unsorted
    eigenvalues and the accumulated rotation matrix whose columns are the
    eigenvectors.
    """
    work = check_square(a, "matrix").copy()
    n = work.shape[0]
    v = np.eye(n)
    scale = float(np.linalg.norm(work))
    if n == 1 or scale == 0.0:
        return np.diag(work).copy(), v
    threshold = tol * scale
    for _ in range(max_sweeps):
        if _off_norm(work) <= threshold:
            break
        _jacobi_sweep(work, v)
    else:
        remaining = _off_norm(work)
        if remaining > threshold:
            raise EigenConvergenceError(
                f"Jacobi failed to converge in {max_sweeps} sweeps "
                f"(off-diagonal norm {remaining:.3e}, threshold {threshold:.3e})"
            )
    return np.diag(work).copy(), v


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """First significantly nonzero component of each eigenvector made positive."""
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        tol = 1e-12 * np.abs(col).max()
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size and col[nz[0]] < 0.0:
            vecs[:, j] = -col
    return vecs


def eig_symmetric(a, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    method "jacobi" runs the self-contained solver, "lapack" uses numpy's
    eigh, and "auto" picks jacobi for n <= 16 and lapack otherwise. The sign
    convention (first nonzero component positive) makes results reproducible
    across runs and backends.
    """
    sym = check_symmetric(a, tol=1e-9, name="matrix")
    n = sym.shape[0]
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_AUTO_N else "lapack"
    if method == "jacobi":
        vals, vecs = jacobi_eigh(sym)
    elif method == "lapack":
        vals, vecs = np.linalg.eigh(sym)
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    order = np.argsort(vals, kind="stable")
    return vals[order], _fix_signs(vecs[:, order])


def normalized_laplacian(w) -> tuple[np.ndarray, np.ndarray]:
    """Degree vector and symmetric normalized Laplacian of a similarity graph.

    Degrees are full row sums, self-loops included (they cancel in cut values
    and keep every degree safely positive on floored graphs).
    """
    a = check_symmetric(w, tol=1e-9, name="similarity matrix")
    degrees = a.sum(axis=1)
    if np.any(degrees <= 0.0):
        bad = int(np.argmin(degrees))
        raise ValueError(f"node {bad} has non-positive degree {degrees[bad]}; cannot normalize")
    inv_sqrt = 1.0 / np.sqrt(degrees)
    lsym = -(a * np.outer(inv_sqrt, inv_sqrt))
    lsym[np.diag_indices_from(lsym)] += 1.0
    return degrees, lsym


@dataclass(frozen=True)
class FiedlerSolution:
    """Spectrum of the normalized Laplacian plus the recovered indicator vector."""

    eigenvalues: np.ndarray = field(repr=False)
    z1: np.ndarray = field(repr=False)  # unit eigenvector of the second-smallest eigenvalue
    y1: np.ndarray = field(repr=False)  # indicator recovered as D^{-1/2} z1
    y1_mean: float = 0.0


def fiedler_solution(w, method: str = "auto") -> FiedlerSolution:
    """Solve the relaxed normalized cut on a similarity graph.

    The second-smallest eigenvector z1 of the normalized Laplacian is mapped
    back through D^{-1/2} to the indicator y1, which is orthogonal to the
    degree vector (the balance constraint).
    """
    degrees, lsym = normalized_laplacian(w)
    if lsym.shape[0] < 2:
        raise ValueError("need at least two nodes to compute a Fiedler vector")
    vals, vecs = eig_symmetric(lsym, method=method)
    z1 = vecs[:, 1]
    y1 = z1 / np.sqrt(degrees)
    return FiedlerSolution(eigenvalues=vals, z1=z1, y1=y1, y1_mean=float(y1.mean()))


SIDE_LOW = 0  # indicator value <= threshold
SIDE_HIGH = 1


@dataclass(frozen=True)
class Partition:
    """A two-way node assignment with an optional dysfluent side."""

    labels: np.ndarray = field(repr=False)  # per-node side in {0, 1}
    threshold_mode: str | None = "sign"
    dysfluent_side: int | None = None

    @property
    def n(self) -> int:
        return len(self.labels)

    def side(self, which: int) -> np.ndarray:
        return np.flatnonzero(self.labels == which)

    def dysfluent_window_mask(self) -> np.ndarray:
        """Boolean per-window mask; all False when no side was identified."""
        if self.dysfluent_side is None:
            return np.zeros(self.n, dtype=bool)
        return self.labels == self.dysfluent_side


def threshold_partition(sol: FiedlerSolution, mode: str = "sign") -> Partition:
    """Split nodes at a threshold on the indicator vector.

    mode "sign" thresholds at zero, "mean" at the indicator's average. Nodes
    at or below the threshold form the low side. Sign-flipping the
    eigenvector swaps side names but never the bipartition itself.
    """
    if mode == "sign":
        phi = 0.0
    elif mode == "mean":
        phi = sol.y1_mean
    else:
        raise ValueError(f"unknown threshold mode {mode!r}")
    if len(sol.y1) < 2:
        raise ValueError("cannot bipartition fewer than two nodes")
    labels = np.where(sol.y1 <= phi, SIDE_LOW, SIDE_HIGH).astype(np.int8)
    if labels.min() == labels.max():
        raise ValueError(
            "degenerate indicator vector: every node falls on one side, no cut exists"
        )
    return Partition(labels=labels, threshold_mode=mode)


def identify_dysfluent_cluster(
    partition: Partition,
    node_flags,
    p_dysfluent_max=None,
) -> Partition:
    """Mark the side holding more classifier-flagged nodes as dysfluent.

    Equal counts fall back to the side with the higher mean dysfluent
    probability (when given), then to the smaller side. With no flagged nodes
    at all the clip is declared fully fluent and no side is marked.
    """
    flags = np.asarray(node_flags, dtype=bool)
    if flags.shape != (partition.n,):
        raise ValueError(f"need one flag per node, got {flags.shape} for n={partition.n}")
    if not flags.any():
        return Partition(partition.labels, partition.threshold_mode, dysfluent_side=None)

    counts = [int(flags[partition.labels == s].sum()) for s in (SIDE_LOW, SIDE_HIGH)]
    if counts[SIDE_LOW] != counts[SIDE_HIGH]:
        side = SIDE_LOW if counts[SIDE_LOW] > counts[SIDE_HIGH] else SIDE_HIGH
    else:
        side = None
        if p_dysfluent_max is not None:
            pmax = np.asarray(p_dysfluent_max, dtype=np.float64)
            means = [pmax[partition.labels == s].mean() for s in (SIDE_LOW, SIDE_HIGH)]
            if means[SIDE_LOW] != means[SIDE_HIGH]:
                side = SIDE_LOW if means[SIDE_LOW] > means[SIDE_HIGH] else SIDE_HIGH
        if side is None:
            sizes = [int((partition.labels == s).sum()) for s in (SIDE_LOW, SIDE_HIGH)]
            side = SIDE_LOW if sizes[SIDE_LOW] <= sizes[SIDE_HIGH] else SIDE_HIGH
    return Partition(partition.labels, partition.threshold_mode, dysfluent_side=side)
