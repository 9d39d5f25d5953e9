"""Cotangent Laplace-Beltrami discretization, weight-graph Laplacians and truncated eigenbases."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh_io import TriangleMesh

# below this size (or for large p) the dense symmetric solver is both faster and exact
DENSE_EIGEN_LIMIT = 1500


class DegenerateTriangleError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    pass


def _triangle_geometry(mesh: TriangleMesh):
    v = mesh.vertices
    f = mesh.faces
    # edge opposite corner k joins the two other corners
    l0 = np.linalg.norm(v[f[:, 1]] - v[f[:, 2]], axis=1)
    l1 = np.linalg.norm(v[f[:, 2]] - v[f[:, 0]], axis=1)
    l2 = np.linalg.norm(v[f[:, 0]] - v[f[:, 1]], axis=1)
    s = 0.5 * (l0 + l1 + l2)
    # Heron's formula; clamp tiny negative round-off before the square root
    area = np.sqrt(np.clip(s * (s - l0) * (s - l1) * (s - l2), 0.0, None))
    return np.column_stack([l0, l1, l2]), area


def cotan_matrices(mesh: TriangleMesh):
    """Cotangent stiffness and lumped (barycentric) mass matrices.

    Returns
    -------
    stiffness : (N, N) csr_matrix
        Symmetric PSD, off-diagonal ``-(cot a + cot b) / 2`` and zero row sums.
    mass : (N, N) dia_matrix
        Diagonal, each vertex carrying one third of its incident triangle areas.

    Cotangents are computed from edge lengths (``cot = (b^2 + c^2 - a^2) / 4A``);
    obtuse triangles give negative weights, which are kept.
    """
    n = mesh.n_vertices
    lengths, area = _triangle_geometry(mesh)
    scale = max(float(lengths.max(initial=0.0)), 1e-300) ** 2
    bad = np.flatnonzero(area <= 1e-14 * scale)
    if bad.size:
        k = int(bad[0])
        raise DegenerateTriangleError(f"face {k} {tuple(mesh.faces[k])} has zero area")
    sq = lengths ** 2
    cot = np.empty_like(sq)
    for k in range(3):
        a, b, c = sq[:, k], sq[:, (k + 1) % 3], sq[:, (k + 2) % 3]
        cot[:, k] = (b + c - a) / (4.0 * area)
    f = mesh.faces
    # corner k is opposite the edge (k+1, k+2)
    rows = np.concatenate([f[:, (k + 1) % 3] for k in range(3)])
    cols = np.concatenate([f[:, (k + 2) % 3] for k in range(3)])
    w = 0.5 * cot.T.ravel()
    off = sp.coo_matrix((-w, (rows, cols)), shape=(n, n)).tocsr()
    off = off + off.T
    diag = -np.asarray(off.sum(axis=1)).ravel()
    stiffness = (off + sp.diags(diag)).tocsr()
    lumped = np.bincount(f.ravel(), weights=np.repeat(area / 3.0, 3), minlength=n)
    mass = sp.diags(lumped)
    return stiffness, mass


def graph_laplacian(weights):
    """Laplacian ``V`` of a symmetric weight table: ``v_ij = -w_ij``, ``v_ii = sum_k w_ik``.

    Accepts a dense array or a scipy sparse matrix and returns the same kind.
    The diagonal of ``weights`` is ignored.
    """
    if sp.issparse(weights):
        w = sp.csr_matrix(weights, dtype=float)
        w = w - sp.diags(w.diagonal())
        asym = abs(w - w.T)
        if asym.nnz and asym.max() > 1e-12 * max(abs(w).max(), 1.0):
            raise ValueError("weight matrix is not symmetric")
        deg = np.asarray(w.sum(axis=1)).ravel()
        return (sp.diags(deg) - w).tocsr()
    w = np.array(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("weight table must be square")
    if not np.allclose(w, w.T, rtol=0, atol=1e-12 * max(np.abs(w).max(initial=0.0), 1.0)):
        raise ValueError("weight table is not symmetric")
    np.fill_diagonal(w, 0.0)
    v = -w
    np.fill_diagonal(v, w.sum(axis=1))
    return v


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Truncated Laplace-Beltrami eigenbasis.

    ``vectors`` holds the p eigenvectors as columns (A-orthonormal),
    ``values`` the eigenvalues in ascending order and ``mass`` the diagonal
    of the mass matrix A.
    """

    vectors: np.ndarray
    values: np.ndarray
    mass: np.ndarray

    @property
    def size(self) -> int:
        return self.vectors.shape[1]

    @property
    def n_points(self) -> int:
        return self.vectors.shape[0]

    def take(self, rows) -> np.ndarray:
        """Rows of the basis at the given vertex indices (the sampled basis)."""
        return self.vectors[np.asarray(rows)]

    def apply(self, alpha) -> np.ndarray:
        return self.vectors @ alpha

    def apply_transpose(self, values) -> np.ndarray:
        """``Phi' values`` for an N-row table."""
        return self.vectors.T @ values

    def truncated(self, p: int) -> "EigenBasis":
        if p > self.size:
            raise ValueError(f"cannot truncate a {self.size}-vector basis to {p}")
        return EigenBasis(self.vectors[:, :p], self.values[:p], self.mass)


def _fix_signs(vectors):
    scale = np.abs(vectors).max(axis=0)
    out = vectors.copy()
    for k in range(vectors.shape[1]):
        nz = np.flatnonzero(np.abs(vectors[:, k]) > 1e-8 * scale[k])
        if nz.size and vectors[nz[0], k] < 0:
            out[:, k] = -out[:, k]
    return out


def eigenbasis(stiffness, mass, p: int, fixed=None, tol: float = 0.0) -> EigenBasis:
    """The ``p`` smallest generalized eigenpairs of ``W phi = lam A phi``.

    The lumped mass reduces the problem to the symmetric standard problem
    ``A^-1/2 W A^-1/2``. Small problems use a dense solver; larger ones use
    shift-invert Lanczos (ARPACK) with a deterministic start vector followed by a
    Rayleigh-Ritz cleanup. Lanczos can drop copies from tight eigenvalue
    clusters, so it is asked for a buffer of extra pairs and ``tol`` defaults
    to machine precision. ``fixed`` lists vertices with a homogeneous Dirichlet
    condition: they are eliminated and their rows in the basis are zero.
    Each column's first clearly nonzero entry is made positive.
    """
    W = sp.csr_matrix(stiffness, dtype=float)
    a = mass.diagonal() if sp.issparse(mass) else np.asarray(mass, dtype=float)
    if a.ndim == 2:
        a = np.diag(a)
    n = W.shape[0]
    if np.any(a <= 0):
        raise ValueError("mass matrix must have a positive diagonal")
    free = np.ones(n, dtype=bool)
    if fixed is not None:
        free[np.asarray(fixed, dtype=np.int64)] = False
    idx = np.flatnonzero(free)
    nf = idx.size
    if not 1 <= p <= nf:
        raise ValueError(f"p must lie in [1, {nf}], got {p}")
    Wf = W[idx][:, idx]
    scale = 1.0 / np.sqrt(a[idx])
    M = sp.diags(scale) @ Wf @ sp.diags(scale)
    M = 0.5 * (M + M.T)
    if nf <= DENSE_EIGEN_LIMIT or p >= nf // 3:
        vals, U = scipy.linalg.eigh(M.toarray(), subset_by_index=[0, p - 1])
    else:
        shift = -1e-6 * float(np.abs(M.diagonal()).max())
        v0 = np.cos(np.arange(nf) * 0.7) + 1.5
        k = min(nf - 1, p + max(10, p // 4))
        try:
            _, U = spla.eigsh(M.tocsc(), k=k, sigma=shift, which="LM", v0=v0, tol=tol,
                              ncv=min(nf, max(2 * k + 1, k + 20)), maxiter=10 * k)
        except spla.ArpackNoConvergence as exc:
            raise EigenSolverError(f"eigensolver did not converge: {exc}") from None
        U, _ = np.linalg.qr(U)
        small = U.T @ (M @ U)
        vals, R = np.linalg.eigh(0.5 * (small + small.T))
        U = U @ R
    order = np.argsort(vals, kind="stable")[:p]
    vals, U = vals[order], U[:, order]
    phi = np.zeros((n, p))
    phi[idx] = scale[:, None] * U
    phi = _fix_signs(phi)
    vals = np.maximum(vals, 0.0) if np.all(vals > -1e-9 * max(1.0, vals.max())) else vals
    resid = np.abs(W @ phi - (a[:, None] * phi) * vals)[idx].max()
    if resid > 1e-6 * max(vals.max(), 1.0):
        raise EigenSolverError(f"eigenpair residual {resid:.3e} exceeds tolerance")
    phi.setflags(write=False)
    return EigenBasis(phi, vals, a.copy())


class SeparableGridBasis:
    """Closed-form sine/cosine basis on a rectangular lattice, evaluated lazily.

    Vertex ``(i, j)`` (index ``i * cols + j``) lies at ``x = j * Lx / (cols - 1)``,
    ``y = i * Ly / (rows - 1)``. Mode ``(k, l)`` is ``sin(k pi x / Lx) cos(l pi y / Ly)``
    with eigenvalue ``(k pi / Lx)^2 + (l pi / Ly)^2``: zero on the left and right
    edges and with zero normal derivative on the top and bottom edges.
    The mass is the dual-cell area of each vertex (half cells on the border),
    for which the sampled modes are exactly orthogonal.
    """

    def __init__(self, rows, cols, length_x, length_y, p):
        if rows < 2 or cols < 2:
            raise ValueError("grid needs at least 2 rows and 2 columns")
        kmax, lmax = cols - 2, rows
        if p < 1 or p > kmax * lmax:
            raise ValueError(f"p={p} exceeds the {kmax * lmax} available grid modes")
        self.rows, self.cols = rows, cols
        self.length_x, self.length_y = float(length_x), float(length_y)
        k, l = np.meshgrid(np.arange(1, kmax + 1), np.arange(lmax), indexing="ij")
        k, l = k.ravel(), l.ravel()
        lam = (k * np.pi / self.length_x) ** 2 + (l * np.pi / self.length_y) ** 2
        order = np.lexsort((l, k, lam))[:p]
        self.k, self.l, self.values = k[order], l[order], lam[order]
        hx = self.length_x / (cols - 1)
        hy = self.length_y / (rows - 1)
        wx = np.full(cols, hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(rows, hy)
        wy[[0, -1]] *= 0.5
        self._wx, self._wy = wx, wy
        j = np.arange(cols)
        i = np.arange(rows)
        ks = np.unique(self.k)
        ls = np.unique(self.l)
        sx = np.sin(np.outer(j, ks) * np.pi / (cols - 1))
        sx[[0, -1]] = 0.0
        cy = np.cos(np.outer(i, ls) * np.pi / (rows - 1))
        # normalize the 1-D factors so the products are A-orthonormal
        sx /= np.sqrt((wx[:, None] * sx ** 2).sum(axis=0))
        cy /= np.sqrt((wy[:, None] * cy ** 2).sum(axis=0))
        self._sx, self._cy = sx, cy
        self._kpos = np.searchsorted(ks, self.k)
        self._lpos = np.searchsorted(ls, self.l)

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def n_points(self) -> int:
        return self.rows * self.cols

    @property
    def mass(self) -> np.ndarray:
        return np.outer(self._wy, self._wx).ravel()

    def take(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        i, j = np.divmod(rows, self.cols)
        return self._cy[i][:, self._lpos] * self._sx[j][:, self._kpos]

    @property
    def vectors(self) -> np.ndarray:
        return self.take(np.arange(self.n_points))

    def apply(self, alpha) -> np.ndarray:
        """``Phi @ alpha`` via the separable factors, without forming ``Phi``."""
        alpha = np.asarray(alpha, dtype=float)
        flat = alpha.ndim == 1
        a2 = alpha.reshape(self.size, -1)
        out = np.empty((self.n_points, a2.shape[1]))
        for c in range(a2.shape[1]):
            coef = np.zeros((self._cy.shape[1], self._sx.shape[1]))
            np.add.at(coef, (self._lpos, self._kpos), a2[:, c])
            out[:, c] = (self._cy @ coef @ self._sx.T).ravel()
        return out[:, 0] if flat else out

    def apply_transpose(self, values) -> np.ndarray:
        """``Phi' values`` via the separable factors."""
        values = np.asarray(values, dtype=float)
        flat = values.ndim == 1
        v2 = values.reshape(self.rows, self.cols, -1)
        out = np.empty((self.size, v2.shape[2]))
        for c in range(v2.shape[2]):
            coef = self._cy.T @ v2[:, :, c] @ self._sx
            out[:, c] = coef[self._lpos, self._kpos]
        return out[:, 0] if flat else out

    def to_eigenbasis(self) -> EigenBasis:
        return EigenBasis(self.vectors, self.values.copy(), self.mass)


def fourier_basis_grid(rows, cols, length_x, length_y, p) -> SeparableGridBasis:
    """Closed-form Laplacian eigenbasis of a rectangle with sliding boundary conditions."""
    return SeparableGridBasis(rows, cols, length_x, length_y, p)


def mesh_basis(mesh: TriangleMesh, p: int, cache_dir=None) -> EigenBasis:
    """Cotangent eigenbasis of a mesh, read from / written to the on-disk cache when given."""
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / cache_key(mesh, p)
        if path.exists():
            return read_basis(path)
    W, A = cotan_matrices(mesh)
    basis = eigenbasis(W, A, p)
    if path is not None:
        write_basis(basis, path)
    return basis


def cache_key(mesh: TriangleMesh, p: int) -> str:
    return f"basis-{mesh.content_hash()[:24]}-p{p}.bin"


# Cache layout, all little-endian: int64 N, int64 p, then p float64 eigenvalues,
# N float64 mass diagonal entries, and the N x p eigenvector table row-major.
_HEADER = struct.Struct("<qq")


def write_basis(basis: EigenBasis, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, p = basis.vectors.shape
    tmp = path.with_name(path.name + f".{os.getpid()}.tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(n, p))
        fh.write(np.asarray(basis.values, dtype="<f8").tobytes())
        fh.write(np.asarray(basis.mass, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(basis.vectors, dtype="<f8").tobytes())
    os.replace(tmp, path)


def read_basis(path) -> EigenBasis:
    raw = Path(path).read_bytes()
    n, p = _HEADER.unpack_from(raw)
    expected = _HEADER.size + 8 * (p + n + n * p)
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated basis cache ({len(raw)} of {expected} bytes)")
    off = _HEADER.size
    values = np.frombuffer(raw, "<f8", p, off).astype(float)
    off += 8 * p
    mass = np.frombuffer(raw, "<f8", n, off).astype(float)
    off += 8 * n
    vectors = np.frombuffer(raw, "<f8", n * p, off).reshape(n, p).astype(float)
    vectors.setflags(write=False)
    return EigenBasis(vectors, values, mass)

