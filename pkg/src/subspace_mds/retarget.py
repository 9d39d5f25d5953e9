"""Saliency-aware horizontal image retargeting by constrained subspace MDS.

A deformation grid over the source image is squeezed to the target width. The
horizontal displacement of the grid lives in the span of a closed-form
sine/cosine basis (zero on the left and right edges, so the width is pinned),
and its coefficients minimize a saliency-weighted edge stress plus a Dirichlet
penalty, subject to monotonicity of every row at the sampled vertices.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .laplace import SeparableGridBasis, fourier_basis_grid
from .mesh_io import RasterImage, TriangleMesh, generate_grid_mesh
from .metric import GridGeodesics, SamplingSet, farthest_point_sampling
from .smacof import ConvergenceLog, SolverOptions

logger = logging.getLogger(__name__)

SALIENCY_FLOOR = 0.01
# chosen by a log-scale search on the synthetic box-saliency instance
DEFAULT_MU = 1e-3
DEFAULT_OPTIONS = SolverOptions(a_tol=0.0, r_tol=1e-6, maxiter=200)


class RetargetInfeasibleError(ValueError):
    pass


class NonMonotoneMapError(ValueError):
    pass


class QPInfeasibleError(RuntimeError):
    pass


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass
class RetargetConfig:
    """Inputs and parameters of one retargeting run.

    ``epsilon`` defaults to half the rescaled horizontal grid spacing and
    ``q`` to ``4 p``. ``stress_edges`` selects the stress terms: every grid
    edge, or only edges touching a sample (cheaper, but blind to spacing
    between samples).
    """

    source: RasterImage
    saliency: RasterImage
    grid_rows: int
    grid_cols: int
    target_width_ratio: float = 0.5
    mu: float = DEFAULT_MU
    epsilon: float | None = None
    p: int = 300
    q: int | None = None
    seed: int = 0
    stress_edges: str = "all"

    def __post_init__(self):
        if self.stress_edges not in ("all", "sampled"):
            raise ValueError("stress_edges must be 'all' or 'sampled'")
        if self.saliency.channels != 1:
            raise ValueError("saliency map must have a single channel")
        if (self.saliency.height, self.saliency.width) != (self.source.height, self.source.width):
            raise ValueError(
                f"saliency map is {self.saliency.height}x{self.saliency.width} but the source is "
                f"{self.source.height}x{self.source.width}")
        if not 0.0 < self.target_width_ratio <= 1.0:
            raise ValueError("target_width_ratio must lie in (0, 1]")
        if self.grid_rows < 2 or self.grid_cols < 3:
            raise ValueError("grid needs at least 2 rows and 3 columns")
        if self.grid_rows > self.source.height or self.grid_cols > self.source.width:
            raise ValueError("grid is finer than the image")
        if self.target_width < 2:
            raise ValueError("target width must be at least 2 pixels")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.q is None:
            self.q = 4 * self.p
        if self.epsilon is None:
            self.epsilon = 0.5 * self.rescaled_spacing
        if not 0.0 < self.epsilon < self.rescaled_spacing:
            raise RetargetInfeasibleError(
                f"epsilon={self.epsilon:g} must lie in (0, {self.rescaled_spacing:g}), the rescaled grid spacing")

    @property
    def target_width(self) -> int:
        return _round_half_up(self.target_width_ratio * self.source.width)

    @property
    def spacing_x(self) -> float:
        return (self.source.width - 1) / (self.grid_cols - 1)

    @property
    def spacing_y(self) -> float:
        return (self.source.height - 1) / (self.grid_rows - 1)

    @property
    def scale(self) -> float:
        return (self.target_width - 1) / (self.source.width - 1)

    @property
    def rescaled_spacing(self) -> float:
        return self.spacing_x * self.scale


def grid_edges(rows: int, cols: int) -> np.ndarray:
    """4-neighbour lattice edges, horizontal ones first, each as (left/top, right/bottom)."""
    idx = np.arange(rows * cols).reshape(rows, cols)
    horiz = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    vert = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    return np.concatenate([horiz, vert])


@dataclass(frozen=True, eq=False)
class EdgeStress:
    """Stress restricted to a sparse edge set: ``sum_e w_e (||x_b - x_a|| - d_e)^2``."""

    edges: np.ndarray
    dissimilarities: np.ndarray
    weights: np.ndarray

    def lengths(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.linalg.norm(X[self.edges[:, 1]] - X[self.edges[:, 0]], axis=1)

    def value(self, X) -> float:
        r = self.lengths(X) - self.dissimilarities
        return float(np.sum(self.weights * r * r))

    def distortion(self, X) -> np.ndarray:
        """Per-edge ``|length - d| / d``."""
        return np.abs(self.lengths(X) - self.dissimilarities) / self.dissimilarities


def vertex_saliency(saliency: RasterImage, rows: int, cols: int) -> np.ndarray:
    """Mean saliency over each vertex's cell (pixels whose nearest grid vertex it is)."""
    h, w = saliency.height, saliency.width
    hx = (w - 1) / (cols - 1)
    hy = (h - 1) / (rows - 1)
    vi = np.clip(np.rint(np.arange(h) / hy).astype(np.int64), 0, rows - 1)
    vj = np.clip(np.rint(np.arange(w) / hx).astype(np.int64), 0, cols - 1)
    owner = (vi[:, None] * cols + vj[None, :]).ravel()
    total = np.bincount(owner, weights=saliency.samples[:, :, 0].ravel(), minlength=rows * cols)
    count = np.bincount(owner, minlength=rows * cols)
    # a grid no finer than the image leaves every vertex at least one pixel
    return total / np.maximum(count, 1)


@dataclass(frozen=True, eq=False)
class QuadraticProgram:
    """``min 1/2 x'Px + linear'x`` subject to ``constraint_matrix @ x >= constraint_bounds``."""

    P: np.ndarray
    linear: np.ndarray
    constraint_matrix: np.ndarray
    constraint_bounds: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        q = np.array(self.linear, dtype=float).ravel()
        n = len(q)
        A = np.array(self.constraint_matrix, dtype=float).reshape(-1, n)
        b = np.array(self.constraint_bounds, dtype=float).ravel()
        if P.shape != (n, n):
            raise ValueError(f"P has shape {P.shape}, expected {(n, n)}")
        if len(b) != A.shape[0]:
            raise ValueError("one bound per constraint row is required")
        if not all(np.all(np.isfinite(a)) for a in (P, q, A, b)):
            raise ValueError("quadratic program has non-finite entries")
        scale = max(np.abs(P).max(initial=0.0), 1.0)
        if not np.allclose(P, P.T, rtol=0, atol=1e-10 * scale):
            raise ValueError("P is not symmetric")
        P = 0.5 * (P + P.T)
        if n and np.linalg.eigvalsh(P)[0] < -1e-9 * scale:
            raise ValueError("P is not positive semidefinite")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "linear", q)
        object.__setattr__(self, "constraint_matrix", A)
        object.__setattr__(self, "constraint_bounds", b)

    @property
    def n_variables(self) -> int:
        return len(self.linear)

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.P @ x + self.linear @ x)

    def violation(self, x) -> float:
        """Largest constraint violation (0 when feasible)."""
        if not len(self.constraint_bounds):
            return 0.0
        return float(max(0.0, np.max(self.constraint_bounds - self.constraint_matrix @ x)))


@dataclass
class QPResult:
    x: np.ndarray
    converged: bool
    iterations: int
    primal_residual: float
    dual_residual: float
    y: np.ndarray | None = None
    polished: bool = False


def _polish(qp: QuadraticProgram, x, y, tol):
    """Re-solve with the guessed active set as equalities; ``None`` if the guess fails the KKT test."""
    A, b = qp.constraint_matrix, qp.constraint_bounds
    slack = A @ x - b
    active = (y < -tol) | (slack <= tol * max(1.0, np.abs(b).max(initial=0.0)))
    n, na = qp.n_variables, int(active.sum())
    Aa = A[active]
    K = np.zeros((n + na, n + na))
    K[:n, :n] = qp.P
    K[:n, n:] = -Aa.T
    K[n:, :n] = Aa
    rhs = np.concatenate([-qp.linear, b[active]])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    xp, lam = sol[:n], sol[n:]
    scale = max(1.0, np.abs(lam).max(initial=0.0))
    stationarity = qp.P @ xp + qp.linear - Aa.T @ lam
    if (qp.violation(xp) > tol or np.any(lam < -tol * scale)
            or np.abs(stationarity).max(initial=0.0) > tol * max(1.0, np.abs(qp.linear).max(initial=0.0))):
        return None
    ypol = np.zeros(len(b))
    ypol[active] = -lam
    return xp, ypol


def qp_solve(qp: QuadraticProgram, tol: float = 1e-8, max_iterations: int = 10000, x0=None, y0=None,
             rho: float = 0.1, sigma: float = 1e-6, relaxation: float = 1.6) -> QPResult:
    """Operator-splitting (ADMM) solution of an inequality-constrained convex QP.

    The splitting is ``z = Ax`` with ``z`` projected onto ``[b, inf)``; each step
    solves one linear system with ``P + sigma I + rho A'A``, whose factor is
    reused until ``rho`` is adapted. Iteration stops once the primal residual
    ``||Ax - z||`` and the dual residual ``||Px + linear + A'y||`` are below
    ``tol`` (absolute plus ``tol`` relative to the problem scale, max-norm),
    after which the active set is polished by a direct KKT solve.

    Raises
    ------
    QPInfeasibleError
        When the dual iterates diverge along a Farkas certificate of primal
        infeasibility.
    """
    P, q = qp.P, qp.linear
    A, b = qp.constraint_matrix, qp.constraint_bounds
    n, m = qp.n_variables, len(b)
    if m == 0:
        x, *_ = np.linalg.lstsq(P, -q, rcond=None)
        res = float(np.abs(P @ x + q).max(initial=0.0))
        return QPResult(x, res <= tol * max(1.0, np.abs(q).max(initial=0.0)), 0, 0.0, res, np.zeros(0))

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    y = np.zeros(m) if y0 is None else np.minimum(np.array(y0, dtype=float), 0.0)
    z = np.maximum(A @ x, b)
    eye = np.eye(n)
    AtA = A.T @ A

    def factor(r):
        return scipy.linalg.cho_factor(P + sigma * eye + r * AtA)

    K = factor(rho)
    best = (np.inf, x.copy(), y.copy(), np.inf, np.inf)
    converged = False
    it = 0
    for it in range(1, max_iterations + 1):
        xt = scipy.linalg.cho_solve(K, sigma * x - q + A.T @ (rho * z - y))
        zt = A @ xt
        x = relaxation * xt + (1.0 - relaxation) * x
        zh = relaxation * zt + (1.0 - relaxation) * z
        z_new = np.maximum(zh + y / rho, b)
        y_new = y + rho * (zh - z_new)
        dy = y_new - y
        z, y = z_new, y_new

        Ax, Px, Aty = A @ x, P @ x, A.T @ y
        r_p = float(np.abs(Ax - z).max())
        r_d = float(np.abs(Px + q + Aty).max())
        scale_p = max(np.abs(Ax).max(), np.abs(z).max())
        scale_d = max(np.abs(Px).max(), np.abs(Aty).max(), np.abs(q).max())
        eps_p = tol * (1.0 + scale_p)
        eps_d = tol * (1.0 + scale_d)
        merit = max(r_p / eps_p, r_d / eps_d)
        if merit < best[0]:
            best = (merit, x.copy(), y.copy(), r_p, r_d)
        if r_p <= eps_p and r_d <= eps_d:
            converged = True
            break

        ndy = np.abs(dy).max()
        if ndy > 0 and np.abs(A.T @ dy).max() <= 1e-9 * ndy and dy.max() <= 1e-9 * ndy \
                and b @ dy < -1e-9 * ndy * max(1.0, np.abs(b).max()):
            if it > 50:
                raise QPInfeasibleError("dual iterates diverge along a certificate of infeasibility")

        if it % 25 == 0:
            ratio = np.sqrt((r_p / max(scale_p, 1e-30)) / max(r_d / max(scale_d, 1e-30), 1e-30))
            new_rho = float(np.clip(rho * ratio, 1e-6, 1e6))
            if new_rho > 5 * rho or new_rho < rho / 5:
                rho = new_rho
                K = factor(rho)

    if not converged:
        _, x, y, r_p, r_d = best
    result = QPResult(x, converged, it, r_p, r_d, y)
    polished = _polish(qp, x, y, max(tol, 1e-12))
    if polished is not None:
        xp, yp = polished
        if qp.objective(xp) <= qp.objective(x) + tol * max(1.0, abs(qp.objective(x))) or qp.violation(x) > 0:
            result.x, result.y, result.polished = xp, yp, True
            result.primal_residual = qp.violation(xp)
            result.dual_residual = float(np.abs(P @ xp + q + A.T @ yp).max())
            result.converged = True
    return result


class EdgeSystem:
    """Edge stress in the horizontal coefficients plus the sampled monotonicity constraints.

    Edge offsets are ``dx0 + G Phi alpha`` with ``G`` the signed edge incidence;
    products with ``G Phi`` and its transpose go through the basis, so the
    ``E x p`` matrix is never stored. ``A`` holds the sampled forward
    differences ``Phi[v+1] - Phi[v]``.
    """

    def __init__(self, basis, edges, dx0, dy0, d, w, A, dx0_constrained):
        self.basis = basis
        self.edges = np.asarray(edges, dtype=np.int64)
        self.dx0, self.dy0 = np.asarray(dx0, dtype=float), np.asarray(dy0, dtype=float)
        self.d, self.w = np.asarray(d, dtype=float), np.asarray(w, dtype=float)
        self.A = np.asarray(A, dtype=float)
        self.dx0_constrained = np.asarray(dx0_constrained, dtype=float)
        self._gram = None

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def offsets(self, alpha) -> np.ndarray:
        u = self.basis.apply(alpha)
        return self.dx0 + u[self.edges[:, 1]] - u[self.edges[:, 0]]

    def adjoint(self, values) -> np.ndarray:
        """``(G Phi)' values`` for one value per edge."""
        n = self.basis.n_points
        g = (np.bincount(self.edges[:, 1], weights=values, minlength=n)
             - np.bincount(self.edges[:, 0], weights=values, minlength=n))
        return self.basis.apply_transpose(g)

    def gram(self, chunk: int = 20000) -> np.ndarray:
        """``(G Phi)' W (G Phi)``, accumulated over edge chunks and cached."""
        if self._gram is None:
            p = self.basis.size
            out = np.zeros((p, p))
            for lo in range(0, self.n_edges, chunk):
                e = self.edges[lo:lo + chunk]
                Mc = self.basis.take(e[:, 1]) - self.basis.take(e[:, 0])
                out += Mc.T @ (self.w[lo:lo + chunk, None] * Mc)
            self._gram = 0.5 * (out + out.T)
        return self._gram

    def objective(self, alpha, mu) -> float:
        """Edge stress plus ``mu * alpha' diag(Lambda) alpha``."""
        r = np.hypot(self.offsets(alpha), self.dy0) - self.d
        return float(np.sum(self.w * r * r) + mu * np.sum(self.basis.values * alpha * alpha))


@dataclass(frozen=True, eq=False)
class RetargetProblem:
    config: RetargetConfig
    mesh: TriangleMesh
    X0: np.ndarray
    stress: EdgeStress
    basis: SeparableGridBasis
    sampling: SamplingSet
    saliency: np.ndarray
    system: EdgeSystem

    @property
    def shape(self) -> tuple:
        return self.config.grid_rows, self.config.grid_cols

    def embedding(self, alpha) -> np.ndarray:
        """Grid positions ``X0 + [Phi alpha, 0]``."""
        X = self.X0.copy()
        X[:, 0] += self.basis.apply(np.asarray(alpha, dtype=float))
        return X

    def forward_differences(self, X) -> np.ndarray:
        """Horizontal forward differences of every grid row, shape (rows, cols - 1)."""
        x = np.asarray(X)[:, 0].reshape(self.shape)
        return np.diff(x, axis=1)

    def violations(self, X, tol=1e-9) -> int:
        """Number of forward differences anywhere on the grid below ``epsilon - tol``."""
        return int(np.sum(self.forward_differences(X) < self.config.epsilon - tol))


def build_retarget_problem(config: RetargetConfig) -> RetargetProblem:
    """Grid, rescaled initial embedding, edge stress, sliding-boundary basis and samples.

    The grid mesh holds source-image positions; ``X0`` (two columns) is the
    grid rescaled horizontally to the target width. Targets are the source
    edge lengths and weights the mean endpoint saliency, floored.
    """
    rows, cols = config.grid_rows, config.grid_cols
    hx, hy, s = config.spacing_x, config.spacing_y, config.scale
    mesh = generate_grid_mesh(rows, cols, hx, hy)
    X0 = mesh.vertices[:, :2].copy()
    X0[:, 0] *= s

    edges = grid_edges(rows, cols)
    n_horiz = rows * (cols - 1)
    d = np.empty(len(edges))
    d[:n_horiz], d[n_horiz:] = hx, hy
    sal = vertex_saliency(config.saliency, rows, cols)
    w = np.maximum(0.5 * (sal[edges[:, 0]] + sal[edges[:, 1]]), SALIENCY_FLOOR)
    stress = EdgeStress(edges, d, w)

    basis = fourier_basis_grid(rows, cols, (cols - 1) * hx * s, (rows - 1) * hy, config.p)
    oracle = GridGeodesics(rows, cols, hx * s, hy)
    sampling = farthest_point_sampling(oracle, config.q, config.seed)

    if config.stress_edges == "sampled":
        is_sample = np.zeros(rows * cols, dtype=bool)
        is_sample[sampling.indices] = True
        edge_ids = np.flatnonzero(is_sample[edges[:, 0]] | is_sample[edges[:, 1]])
    else:
        edge_ids = np.arange(len(edges))
    e = edges[edge_ids]
    dX0 = X0[e[:, 1]] - X0[e[:, 0]]

    left = np.sort(sampling.indices[sampling.indices % cols < cols - 1])
    A = basis.take(left + 1) - basis.take(left)
    dx0c = X0[left + 1, 0] - X0[left, 0]
    system = EdgeSystem(basis, e, dX0[:, 0], dX0[:, 1], d[edge_ids], w[edge_ids], A, dx0c)
    return RetargetProblem(config, mesh, X0, stress, basis, sampling, sal, system)


@dataclass
class RetargetResult:
    alpha: np.ndarray
    X: np.ndarray
    log: ConvergenceLog
    full_violations: int
    min_sampled_difference: float
    qp_iterations: list = field(default_factory=list)


def solve_constrained(problem: RetargetProblem, mu: float | None = None, epsilon: float | None = None,
                      opts: SolverOptions | None = None, qp_tol: float = 1e-9):
    """Majorization-minimization of the edge stress plus ``mu`` times the Dirichlet energy.

    Every outer step minimizes the quadratic majorizer of the stress (in the
    horizontal coefficients only) plus ``mu * alpha' diag(Lambda) alpha``
    subject to ``x[v+1] - x[v] >= epsilon`` at each sampled vertex ``v`` with a
    right neighbour. The QP is warm-started from the previous coefficients
    and the log records the objective per outer iteration.
    """
    cfg = problem.config
    mu = cfg.mu if mu is None else float(mu)
    eps = cfg.epsilon if epsilon is None else float(epsilon)
    opts = opts or DEFAULT_OPTIONS
    system = problem.system
    bounds = eps - system.dx0_constrained
    if np.any(bounds >= 0):
        raise RetargetInfeasibleError(
            f"epsilon={eps:g} is not below the uniformly rescaled spacing {system.dx0_constrained.min():g}; "
            "no monotone map reaches the target width")

    t0 = time.perf_counter()
    P = 2.0 * (system.gram() + mu * np.diag(problem.basis.values))
    alpha = np.zeros(problem.basis.size)
    y = None
    f = system.objective(alpha, mu)
    log = ConvergenceLog()
    log.append(0, f, 0.0)
    qp_iters = []
    prev = None
    k = 1
    while opts.keep_going(k, f, prev):
        dx = system.offsets(alpha)
        length = np.hypot(dx, system.dy0)
        ratio = np.divide(system.d, length, out=np.zeros_like(length), where=length > 0)
        linear = 2.0 * system.adjoint(system.w * (system.dx0 - ratio * dx))
        qp = QuadraticProgram(P, linear, system.A, bounds)
        res = qp_solve(qp, tol=qp_tol, x0=alpha, y0=y)
        qp_iters.append(res.iterations)
        a_new = res.x
        if qp.violation(a_new) > 0:
            # pull back toward alpha = 0, which is strictly feasible
            slack0 = -bounds
            viol = bounds - system.A @ a_new
            t = np.where(viol > 0, slack0 / (slack0 + np.maximum(viol, 0.0)), 1.0)
            a_new = a_new * float(t.min())
        f_new = system.objective(a_new, mu)
        if f_new > f:
            if f_new - f > 1e-9 * max(f, 1.0):
                logger.debug("objective rose by %.3g at step %d; keeping the previous iterate", f_new - f, k)
            break
        alpha, y, prev, f = a_new, res.y, f, f_new
        log.append(k, f, time.perf_counter() - t0)
        k += 1

    X = problem.embedding(alpha)
    sampled_diff = float(np.min(system.dx0_constrained + system.A @ alpha)) if len(bounds) else np.inf
    return RetargetResult(alpha, X, log, problem.violations(X), sampled_diff, qp_iters)


def _grid_structure(mesh: TriangleMesh):
    xs = np.unique(mesh.vertices[:, 0])
    ys = np.unique(mesh.vertices[:, 1])
    rows, cols = len(ys), len(xs)
    if rows * cols != mesh.n_vertices or rows < 2 or cols < 2:
        raise ValueError("mesh is not a lattice from generate_grid_mesh")
    expected = np.column_stack([np.tile(xs, rows), np.repeat(ys, cols)])
    if not np.array_equal(mesh.vertices[:, :2], expected):
        raise ValueError("mesh vertices are not in lattice order")
    return rows, cols, xs, ys


def warp_image(source: RasterImage, mesh: TriangleMesh, X_final, width: int | None = None) -> RasterImage:
    """Resample ``source`` through the grid map ``mesh -> X_final``.

    The grid map is bilinear on each cell and leaves vertical positions
    unchanged, so along an output row it is piecewise linear in the source
    column and is inverted per row by linear interpolation. Intensities are
    sampled bilinearly from the source.
    """
    rows, cols, xs, ys = _grid_structure(mesh)
    X = np.asarray(X_final, dtype=float)
    if X.shape[0] != mesh.n_vertices or X.ndim != 2:
        raise ValueError("X_final must have one row per grid vertex")
    if not (np.isclose(xs[-1], source.width - 1) and np.isclose(ys[-1], source.height - 1)
            and xs[0] == 0 and ys[0] == 0):
        raise ValueError("grid does not span the source image")
    if X.shape[1] > 1 and not np.allclose(X[:, 1], mesh.vertices[:, 1], atol=1e-9):
        raise ValueError("grid map moves vertices vertically")
    x = X[:, 0].reshape(rows, cols)
    if np.any(np.diff(x, axis=1) <= 0):
        bad = int(np.sum(np.any(np.diff(x, axis=1) <= 0, axis=1)))
        raise NonMonotoneMapError(f"grid map is not increasing along {bad} rows")
    left = x[:, 0].min()
    if width is None:
        width = _round_half_up(x[:, -1].max() - left) + 1

    src = source.samples
    out = np.empty((source.height, width, source.channels))
    hy = ys[1] - ys[0]
    xo = np.arange(width) + left
    for yrow in range(source.height):
        i = min(int(yrow // hy), rows - 2)
        t = yrow / hy - i
        knots = (1.0 - t) * x[i] + t * x[i + 1]
        u = np.interp(xo, knots, xs)
        near = np.rint(u)
        u = np.where(np.abs(u - near) < 1e-9, near, u)
        u0 = np.clip(np.floor(u).astype(np.int64), 0, source.width - 2)
        f = (u - u0)[:, None]
        out[yrow] = (1.0 - f) * src[yrow, u0] + f * src[yrow, u0 + 1]
    return RasterImage(np.clip(out, 0.0, 1.0))


def retarget(config: RetargetConfig, opts: SolverOptions | None = None):
    """Build, solve and warp; returns ``(image, problem, result)``."""
    problem = build_retarget_problem(config)
    result = solve_constrained(problem, opts=opts)
    if result.full_violations:
        logger.warning("%d grid forward differences fall below epsilon away from the samples",
                       result.full_violations)
    image = warp_image(config.source, problem.mesh, result.X, width=config.target_width)
    return image, problem, result
