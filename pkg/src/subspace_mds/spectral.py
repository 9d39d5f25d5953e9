"""Spectral SMACOF: stress majorization restricted to a band-limited displacement subspace."""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .laplace import mesh_basis
from .metric import GeodesicOracle, MeshGeodesics, SamplingSet, farthest_point_sampling
from .smacof import ConvergenceLog, SmacofOperator, SolverOptions, smacof_solve
from .stress import StressProblem, relative_weights, stress_value, unit_weights

logger = logging.getLogger(__name__)

PINV_RTOL = 1e-10
DEFAULT_LEVEL_OPTIONS = SolverOptions(a_tol=0.0, r_tol=1e-4, maxiter=100)
DEFAULT_FINAL_OPTIONS = SolverOptions(a_tol=0.0, r_tol=1e-5, maxiter=100)


def symmetric_pinv(M, rtol=PINV_RTOL):
    """Pseudo-inverse of a symmetric PSD matrix by eigenvalue thresholding.

    An all-null matrix (e.g. a constant basis column against a Laplacian) has
    the zero matrix as its pseudo-inverse, which pins the coefficients.
    """
    if not np.all(np.isfinite(M)):
        raise np.linalg.LinAlgError("projected system has non-finite entries")
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    top = max(vals.max(initial=0.0), 0.0)
    keep = vals > rtol * top if top > 0 else np.zeros(len(vals), dtype=bool)
    return (vecs[:, keep] / vals[keep]) @ vecs[:, keep].T


@dataclass
class SubspaceState:
    """Cached quantities of the sampled subspace update.

    ``projected_pinv`` is ``(Phi_s' V_s Phi_s)^+`` and ``rhs_fixed`` is ``V_s S X0``.
    """

    alpha: np.ndarray
    X0_sampled: np.ndarray
    basis_sampled: np.ndarray
    Vs: np.ndarray
    projected_pinv: np.ndarray
    rhs_fixed: np.ndarray

    @classmethod
    def build(cls, basis_sampled, X0_sampled, prob_sampled: StressProblem, alpha=None):
        Phi = np.asarray(basis_sampled, dtype=float)
        X0s = np.asarray(X0_sampled, dtype=float)
        if Phi.shape[0] != X0s.shape[0] or Phi.shape[0] != prob_sampled.n_points:
            raise ValueError("sampled basis, sampled X0 and sampled problem disagree on q")
        Vs = prob_sampled.laplacian()
        pinv = symmetric_pinv(Phi.T @ Vs @ Phi)
        if alpha is None:
            alpha = np.zeros((Phi.shape[1], X0s.shape[1]))
        return cls(np.array(alpha, dtype=float), X0s, Phi, Vs, pinv, Vs @ X0s)

    @property
    def X_sampled(self) -> np.ndarray:
        return self.X0_sampled + self.basis_sampled @ self.alpha

    def update(self, bx) -> np.ndarray:
        """``alpha = P^+ Phi_s' (B_s X_s - V_s S X0)`` given ``B_s X_s``."""
        return self.projected_pinv @ (self.basis_sampled.T @ (bx - self.rhs_fixed))


def spectral_step(state: SubspaceState, prob_sampled: StressProblem, X_k_sampled=None) -> np.ndarray:
    """One sampled spectral SMACOF update; returns ``alpha_{k+1}``."""
    X = state.X_sampled if X_k_sampled is None else np.asarray(X_k_sampled, dtype=float)
    _, bx = SmacofOperator(prob_sampled).stress_and_bx(X)
    return state.update(bx)


def spectral_interpolate(basis, alpha) -> np.ndarray:
    """Displacement field ``Phi alpha`` on all vertices."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape[0] != basis.size:
        raise ValueError(f"alpha has {alpha.shape[0]} rows for a {basis.size}-vector basis")
    return basis.apply(alpha)


def regularized_interpolate(sampling: SamplingSet, target_sampled, laplacian, lam: float) -> np.ndarray:
    """Field matching the sampled targets with a Laplacian smoothness penalty.

    Solves ``(S'S + lam L) delta = S' target``, the normal equations of
    ``min ||S delta - target||^2 + lam <delta, L delta>``.
    """
    if lam <= 0:
        raise ValueError("regularization weight must be positive")
    if sampling.size == 0:
        raise ValueError("at least one sample is required")
    n = sampling.source_mesh_size
    L = sp.csr_matrix(laplacian, dtype=float)
    if L.shape != (n, n):
        raise ValueError(f"Laplacian of shape {L.shape} does not match {n} points")
    target = np.asarray(target_sampled, dtype=float)
    flat = target.ndim == 1
    target = target.reshape(sampling.size, -1)
    sel = np.zeros(n)
    np.add.at(sel, sampling.indices, 1.0)
    rhs = np.zeros((n, target.shape[1]))
    np.add.at(rhs, sampling.indices, target)
    system = (sp.diags(sel) + lam * L).tocsc()
    try:
        solve = spla.factorized(system)
    except RuntimeError:
        raise np.linalg.LinAlgError("interpolation system is singular") from None
    delta = np.column_stack([solve(rhs[:, c]) for c in range(rhs.shape[1])])
    if not np.all(np.isfinite(delta)):
        raise np.linalg.LinAlgError("interpolation system is singular")
    return delta[:, 0] if flat else delta


class IdentityBasis:
    """The complete basis (p = N); spectral SMACOF then reduces to plain SMACOF on the samples."""

    def __init__(self, n):
        self.n_points = self.size = n
        self.values = np.zeros(n)

    def take(self, rows):
        rows = np.asarray(rows)
        out = np.zeros((len(rows), self.n_points))
        out[np.arange(len(rows)), rows] = 1.0
        return out

    def apply(self, alpha):
        return np.asarray(alpha, dtype=float)


def geodesic_problem_builder(weights="unit", dim=3):
    """Sampled stress problem from FPS distances, with unit or relative (1/d^2) weights."""
    if weights not in ("unit", "relative"):
        raise ValueError(f"unknown weight model {weights!r}")

    def build(sampling: SamplingSet) -> StressProblem:
        d = sampling.distances
        w = unit_weights(len(d)) if weights == "unit" else relative_weights(d)
        return StressProblem(d, w, dim)

    return build


def spectral_smacof(mesh, X0, prob_builder, p, q, opts: SolverOptions | None = None, *,
                    basis=None, geodesics: GeodesicOracle | None = None, seed=0, level=0,
                    c=2.0, full_problem: StressProblem | None = None, cache_dir=None):
    """Subspace least-squares MDS on ``q`` farthest-point samples with ``p`` basis vectors.

    Iterates the sampled spectral update under the three-clause rule on the
    sampled stress, then returns ``X0 + Phi alpha`` for every vertex together
    with the log (sampled stress per iteration). ``basis`` may hold a
    precomputed eigenbasis with at least ``p`` vectors; ``geodesics`` a shared
    distance oracle. When ``p`` equals the number of vertices the complete
    basis is used and the update is a plain SMACOF step on the samples.
    """
    opts = opts or SolverOptions(a_tol=0.0, r_tol=1e-4, maxiter=100)
    X0 = np.asarray(X0, dtype=float)
    n = X0.shape[0]
    if not 1 <= q <= n:
        raise ValueError(f"number of samples q={q} must lie in [1, {n}]")
    if not 1 <= p <= n:
        raise ValueError(f"basis size p={p} must lie in [1, {n}]")
    if q < n and q < c * p:
        warnings.warn(f"q={q} violates the sampling criterion q >= {c:g} p = {c * p:g}", stacklevel=2)
    t0 = time.perf_counter()
    oracle = geodesics if geodesics is not None else MeshGeodesics(mesh)
    if q == n:
        # every vertex is a sample; one batched sweep replaces n greedy rounds
        sampling = SamplingSet(np.arange(n), oracle.all_pairs(), n)
    else:
        sampling = farthest_point_sampling(oracle, q, seed)
    if p >= n:
        phi = IdentityBasis(n)
    elif basis is None:
        phi = mesh_basis(mesh, p, cache_dir=cache_dir)
    else:
        phi = basis if basis.size == p else basis.truncated(p)
    prob_s = prob_builder(sampling)
    X0s = X0[sampling.indices]
    setup = time.perf_counter() - t0

    if p >= n:
        # complete basis: alpha moves sampled rows freely and keeps their mean
        t1 = time.perf_counter()
        Xs, log = smacof_solve(X0s, prob_s, opts, level=level)
        Xs = Xs + X0s.mean(axis=0)
        X = X0.copy()
        X[sampling.indices] = Xs
        solve_time = time.perf_counter() - t1
    else:
        t1 = time.perf_counter()
        state = SubspaceState.build(phi.take(sampling.indices), X0s, prob_s)
        op = SmacofOperator(prob_s)
        log = ConvergenceLog()
        sigma, bx = op.stress_and_bx(state.X_sampled)
        log.append(0, sigma, 0.0, level)
        prev = None
        k = 1
        while opts.keep_going(k, sigma, prev):
            alpha = state.update(bx)
            Xs = X0s + state.basis_sampled @ alpha
            sigma_new, bx_new = op.stress_and_bx(Xs)
            if sigma_new > sigma:
                # round-off at a stationary point; keep the previous iterate
                break
            state.alpha, bx, prev, sigma = alpha, bx_new, sigma, sigma_new
            log.append(k, sigma, time.perf_counter() - t1, level)
            k += 1
        X = X0 + spectral_interpolate(phi, state.alpha)
        solve_time = time.perf_counter() - t1
    for r in log.records:
        r.seconds += setup
    log.setup_seconds = setup
    if full_problem is not None:
        log.boundaries.append((level, stress_value(X, full_problem), setup + solve_time))
    logger.debug("level %d: q=%d p=%d, %d steps, sampled stress %.6g",
                 level, q, p, log.n_steps, log.records[-1].stress)
    return X, log


@dataclass
class MultiresSchedule:
    """Paired spatial (q) and spectral (p) resolution levels.

    Either list may contain the string ``"N"`` for the number of vertices, and
    a single-entry list is broadcast against the other. Every level with
    ``q < N`` must satisfy the sampling criterion ``q >= c p``.
    """

    q_levels: list
    p_levels: list
    c: float = 2.0
    levels: list = field(init=False, default_factory=list)

    def resolve(self, n: int) -> list:
        def as_int(v):
            if isinstance(v, str):
                if v.strip().upper() != "N":
                    raise ValueError(f"bad schedule entry {v!r}")
                return n
            return int(v)

        qs = [as_int(v) for v in self.q_levels]
        ps = [as_int(v) for v in self.p_levels]
        if len(qs) == 1 and len(ps) > 1:
            qs = qs * len(ps)
        if len(ps) == 1 and len(qs) > 1:
            ps = ps * len(qs)
        if len(qs) != len(ps) or not qs:
            raise ValueError("q and p schedules must have equal length (or one of them length 1)")
        if any(b < a for a, b in zip(qs, qs[1:])) or any(b < a for a, b in zip(ps, ps[1:])):
            raise ValueError("schedules must be nondecreasing")
        for q, p in zip(qs, ps):
            if not (1 <= p <= n and 1 <= q <= n):
                raise ValueError(f"level (q={q}, p={p}) is out of range for {n} points")
            if q < n and q < self.c * p:
                raise ValueError(f"level (q={q}, p={p}) violates the sampling criterion q >= {self.c:g} p")
        if not 1.0 < self.c <= 2.0:
            warnings.warn(f"sampling ratio c={self.c:g} lies outside (1, 2]", stacklevel=2)
        self.levels = list(zip(qs, ps))
        return self.levels


def multires_solve(mesh, X0, prob_builder, schedule: MultiresSchedule, opts_per_level=None, *,
                   basis=None, geodesics: GeodesicOracle | None = None, seed=0,
                   full_problem: StressProblem | None = None, cache_dir=None):
    """Run spectral SMACOF level by level, warm-starting each level from the previous result.

    The eigenbasis is computed once for the largest ``p < N`` and truncated per
    level; FPS distance rows are shared through one geodesic oracle. Log times
    are cumulative, setup included; ``log.setup_seconds`` sums the per-level setup.
    """
    X0 = np.asarray(X0, dtype=float)
    n = X0.shape[0]
    levels = schedule.resolve(n)
    if opts_per_level is None:
        opts_per_level = [DEFAULT_LEVEL_OPTIONS] * (len(levels) - 1) + [DEFAULT_FINAL_OPTIONS]
    if len(opts_per_level) != len(levels):
        raise ValueError("need one SolverOptions per level")
    t0 = time.perf_counter()
    oracle = geodesics if geodesics is not None else MeshGeodesics(mesh)
    p_max = max((p for _, p in levels if p < n), default=0)
    if p_max and (basis is None or basis.size < p_max):
        basis = mesh_basis(mesh, p_max, cache_dir=cache_dir)
    elapsed = time.perf_counter() - t0
    log = ConvergenceLog(setup_seconds=elapsed)
    X = X0
    it = 0
    for lvl, ((q, p), opts) in enumerate(zip(levels, opts_per_level)):
        X, lvl_log = spectral_smacof(mesh, X, prob_builder, p, q, opts, basis=basis, geodesics=oracle,
                                     seed=seed, level=lvl, c=schedule.c, full_problem=full_problem)
        log.extend(lvl_log, iteration_offset=it, time_offset=elapsed)
        log.setup_seconds += lvl_log.setup_seconds
        elapsed += lvl_log.records[-1].seconds
        it += lvl_log.records[-1].iteration
    return X, log
