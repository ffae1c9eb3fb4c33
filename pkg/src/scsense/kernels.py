"""Numerical core: simplex projections, simplex-constrained least squares, and
the convex subproblems behind the sensitivity bounds.

Everything here is a pure function of its inputs. Iterative pieces share one
engine, an away-step Frank-Wolfe loop on quadratics over the probability
simplex, plus scalar bisection on Lagrange multipliers for the single-extra-
constraint problems. Dykstra's alternating projections is provided as an
independent route onto intersections of convex sets and is used by the test
suite to cross-check the bisection solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit


class KernelError(Exception):
    """Base class for solver failures and contract violations."""


class DimensionMismatch(KernelError):
    pass


class ZeroNormal(KernelError):
    pass


class Infeasible(KernelError):
    pass


class NoConvergence(KernelError):
    """Iteration budget exhausted. Carries the best iterate and its gap."""

    def __init__(self, message: str, weights: np.ndarray | None = None, gap: float = math.nan):
        super().__init__(message)
        self.weights = weights
        self.gap = gap


class DimensionTooLarge(KernelError):
    pass


@dataclass(frozen=True)
class SolveSettings:
    """Shared solver tolerances.

    feas_tol bounds constraint violation, opt_tol the relative objective
    convergence (Frank-Wolfe gap against 1 + objective), max_iters the total
    iteration budget of any single solve, bisect_tol the relative width at
    which multiplier bisection stops.
    """

    feas_tol: float = 1e-9
    opt_tol: float = 1e-8
    max_iters: int = 100_000
    bisect_tol: float = 1e-10

    def __post_init__(self):
        for name in ("feas_tol", "opt_tol", "bisect_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_iters <= 0:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")


DEFAULT_SETTINGS = SolveSettings()


@dataclass(frozen=True)
class TargetHyperplane:
    """The set {w : normal @ w = offset}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=np.float64))
        object.__setattr__(self, "offset", float(self.offset))
        if self.normal.ndim != 1 or self.normal.size < 1:
            raise DimensionMismatch("hyperplane normal must be a nonempty vector")


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of v onto {w >= 0, sum w = 1}.

    Sort-based exact algorithm: find the largest support size rho for which
    the shifted entries stay positive, then clip.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise DimensionMismatch("project_simplex expects a nonempty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    mask = u > css / k
    rho = int(np.nonzero(mask)[0][-1])
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def ball_linear_extremes(c: np.ndarray, center: np.ndarray, radius: float) -> tuple[float, float]:
    """Extremes of c @ w over the closed ball ||w - center|| <= radius."""
    c = np.asarray(c, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    if c.shape != center.shape:
        raise DimensionMismatch(f"c has shape {c.shape}, center has shape {center.shape}")
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    mid = float(c @ center)
    span = radius * float(np.linalg.norm(c))
    return mid - span, mid + span


def hyperplane_project(w0: np.ndarray, h: TargetHyperplane) -> tuple[np.ndarray, float]:
    """Closed-form projection of w0 onto the hyperplane, with its distance."""
    w0 = np.asarray(w0, dtype=np.float64)
    a = h.normal
    if w0.shape != a.shape:
        raise DimensionMismatch(f"w0 has shape {w0.shape}, normal has shape {a.shape}")
    nrm2 = float(a @ a)
    if nrm2 == 0.0:
        raise ZeroNormal("hyperplane normal has zero norm")
    resid = float(a @ w0) - h.offset
    w = w0 - (resid / nrm2) * a
    return w, abs(resid) / math.sqrt(nrm2)


# ---------------------------------------------------------------------------
# Away-step Frank-Wolfe engine for f(w) = 0.5 w'Gw + q'w over the simplex.
# ---------------------------------------------------------------------------

_CHUNK = 8192


@njit(cache=True, nogil=True)
def _fw_chunk(G, q, w, gw, wGw, gap_tol, max_iters):  # pragma: no cover - jitted
    J = w.shape[0]
    it = 0
    while it < max_iters:
        s = 0
        smin = gw[0] + q[0]
        a = -1
        amax = -1e308
        gdotw = 0.0
        for k in range(J):
            gk = gw[k] + q[k]
            if gk < smin:
                smin = gk
                s = k
            if w[k] > 1e-15 and gk > amax:
                amax = gk
                a = k
            gdotw += gk * w[k]
        gap = gdotw - smin
        if gap <= gap_tol:
            return gap, it, wGw
        gap_away = amax - gdotw
        use_away = gap_away > gap and a >= 0 and w[a] < 1.0 - 1e-15
        if use_away:
            # direction w - e_a, curvature d'Gd
            dGd = wGw - 2.0 * gw[a] + G[a, a]
            gmax = w[a] / (1.0 - w[a])
            if dGd <= 0.0:
                gamma = gmax
            else:
                gamma = gap_away / dGd
                if gamma > gmax:
                    gamma = gmax
            gwa = gw[a]
            one_pg = 1.0 + gamma
            for k in range(J):
                w[k] *= one_pg
                gw[k] = one_pg * gw[k] - gamma * G[k, a]
            w[a] -= gamma
            if w[a] < 0.0:
                w[a] = 0.0
            wGw = one_pg * one_pg * wGw - 2.0 * gamma * one_pg * gwa + gamma * gamma * G[a, a]
        else:
            # direction e_s - w
            dGd = G[s, s] - 2.0 * gw[s] + wGw
            if dGd <= 0.0:
                gamma = 1.0
            else:
                gamma = gap / dGd
                if gamma > 1.0:
                    gamma = 1.0
            gws = gw[s]
            one_mg = 1.0 - gamma
            for k in range(J):
                w[k] *= one_mg
                gw[k] = one_mg * gw[k] + gamma * G[k, s]
            w[s] += gamma
            wGw = one_mg * one_mg * wGw + 2.0 * gamma * one_mg * gws + gamma * gamma * G[s, s]
        it += 1
    # recompute the gap for the caller
    s = 0
    smin = gw[0] + q[0]
    gdotw = 0.0
    for k in range(J):
        gk = gw[k] + q[k]
        if gk < smin:
            smin = gk
        gdotw += gk * w[k]
    return gdotw - smin, it, wGw


def _face_correction(G: np.ndarray, q: np.ndarray, w: np.ndarray) -> np.ndarray | None:
    """Exact minimizer on the affine hull of the current support, with
    negative coordinates dropped iteratively. A candidate only: the caller
    accepts it when it is feasible and decreases the objective. This is the
    fully-corrective companion to the Frank-Wolfe sweeps; it rescues the
    slow zigzag regime on nearly collinear columns."""
    support = list(np.nonzero(w > 1e-12)[0])
    if not support:
        return None
    for _ in range(len(support) + 1):
        k = len(support)
        A = np.zeros((k + 1, k + 1))
        A[:k, :k] = G[np.ix_(support, support)]
        A[:k, k] = 1.0
        A[k, :k] = 1.0
        b = np.concatenate([-q[support], [1.0]])
        try:
            sol = np.linalg.lstsq(A, b, rcond=None)[0]
        except np.linalg.LinAlgError:  # pragma: no cover - lstsq rarely fails
            return None
        ws = sol[:k]
        if ws.min() >= -1e-12:
            ws = np.maximum(ws, 0.0)
            total = ws.sum()
            if not total > 0:
                return None
            out = np.zeros_like(w)
            out[support] = ws / total
            return out
        support.pop(int(np.argmin(ws)))
        if not support:
            return None
    return None


def _face_kkt(G: np.ndarray, q: np.ndarray, support: list[int]) -> np.ndarray:
    k = len(support)
    A = np.zeros((k + 1, k + 1))
    A[:k, :k] = G[np.ix_(support, support)]
    A[:k, k] = 1.0
    A[k, :k] = 1.0
    b = np.concatenate([-q[support], [1.0]])
    return np.linalg.lstsq(A, b, rcond=None)[0][:k]


def _active_set_polish(
    G: np.ndarray,
    q: np.ndarray,
    w: np.ndarray,
    settings: SolveSettings,
    f_const: float,
    sqrt_scale: bool,
) -> tuple[np.ndarray, float, float]:
    """Primal active-set descent from a feasible iterate.

    Rescues the regime Frank-Wolfe cannot finish in float64: a face-optimal
    point whose uniform support gradient exceeds an off-support coordinate
    by less than the curvature allows to exploit per step. Alternates exact
    face solves with single support swaps, keeping every iterate feasible,
    and stops at the same gap test the main loop uses. Iteration count is
    bounded, so cycling degrades to best-effort instead of hanging.
    """
    n = w.size
    w = w.copy()
    support = list(np.nonzero(w > 1e-12)[0]) or [_best_vertex(G, q)]
    best: tuple[float, np.ndarray] | None = None
    for _ in range(3 * n + 16):
        ws = _face_kkt(G, q, support)
        if ws.min() < -1e-12:
            cur = w[support]
            delta = ws - cur
            blocking = [
                (cur[j] / (cur[j] - ws[j]), j)
                for j in range(len(support))
                if ws[j] < -1e-12 and cur[j] - ws[j] > 0
            ]
            if not blocking:
                break
            t = min(max(b[0], 0.0) for b in blocking)
            stepped = np.maximum(cur + min(t, 1.0) * delta, 0.0)
            w[:] = 0.0
            w[support] = stepped
            support = [s for s, v in zip(support, stepped) if v > 1e-12]
            if not support:
                break
            continue
        w[:] = 0.0
        w[support] = np.maximum(ws, 0.0)
        total = w.sum()
        if not total > 0:
            break
        w /= total
        gw = G @ w
        f = 0.5 * float(w @ gw) + float(q @ w) + f_const
        grad = gw + q
        gap = float(grad @ w - grad.min())
        if best is None or f < best[0]:
            best = (f, w.copy())
        scale = math.sqrt(max(2.0 * f, 0.0)) if sqrt_scale else abs(f)
        if gap <= settings.opt_tol * (1.0 + scale):
            return w, f, gap
        entering = int(np.argmin(grad))
        if entering in support:
            break
        support.append(entering)
    if best is not None:
        w = best[1]
    gw = G @ w
    f = 0.5 * float(w @ gw) + float(q @ w) + f_const
    grad = gw + q
    return w, f, float(grad @ w - grad.min())


def _solve_simplex_quadratic(
    G: np.ndarray,
    q: np.ndarray,
    w0: np.ndarray,
    settings: SolveSettings,
    f_const: float = 0.0,
    sqrt_scale: bool = False,
) -> tuple[np.ndarray, float, float]:
    """Minimize 0.5 w'Gw + q'w + f_const over the simplex from w0.

    Away-step Frank-Wolfe sweeps interleaved with exact corrections on the
    identified support. Returns (w, f, gap). Stops when the Frank-Wolfe gap
    falls below opt_tol * (1 + scale) where scale is |f| or, with
    sqrt_scale, the least-squares objective sqrt(2 max(f, 0)).
    """
    G = np.ascontiguousarray(G, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    w = np.array(w0, dtype=np.float64).copy()
    if w.shape[0] == 1:
        w[0] = 1.0
        f = 0.5 * float(G[0, 0]) + float(q[0]) + f_const
        return w, f, 0.0
    spent = 0
    corrected = False
    while True:
        # refresh accumulated quantities exactly once per chunk
        gw = G @ w
        wGw = float(w @ gw)
        f = 0.5 * wGw + float(q @ w) + f_const
        if corrected:
            corrected = False
        else:
            cand = _face_correction(G, q, w)
            if cand is not None:
                f_cand = 0.5 * float(cand @ (G @ cand)) + float(q @ cand) + f_const
                if f_cand < f:
                    w, f = cand, f_cand
                    gw = G @ w
                    wGw = float(w @ gw)
                    corrected = True
        scale = math.sqrt(max(2.0 * f, 0.0)) if sqrt_scale else abs(f)
        gap_tol = settings.opt_tol * (1.0 + scale)
        grad = gw + q
        gap = float(grad @ w - grad.min())
        if gap <= gap_tol:
            return w, f, gap
        if spent >= settings.max_iters:
            w_p, f_p, gap_p = _active_set_polish(G, q, w, settings, f_const, sqrt_scale)
            if f_p <= f:
                w, f, gap = w_p, f_p, gap_p
                scale = math.sqrt(max(2.0 * f, 0.0)) if sqrt_scale else abs(f)
                if gap <= settings.opt_tol * (1.0 + scale):
                    return w, f, gap
            raise NoConvergence(
                f"simplex quadratic solve stalled at gap {gap:.3e} after {spent} iterations",
                weights=w,
                gap=gap,
            )
        budget = min(_CHUNK, settings.max_iters - spent)
        gap, used, wGw = _fw_chunk(G, q, w, gw, wGw, gap_tol, budget)
        spent += max(int(used), 1)


def _best_vertex(G: np.ndarray, q: np.ndarray) -> int:
    # f(e_k) = 0.5 G_kk + q_k up to the constant term
    return int(np.argmin(0.5 * np.diag(G) + q))


def simplex_ls(X: np.ndarray, x: np.ndarray, settings: SolveSettings = DEFAULT_SETTINGS) -> tuple[np.ndarray, float]:
    """Least squares over the simplex: argmin ||x - Xw|| s.t. w >= 0, sum w = 1.

    Away-step Frank-Wolfe with exact line search on the Gram matrix,
    initialized at the best single column.
    """
    X = np.asarray(X, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if X.ndim != 2 or x.ndim != 1 or X.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"X has shape {X.shape}, x has shape {x.shape}")
    n, J = X.shape
    if J < 1:
        raise DimensionMismatch("X must have at least one column")
    if J == 1:
        w = np.ones(1)
        return w, float(np.linalg.norm(x - X[:, 0]))
    G = X.T @ X
    q = -(X.T @ x)
    f_const = 0.5 * float(x @ x)
    w0 = np.zeros(J)
    w0[_best_vertex(G, q)] = 1.0
    w, f, _ = _solve_simplex_quadratic(G, q, w0, settings, f_const=f_const, sqrt_scale=True)
    return w, math.sqrt(max(2.0 * f, 0.0))


# ---------------------------------------------------------------------------
# Exact projection onto simplex-and-hyperplane, by bisection on the
# hyperplane multiplier (each trial point is a closed-form simplex projection).
# ---------------------------------------------------------------------------


def _hyperplane_band(a: np.ndarray, feas_tol: float) -> tuple[float, float, float]:
    lo = float(a.min())
    hi = float(a.max())
    slack = feas_tol * (1.0 + max(abs(lo), abs(hi)))
    return lo, hi, slack


def project_simplex_hyperplane(
    v: np.ndarray, h: TargetHyperplane, settings: SolveSettings = DEFAULT_SETTINGS
) -> tuple[np.ndarray, float]:
    """Project v onto simplex ∩ {a @ w = b}. Returns (point, distance).

    The map mu -> a @ project_simplex(v + mu a) is continuous and
    nondecreasing, so the equality multiplier is found by bisection;
    the final point interpolates the bracket endpoints to satisfy the
    hyperplane exactly. Raises Infeasible when b is outside the range of a
    over the simplex (its entrywise min and max).
    """
    v = np.asarray(v, dtype=np.float64)
    a = h.normal
    b = h.offset
    if v.shape != a.shape:
        raise DimensionMismatch(f"v has shape {v.shape}, normal has shape {a.shape}")
    nrm = float(np.linalg.norm(a))
    if nrm == 0.0:
        raise ZeroNormal("hyperplane normal has zero norm")
    lo, hi, slack = _hyperplane_band(a, settings.feas_tol)
    if b < lo - slack or b > hi + slack:
        raise Infeasible(f"offset {b} lies outside the feasible band [{lo}, {hi}]")
    b = min(max(b, lo), hi)

    def point(mu: float) -> np.ndarray:
        return project_simplex(v + mu * a)

    def phi(w: np.ndarray) -> float:
        return float(a @ w)

    # vertices of the extreme faces handle b at (or numerically past) the band edge
    if hi - b <= 0.0 or b - lo <= 0.0:
        face = a >= hi - 0.0 if hi - b <= 0.0 else a <= lo + 0.0
        w = np.zeros_like(v)
        sub = project_simplex(v[face])
        w[np.nonzero(face)[0]] = sub
        return w, float(np.linalg.norm(w - v))

    mu_lo, mu_hi = -1.0, 1.0
    w_lo, w_hi = point(mu_lo), point(mu_hi)
    expansions = 0
    while phi(w_lo) > b:
        mu_lo *= 8.0
        w_lo = point(mu_lo)
        expansions += 1
        if expansions > 300:
            raise NoConvergence("bracket expansion failed in project_simplex_hyperplane")
    while phi(w_hi) < b:
        mu_hi *= 8.0
        w_hi = point(mu_hi)
        expansions += 1
        if expansions > 300:
            raise NoConvergence("bracket expansion failed in project_simplex_hyperplane")
    while mu_hi - mu_lo > settings.bisect_tol * (1.0 + abs(mu_lo) + abs(mu_hi)):
        mu = 0.5 * (mu_lo + mu_hi)
        w = point(mu)
        if phi(w) < b:
            mu_lo, w_lo = mu, w
        else:
            mu_hi, w_hi = mu, w
    # interpolate the bracket to land on the hyperplane exactly
    p_lo, p_hi = phi(w_lo), phi(w_hi)
    if p_hi - p_lo > 0:
        t = min(max((b - p_lo) / (p_hi - p_lo), 0.0), 1.0)
    else:
        t = 0.5
    w = (1.0 - t) * w_lo + t * w_hi
    return w, float(np.linalg.norm(w - v))


def min_linear_on_ball_simplex(
    c: np.ndarray,
    center: np.ndarray,
    radius: float,
    settings: SolveSettings = DEFAULT_SETTINGS,
) -> tuple[float, np.ndarray]:
    """Minimize c @ w over the simplex intersected with ||w - center|| <= radius.

    When the ball constraint binds, the optimum is project_simplex(center -
    c / lam) for the multiplier lam > 0 making the ball tight; lam is found
    by bisection and the bracket endpoints are interpolated to land on the
    sphere. Maximization is the same problem with -c.
    """
    c = np.asarray(c, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    if c.shape != center.shape:
        raise DimensionMismatch(f"c has shape {c.shape}, center has shape {center.shape}")
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    p0 = project_simplex(center)
    d0 = float(np.linalg.norm(p0 - center))
    if d0 > radius + settings.feas_tol * (1.0 + radius):
        raise Infeasible(f"ball of radius {radius} does not reach the simplex (gap {d0 - radius:.3e})")
    if radius - d0 <= 0.0:
        return float(c @ p0), p0
    # closest point of the unconstrained minimizing face; if it is inside the
    # ball the ball constraint is slack
    cmin = float(c.min())
    face = np.nonzero(c <= cmin)[0]
    w_face = np.zeros_like(center)
    w_face[face] = project_simplex(center[face])
    if float(np.linalg.norm(w_face - center)) <= radius:
        return cmin, w_face

    def point(lam: float) -> np.ndarray:
        return project_simplex(center - c / lam)

    def dist(w: np.ndarray) -> float:
        return float(np.linalg.norm(w - center))

    cnrm = float(np.linalg.norm(c))
    lam_hi = max(cnrm / max(radius, 1e-300), 1.0)
    w_hi = point(lam_hi)
    expansions = 0
    while dist(w_hi) > radius:
        lam_hi *= 8.0
        w_hi = point(lam_hi)
        expansions += 1
        if expansions > 300:
            raise NoConvergence("multiplier expansion failed in min_linear_on_ball_simplex")
    lam_lo = lam_hi
    w_lo = w_hi
    while dist(w_lo) <= radius:
        lam_lo /= 8.0
        w_lo = point(lam_lo)
        expansions += 1
        if expansions > 600 or lam_lo < 1e-280:
            # the whole minimizing ray stays inside the ball
            return float(c @ w_lo), w_lo
    while lam_hi - lam_lo > settings.bisect_tol * (lam_lo + lam_hi):
        lam = 0.5 * (lam_lo + lam_hi)
        w = point(lam)
        if dist(w) > radius:
            lam_lo, w_lo = lam, w
        else:
            lam_hi, w_hi = lam, w
    # interpolate the bracket chord to touch the sphere exactly
    d = w_lo - w_hi
    e = w_hi - center
    aa = float(d @ d)
    if aa > 0:
        bb = 2.0 * float(e @ d)
        cc = float(e @ e) - radius * radius
        disc = max(bb * bb - 4.0 * aa * cc, 0.0)
        t = (-bb + math.sqrt(disc)) / (2.0 * aa)
        t = min(max(t, 0.0), 1.0)
    else:
        t = 0.0
    w = w_hi + t * d
    return float(c @ w), w


# ---------------------------------------------------------------------------
# Least squares over simplex ∩ hyperplane, by bisection on the equality
# multiplier with warm-started Frank-Wolfe inner solves.
# ---------------------------------------------------------------------------


def simplex_ls_on_hyperplane(
    X: np.ndarray,
    x: np.ndarray,
    h: TargetHyperplane,
    settings: SolveSettings = DEFAULT_SETTINGS,
) -> tuple[np.ndarray, float]:
    """Minimize ||x - Xw|| over the simplex cut by {a @ w = b}.

    The inner problem min 0.5||x - Xw||^2 + mu a @ w over the simplex is
    solved for a scalar multiplier mu; a @ w(mu) is nonincreasing in mu, so
    the equality is met by bisection. Raises Infeasible when the hyperplane
    misses the simplex.
    """
    X = np.asarray(X, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    a = h.normal
    b = h.offset
    if X.ndim != 2 or X.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"X has shape {X.shape}, x has shape {x.shape}")
    if X.shape[1] != a.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[1]} columns, normal has {a.shape[0]} entries")
    lo, hi, slack = _hyperplane_band(a, settings.feas_tol)
    if b < lo - slack or b > hi + slack:
        raise Infeasible(f"offset {b} lies outside the feasible band [{lo}, {hi}]")
    b = min(max(b, lo), hi)
    J = X.shape[1]

    # a numerically extreme offset pins w to the matching face of the simplex
    edge = 1e-12 * (1.0 + max(abs(lo), abs(hi)))
    for bound, side in ((hi, a >= hi - edge), (lo, a <= lo + edge)):
        if abs(b - bound) <= edge:
            idx = np.nonzero(side)[0]
            if idx.size == 1:
                w = np.zeros(J)
                w[idx[0]] = 1.0
                return w, float(np.linalg.norm(x - X @ w))
            w_sub, obj = simplex_ls(X[:, idx], x, settings)
            w = np.zeros(J)
            w[idx] = w_sub
            return w, obj

    G = X.T @ X
    q0 = -(X.T @ x)
    f_const = 0.5 * float(x @ x)
    w0 = np.zeros(J)
    w0[_best_vertex(G, q0)] = 1.0

    def inner(mu: float, warm: np.ndarray) -> np.ndarray:
        # bracket decisions below re-measure phi on the returned point, so a
        # budget-exhausted best iterate keeps the bisection sound
        try:
            w, _, _ = _solve_simplex_quadratic(G, q0 + mu * a, warm, settings, f_const=f_const)
        except NoConvergence as exc:
            if exc.weights is None:
                raise
            w = exc.weights
        return w

    def phi(w: np.ndarray) -> float:
        return float(a @ w)

    w_mid = inner(0.0, w0)
    p_mid = phi(w_mid)
    scale = (1.0 + float(np.abs(q0).max())) / (1.0 + float(np.abs(a).max()))
    if p_mid > b:
        # push a @ w down with mu > 0
        mu_lo, w_lo = 0.0, w_mid
        mu_hi = scale
        w_hi = inner(mu_hi, w_lo)
        expansions = 0
        while phi(w_hi) > b:
            mu_lo, w_lo = mu_hi, w_hi
            mu_hi *= 8.0
            w_hi = inner(mu_hi, w_hi)
            expansions += 1
            if expansions > 200:
                break
    elif p_mid < b:
        mu_hi, w_hi = 0.0, w_mid
        mu_lo = -scale
        w_lo = inner(mu_lo, w_hi)
        expansions = 0
        while phi(w_lo) < b:
            mu_hi, w_hi = mu_lo, w_lo
            mu_lo *= 8.0
            w_lo = inner(mu_lo, w_lo)
            expansions += 1
            if expansions > 200:
                break
    else:
        return w_mid, float(np.linalg.norm(x - X @ w_mid))

    # bisect: phi(w(mu_lo)) >= b >= phi(w(mu_hi)), phi nonincreasing in mu
    while mu_hi - mu_lo > settings.bisect_tol * (1.0 + abs(mu_lo) + abs(mu_hi)):
        mu = 0.5 * (mu_lo + mu_hi)
        w = inner(mu, 0.5 * (w_lo + w_hi))
        if phi(w) >= b:
            mu_lo, w_lo = mu, w
        else:
            mu_hi, w_hi = mu, w
    p_lo, p_hi = phi(w_lo), phi(w_hi)
    if p_lo - p_hi > 0:
        t = min(max((p_lo - b) / (p_lo - p_hi), 0.0), 1.0)
    else:
        t = 0.5
    w = (1.0 - t) * w_lo + t * w_hi
    return w, float(np.linalg.norm(x - X @ w))


# ---------------------------------------------------------------------------
# Linear extremes under a pre-treatment error cap, by bisection on the
# penalty multiplier with warm-started Frank-Wolfe inner solves.
# ---------------------------------------------------------------------------


def _min_linear_under_cap(
    c: np.ndarray,
    X: np.ndarray,
    x: np.ndarray,
    cap: float,
    settings: SolveSettings,
    w_star: np.ndarray,
) -> float:
    """min c @ w over {w in simplex : ||x - Xw|| <= cap}; w_star is feasible."""
    G = X.T @ X
    q_ls = -(X.T @ x)
    f_const = 0.5 * float(x @ x)

    def err(w: np.ndarray) -> float:
        return float(np.linalg.norm(x - X @ w))

    # smallest error attainable on the minimizing face of c alone; if that
    # face already satisfies the cap the simplex is the only active constraint
    cmin = float(c.min())
    face = np.nonzero(c <= cmin)[0]
    if face.size == X.shape[1]:
        return cmin
    _, face_err = simplex_ls(X[:, face], x, settings)
    if face_err <= cap:
        return cmin

    def inner(lam: float, warm: np.ndarray) -> np.ndarray:
        # the expansion and bisection loops re-measure err on the returned
        # point, so a budget-exhausted best iterate keeps the bracket sound
        try:
            w, _, _ = _solve_simplex_quadratic(lam * G, lam * q_ls + c, warm, settings, f_const=lam * f_const)
        except NoConvergence as exc:
            if exc.weights is None:
                raise
            w = exc.weights
        return w

    scale = (1.0 + float(np.abs(c).max())) / (1.0 + float(np.abs(q_ls).max()))
    lam_hi = scale
    w_hi = inner(lam_hi, w_star)
    expansions = 0
    while err(w_hi) > cap:
        lam_hi *= 8.0
        w_hi = inner(lam_hi, w_hi)
        expansions += 1
        if expansions > 200:
            # cap is at (or numerically below) the least possible error: the
            # feasible set has collapsed onto the optimal face
            return min(float(c @ w_hi), float(c @ w_star))
    lam_lo = lam_hi
    w_lo = w_hi
    while err(w_lo) <= cap:
        lam_lo /= 8.0
        w_lo = inner(lam_lo, w_lo)
        expansions += 1
        if expansions > 400 or lam_lo < 1e-280:
            return float(c @ w_lo)
    while lam_hi - lam_lo > settings.bisect_tol * (lam_lo + lam_hi):
        lam = 0.5 * (lam_lo + lam_hi)
        w = inner(lam, 0.5 * (w_lo + w_hi))
        if err(w) > cap:
            lam_lo, w_lo = lam, w
        else:
            lam_hi, w_hi = lam, w
    # interpolate the bracket chord in residual space to sit on the cap
    r_hi = X @ w_hi - x
    r_d = X @ (w_lo - w_hi)
    aa = float(r_d @ r_d)
    if aa > 0:
        bb = 2.0 * float(r_hi @ r_d)
        cc = float(r_hi @ r_hi) - cap * cap
        disc = max(bb * bb - 4.0 * aa * cc, 0.0)
        t = (-bb + math.sqrt(disc)) / (2.0 * aa)
        t = min(max(t, 0.0), 1.0)
    else:
        t = 1.0
    w = w_hi + t * (w_lo - w_hi)
    val = float(c @ w)
    # never report worse than an exactly feasible point we already hold
    return min(val, float(c @ w_hi), float(c @ w_star))


def extremize_linear_under_error_cap(
    c: np.ndarray,
    X: np.ndarray,
    x: np.ndarray,
    cap: float,
    settings: SolveSettings = DEFAULT_SETTINGS,
    ls_solution: tuple[np.ndarray, float] | None = None,
) -> tuple[float, float]:
    """Extremes of c @ w over {w in simplex : ||x - Xw|| <= cap}.

    cap must be at least the simplex least-squares optimum (pass a
    precomputed (weights, error) pair as ls_solution to skip refitting).
    A cap of +inf reduces to the simplex extremes of c.
    """
    c = np.asarray(c, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != x.shape[0] or X.shape[1] != c.shape[0]:
        raise DimensionMismatch(f"shapes disagree: X {X.shape}, x {x.shape}, c {c.shape}")
    if math.isinf(cap) and cap > 0:
        return float(c.min()), float(c.max())
    if ls_solution is None:
        ls_solution = simplex_ls(X, x, settings)
    w_star, e_star = ls_solution
    if cap < e_star - settings.feas_tol * (1.0 + e_star):
        raise Infeasible(f"cap {cap} is below the attainable error {e_star}")
    cap = max(cap, e_star)
    lo = _min_linear_under_cap(c, X, x, cap, settings, w_star)
    hi = -_min_linear_under_cap(-c, X, x, cap, settings, w_star)
    if lo > hi:  # both sides collapsed to near-degenerate feasible sets
        lo = hi = 0.5 * (lo + hi)
    return lo, hi


def linear_range_on_fitted_face(
    c: np.ndarray,
    X: np.ndarray,
    x: np.ndarray,
    settings: SolveSettings = DEFAULT_SETTINGS,
    ls_solution: tuple[np.ndarray, float] | None = None,
) -> tuple[float, float]:
    """Extremes of c @ w over the least-squares optimal face of the simplex.

    Every simplex least-squares optimum shares one fitted vector Xw*, so the
    optimal face is the polytope {w in simplex : Xw = Xw*} and its linear
    range is a pair of small LPs. Degenerate LP failures fall back to the
    single point c @ w*, which is always inside the true range.
    """
    from scipy.optimize import linprog

    c = np.asarray(c, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != x.shape[0] or X.shape[1] != c.shape[0]:
        raise DimensionMismatch(f"shapes disagree: X {X.shape}, x {x.shape}, c {c.shape}")
    if ls_solution is None:
        ls_solution = simplex_ls(X, x, settings)
    w_star, _ = ls_solution
    w_star = np.asarray(w_star, dtype=np.float64)
    J = c.shape[0]
    if J == 1:
        return float(c[0]), float(c[0])
    y_hat = X @ w_star
    A_eq = np.vstack([X, np.ones((1, J))])
    b_eq = np.append(y_hat, 1.0)
    mid = float(c @ w_star)
    out = []
    for sign in (1.0, -1.0):
        res = linprog(sign * c, A_eq=A_eq, b_eq=b_eq, bounds=[(0.0, None)] * J, method="highs")
        out.append(sign * float(res.fun) if res.status == 0 else mid)
    lo, hi = min(out[0], mid), max(out[1], mid)
    return lo, hi


def dykstra_project(
    v: np.ndarray,
    projections,
    settings: SolveSettings = DEFAULT_SETTINGS,
    max_cycles: int = 5000,
) -> np.ndarray:
    """Dykstra's alternating projections onto an intersection of convex sets.

    projections is a sequence of callables, each an exact projection onto one
    set. Converges to the projection of v onto the intersection; used as an
    independent cross-check of the bisection-based solvers.
    """
    x = np.asarray(v, dtype=np.float64).copy()
    incs = [np.zeros_like(x) for _ in projections]
    for _ in range(max_cycles):
        x_prev = x.copy()
        for i, proj in enumerate(projections):
            y = proj(x + incs[i])
            incs[i] = x + incs[i] - y
            x = y
        if float(np.linalg.norm(x - x_prev)) <= settings.feas_tol * 0.01:
            return x
    return x


# ---------------------------------------------------------------------------
# Brute-force oracle on a barycentric grid over the simplex.
# ---------------------------------------------------------------------------

_GRID_CACHE: dict[tuple[int, int], np.ndarray] = {}
_GRID_POINT_LIMIT = 22_000_000


def simplex_grid(dim: int, step: float) -> np.ndarray:
    """All points of the barycentric grid over the simplex at the given step."""
    if dim < 1 or dim > 4:
        raise DimensionTooLarge(f"grid supports dimensions 1..4, got {dim}")
    n = max(int(round(1.0 / step)), 1)
    key = (dim, n)
    cached = _GRID_CACHE.get(key)
    if cached is not None:
        return cached
    if dim == 1:
        grid = np.ones((1, 1))
    elif dim == 2:
        i = np.arange(n + 1)
        grid = np.column_stack([i, n - i]).astype(np.float64) / n
    elif dim == 3:
        if (n + 1) * (n + 2) // 2 > _GRID_POINT_LIMIT:
            raise DimensionTooLarge(f"grid at step {step} in dimension 3 is too large")
        counts = n + 1 - np.arange(n + 1)
        i = np.repeat(np.arange(n + 1), counts)
        j = np.concatenate([np.arange(n - k + 1) for k in range(n + 1)])
        grid = np.column_stack([i, j, n - i - j]).astype(np.float64) / n
    else:
        total = (n + 1) * (n + 2) * (n + 3) // 6
        if total > _GRID_POINT_LIMIT:
            raise DimensionTooLarge(f"grid at step {step} in dimension 4 is too large")
        blocks = []
        for i in range(n + 1):
            m = n - i
            counts = m + 1 - np.arange(m + 1)
            j = np.repeat(np.arange(m + 1), counts)
            k = np.concatenate([np.arange(m - t + 1) for t in range(m + 1)])
            blocks.append(np.column_stack([np.full(j.size, i), j, k, m - j - k]))
        grid = np.vstack(blocks).astype(np.float64) / n
    grid.flags.writeable = False
    _GRID_CACHE[key] = grid
    return grid


def grid_oracle(objective, constraints, dim: int, step: float) -> tuple[float, np.ndarray]:
    """Exhaustive minimum of a vectorized objective over the simplex grid.

    objective maps an (N, dim) array of grid points to N values; constraints
    (optional) maps the same array to a boolean mask. Raises Infeasible when
    no grid point passes, DimensionTooLarge beyond dimension 4.
    """
    W = simplex_grid(dim, step)
    if constraints is not None:
        mask = np.asarray(constraints(W), dtype=bool)
        if not mask.any():
            raise Infeasible("no grid point satisfies the constraints")
        W = W[mask]
    vals = np.asarray(objective(W), dtype=np.float64)
    if vals.shape != (W.shape[0],):
        raise DimensionMismatch("objective must return one value per grid row")
    k = int(np.argmin(vals))
    return float(vals[k]), W[k].copy()
