"""Trust-region subproblem machinery.

Everything here is about the problem

    min_{||d|| <= Delta}  g^T d + (1/2) d^T H d

and its certificates: an exact eigendecomposition-based solver with
safeguarded Newton iteration on the secular equation and an explicit
hard-case branch, the classical Cauchy-point and eigen-point decreases, a
minimum-eigenpair routine (dense, or matrix-free Lanczos), a GLTR-style
Krylov solver for subspace-restricted solves, and a brute-force reference
used to cross-check the exact solver.

References
----------
.. [1] A. R. Conn, N. I. M. Gould and Ph. L. Toint, "Trust-Region Methods",
       MPS-SIAM Series on Optimization, SIAM, 2000, Chapter 7.
.. [2] J. J. More and D. C. Sorensen, "Computing a trust region step",
       SIAM J. Sci. Stat. Comput. 4 (1983), 553-572.
.. [3] N. I. M. Gould, S. Lucidi, M. Roma and Ph. L. Toint, "Solving the
       trust-region subproblem using the Lanczos method",
       SIAM J. Optim. 9 (1999), 504-525.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

Array = np.ndarray
HvpHandle = Callable[[Array], Array]

_SYM_TOL = 1e-8
_SECULAR_TOL = 1e-13  # |1/||d|| - 1/Delta| * Delta at the accepted root
_HARD_TOL = 1e-12  # relative size of the gradient on the critical eigenspace
_GAP_TOL = 1e-12  # relative eigenvalue gap defining the critical eigenspace


class LanczosNoConvergence(RuntimeError):
    """Lanczos failed to reach the requested residual within the iteration cap."""


@dataclass(frozen=True)
class TrsSolution:
    """A trust-region subproblem answer.

    ``d`` is the step, ``multiplier`` the KKT multiplier lambda >= 0 with
    (H + lambda I) d = -g and H + lambda I PSD, ``model_decrease`` the value
    -(g^T d + (1/2) d^T H d) >= 0, clamped at zero against rounding.
    """

    d: Array
    multiplier: float
    model_decrease: float
    on_boundary: bool
    hard_case: bool


@dataclass(frozen=True)
class EigenPair:
    """An (approximate) minimum eigenpair: unit vector and its Rayleigh quotient bound."""

    value: float
    vector: Array


def _check_symmetric(H: Array) -> Array:
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"H must be square, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValueError("H contains non-finite entries")
    scale = 1.0 + np.max(np.abs(H))
    if np.max(np.abs(H - H.T)) > _SYM_TOL * scale:
        raise ValueError("H is not symmetric within tolerance")
    return 0.5 * (H + H.T)


def _flip_sign(u: Array, g: Array) -> Array:
    # Orient u so u^T g <= 0; on ties make the largest-magnitude entry positive.
    s = float(np.dot(u, g))
    if s > 0.0:
        return -u
    if s == 0.0 and u[np.argmax(np.abs(u))] < 0.0:
        return -u
    return u


def solve_trs_exact(g: Array, H: Array, delta: float) -> TrsSolution:
    """Globally solve the trust-region subproblem.

    Full symmetric eigendecomposition, then safeguarded Newton on the secular
    equation phi(t) = 1/||d(t)|| - 1/Delta over t >= max(0, -lambda_min),
    with the hard case (gradient orthogonal to the critical eigenspace and
    interior pseudo-inverse solution) resolved by an explicit eigenvector
    correction to the boundary.

    Parameters
    ----------
    g : ndarray
        Gradient of the model at the center.
    H : ndarray
        Symmetric model Hessian (symmetrized after a tolerance check).
    delta : float
        Trust-region radius, > 0.

    Returns
    -------
    TrsSolution
    """
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("g contains non-finite entries")
    if not (np.isfinite(delta) and delta > 0):
        raise ValueError(f"delta must be positive and finite, got {delta!r}")
    H = _check_symmetric(H)
    n = g.shape[0]
    if H.shape[0] != n:
        raise ValueError(f"shape mismatch: g has {n} entries, H is {H.shape}")

    lam, Q = np.linalg.eigh(H)
    gt = Q.T @ g
    lam1 = lam[0]
    t_lo = max(0.0, -lam1)

    def coords_at(t: float) -> Array:
        denom = lam + t
        with np.errstate(divide="ignore", invalid="ignore"):
            c = -gt / denom
        # 0/0 means no gradient on a critical direction: contributes nothing.
        return np.where((denom == 0.0) & (gt == 0.0), 0.0, c)

    def finish(coords: Array, t: float, boundary: bool, hard: bool) -> TrsSolution:
        d = Q @ coords
        dq = -(float(np.dot(g, d)) + 0.5 * float(np.dot(d, H @ d)))
        return TrsSolution(
            d=d,
            multiplier=float(t),
            model_decrease=max(dq, 0.0),
            on_boundary=boundary,
            hard_case=hard,
        )

    # Pseudo-inverse solution at the left end of the multiplier range.
    scale = max(1.0, float(np.max(np.abs(lam))))
    crit = (lam + t_lo) <= _GAP_TOL * scale
    g_crit = float(np.linalg.norm(gt[crit])) if np.any(crit) else 0.0

    if g_crit <= _HARD_TOL * max(1.0, float(np.linalg.norm(g))):
        dp = np.zeros(n)
        free = ~crit
        dp[free] = -gt[free] / (lam[free] + t_lo)
        norm_dp = float(np.linalg.norm(dp))
        if norm_dp <= delta:
            if t_lo == 0.0:
                # PSD (possibly singular but compatible): interior optimum.
                return finish(dp, 0.0, norm_dp >= delta * (1.0 - 1e-12), False)
            # Hard case: push to the boundary along a critical eigenvector.
            u = _flip_sign(Q[:, 0], g)
            if norm_dp == 0.0:
                theta = delta
            else:
                theta = float(np.sqrt(max(0.0, delta * delta - norm_dp * norm_dp)))
            d = Q @ dp + theta * u
            dq = -(float(np.dot(g, d)) + 0.5 * float(np.dot(d, H @ d)))
            return TrsSolution(
                d=d,
                multiplier=float(t_lo),
                model_decrease=max(dq, 0.0),
                on_boundary=True,
                hard_case=True,
            )

    # Boundary solution with t strictly above t_lo: safeguarded Newton on
    # phi(t) = 1/||d(t)|| - 1/Delta, increasing with phi(t_lo) <= 0.
    gnorm = float(np.linalg.norm(g))
    lo = t_lo
    hi = t_lo + gnorm / delta
    # Guard: widen until phi(hi) >= 0 (covers rounding at the analytic bound).
    def phi_and_slope(t: float) -> tuple[float, float, Array]:
        c = coords_at(t)
        n2 = float(np.dot(c, c))
        if not np.isfinite(n2) or n2 == 0.0:
            return -1.0 / delta, 0.0, c
        nrm = np.sqrt(n2)
        denom = lam + t
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            s3 = np.where((denom == 0.0) & (gt == 0.0), 0.0, gt * gt / denom ** 3)
        slope = float(np.sum(s3)) / nrm ** 3
        return 1.0 / nrm - 1.0 / delta, slope, c

    for _ in range(60):
        val_hi, _, _ = phi_and_slope(hi)
        if val_hi >= 0.0:
            break
        hi = t_lo + 2.0 * (hi - t_lo)

    t = 0.5 * (lo + hi)
    coords = coords_at(t)
    for _ in range(200):
        val, slope, coords = phi_and_slope(t)
        if abs(val) * delta <= _SECULAR_TOL:
            break
        if val < 0.0:
            lo = t
        else:
            hi = t
        t_new = t - val / slope if slope > 0.0 and np.isfinite(slope) else t
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        if t_new == t and hi - lo <= 1e-15 * max(1.0, t):
            break
        t = t_new
    return finish(coords, t, True, False)


def cauchy_decrease(
    g: Array, H: Union[Array, HvpHandle], delta: float
) -> tuple[float, float]:
    """Best model decrease along the scaled negative gradient.

    Maximizes alpha ||g||^2 - (alpha^2/2) g^T H g over
    {alpha >= 0 : alpha ||g|| <= Delta}; closed form from the sign of the
    curvature along g.  ``H`` may be a dense matrix or an hvp callable.

    Returns
    -------
    (alpha, dq_c) : tuple of float
        The maximizing alpha and the achieved decrease (0 when g = 0).
    """
    if not (np.isfinite(delta) and delta > 0):
        raise ValueError(f"delta must be positive and finite, got {delta!r}")
    g = np.asarray(g, dtype=float)
    gnorm2 = float(np.dot(g, g))
    if gnorm2 == 0.0:
        return 0.0, 0.0
    gnorm = np.sqrt(gnorm2)
    Hg = H(g) if callable(H) else np.asarray(H, dtype=float) @ g
    curv = float(np.dot(g, Hg))
    alpha_max = delta / gnorm
    if curv <= 0.0:
        alpha = alpha_max
    else:
        alpha = min(gnorm2 / curv, alpha_max)
    dq = alpha * gnorm2 - 0.5 * alpha * alpha * curv
    return alpha, max(dq, 0.0)


def eigen_decrease(
    g: Array,
    H: Union[Array, HvpHandle],
    delta: float,
    chi: float,
    eigpair: Optional[EigenPair] = None,
) -> tuple[Optional[Array], float, float]:
    """Best model decrease along an approximate minimum-curvature direction.

    The direction u satisfies u^T H u <= chi * lambda_min[H], u^T g <= 0 and
    ||u|| = 1 whenever lambda_min[H] < 0.  When lambda_min[H] >= 0 the
    decrease is defined as 0 (no negative curvature to exploit) and u is
    still returned for inspection.  Pass ``eigpair`` to reuse an already
    computed (approximate) minimum eigenpair; with a dense ``H`` and no pair
    the exact eigendecomposition is used.

    Returns
    -------
    (u, alpha, dq_e)
    """
    if not (np.isfinite(delta) and delta > 0):
        raise ValueError(f"delta must be positive and finite, got {delta!r}")
    if not (0.0 < chi <= 1.0):
        raise ValueError(f"chi must be in (0, 1], got {chi!r}")
    g = np.asarray(g, dtype=float)
    if eigpair is None:
        if callable(H):
            raise ValueError("eigen_decrease needs an EigenPair when H is matrix-free")
        eigpair = min_eigpair(H)
    u = _flip_sign(np.asarray(eigpair.vector, dtype=float), g)
    if eigpair.value >= 0.0:
        return u, 0.0, 0.0
    Hu = H(u) if callable(H) else np.asarray(H, dtype=float) @ u
    curv = float(np.dot(u, Hu))
    slope = float(np.dot(g, u))  # <= 0 by the sign convention
    if curv < 0.0:
        alpha = delta
    elif curv == 0.0:
        alpha = delta if slope < 0.0 else 0.0
    else:
        alpha = min(-slope / curv, delta) if slope < 0.0 else 0.0
    dq = -(slope * alpha + 0.5 * curv * alpha * alpha)
    return u, alpha, max(dq, 0.0)


def min_eigpair(
    H: Union[Array, HvpHandle],
    n: Optional[int] = None,
    tol: float = 1e-8,
    chi: float = 1.0,
    maxiter: Optional[int] = None,
) -> EigenPair:
    """Minimum eigenpair of a symmetric matrix, dense or matrix-free.

    Dense path: full symmetric eigendecomposition.  Matrix-free path:
    Lanczos with full reorthogonalization from a deterministic random start,
    converged when the Ritz residual |beta_j * y_j| certifies
    u^T H u <= chi * lambda_min + tol.

    Raises
    ------
    LanczosNoConvergence
        Iteration cap reached before the residual test held (matrix-free
        path only); callers may fall back to the dense path.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    if not callable(H):
        Hs = _check_symmetric(H)
        lam, Q = np.linalg.eigh(Hs)
        u = Q[:, 0]
        if u[np.argmax(np.abs(u))] < 0.0:
            u = -u
        return EigenPair(value=float(lam[0]), vector=u)

    if n is None:
        raise ValueError("matrix-free min_eigpair needs the dimension n")
    if maxiter is None:
        maxiter = max(4 * n, 200)
    rng = np.random.default_rng(1842962133)  # fixed seed: deterministic runs
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    V = [v]
    alphas: list[float] = []
    betas: list[float] = []
    theta = 0.0
    for j in range(maxiter):
        w = np.asarray(H(V[-1]), dtype=float)
        a = float(np.dot(V[-1], w))
        alphas.append(a)
        w = w - a * V[-1] - (betas[-1] * V[-2] if betas else 0.0)
        for u_prev in V:  # full reorthogonalization
            w -= np.dot(w, u_prev) * u_prev
        b = float(np.linalg.norm(w))

        m = len(alphas)
        T = np.diag(alphas)
        if m > 1:
            idx = np.arange(m - 1)
            T[idx, idx + 1] = betas
            T[idx + 1, idx] = betas
        ritz_vals, ritz_vecs = np.linalg.eigh(T)
        theta = float(ritz_vals[0])
        y = ritz_vecs[:, 0]
        resid = abs(b * y[-1])
        tol_eff = tol if theta < 0.0 else tol * max(1.0, theta)
        if resid <= tol_eff:
            u = np.zeros(n)
            for coeff, vec in zip(y, V):
                u += coeff * vec
            u /= np.linalg.norm(u)
            if u[np.argmax(np.abs(u))] < 0.0:
                u = -u
            return EigenPair(value=theta, vector=u)
        if b <= 1e-14 * max(1.0, abs(a)):
            # Invariant subspace: deflate by restarting orthogonally to it.
            w = rng.standard_normal(n)
            for u_prev in V:
                w -= np.dot(w, u_prev) * u_prev
            b = float(np.linalg.norm(w))
            if b <= 1e-14:
                break  # space exhausted; Ritz data is exact
            betas.append(0.0)
            V.append(w / b)
            continue
        betas.append(b)
        V.append(w / b)

    # Exhausted the full space exactly: the last Ritz pair is the answer.
    if len(V) >= n:
        m = len(alphas)
        T = np.diag(alphas)
        if m > 1:
            idx = np.arange(m - 1)
            T[idx, idx + 1] = betas[: m - 1]
            T[idx + 1, idx] = betas[: m - 1]
        ritz_vals, ritz_vecs = np.linalg.eigh(T)
        u = np.zeros(n)
        for coeff, vec in zip(ritz_vecs[:, 0], V[:m]):
            u += coeff * vec
        u /= np.linalg.norm(u)
        if u[np.argmax(np.abs(u))] < 0.0:
            u = -u
        return EigenPair(value=float(ritz_vals[0]), vector=u)
    raise LanczosNoConvergence(
        f"no convergence in {maxiter} Lanczos iterations (last Ritz value {theta:.6g})"
    )


def solve_trs_krylov(
    g: Array,
    hvp: HvpHandle,
    delta: float,
    max_dim: int,
    tau: float = 1.0,
    seed_direction: Optional[Array] = None,
) -> tuple[TrsSolution, int]:
    """Solve the subproblem restricted to a grown Krylov subspace.

    GLTR-style: Lanczos from g/||g|| (or from ``seed_direction`` when g = 0)
    with full reorthogonalization; after each expansion the tridiagonal
    subproblem is solved exactly and the iteration stops when the subspace
    decrease stagnates (relative gain < 1e-8), the recurrence breaks down
    (current best is returned), or ``max_dim`` is reached.  The returned
    decrease dominates every feasible point of the final subspace, in
    particular the Cauchy point and any subspace eigen-point, hence exceeds
    tau * max(dq_C, dq_E-in-subspace) for every tau <= 1.

    Returns
    -------
    (TrsSolution, subspace_dim)
    """
    if not (np.isfinite(delta) and delta > 0):
        raise ValueError(f"delta must be positive and finite, got {delta!r}")
    if max_dim < 1:
        raise ValueError(f"max_dim must be >= 1, got {max_dim!r}")
    if not (0.0 < tau <= 1.0):
        raise ValueError(f"tau must be in (0, 1], got {tau!r}")
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    gnorm = float(np.linalg.norm(g))
    if gnorm > 0.0:
        v = g / gnorm
    elif seed_direction is not None:
        v = np.asarray(seed_direction, dtype=float)
        vn = float(np.linalg.norm(v))
        if vn == 0.0:
            raise ValueError("seed_direction must be nonzero")
        v = v / vn
    else:
        # Krylov space of g = 0 with no seed is {0}: the zero step is optimal there.
        return TrsSolution(np.zeros(n), 0.0, 0.0, False, False), 0

    V = [v]
    alphas: list[float] = []
    betas: list[float] = []
    best: Optional[TrsSolution] = None
    best_y: Optional[Array] = None
    prev_dq = 0.0
    m_used = 0
    for m in range(1, max_dim + 1):
        w = np.asarray(hvp(V[-1]), dtype=float)
        a = float(np.dot(V[-1], w))
        alphas.append(a)
        w = w - a * V[-1] - (betas[-1] * V[-2] if betas else 0.0)
        for u_prev in V:
            w -= np.dot(w, u_prev) * u_prev
        b = float(np.linalg.norm(w))

        T = np.diag(alphas)
        if m > 1:
            idx = np.arange(m - 1)
            T[idx, idx + 1] = betas
            T[idx + 1, idx] = betas
        g_sub = np.zeros(m)
        g_sub[0] = gnorm
        sol = solve_trs_exact(g_sub, T, delta)
        best, best_y, m_used = sol, sol.d, m

        gain = sol.model_decrease - prev_dq
        prev_dq = sol.model_decrease
        if m > 1 and gain < 1e-8 * max(sol.model_decrease, 1e-300):
            break
        if b <= 1e-12 * max(1.0, abs(a)):
            break  # breakdown: invariant subspace reached, current best is exact in it
        if m < max_dim:
            betas.append(b)
            V.append(w / b)

    assert best is not None and best_y is not None
    d = np.zeros(n)
    for coeff, vec in zip(best_y, V[:m_used]):
        d += coeff * vec
    return (
        TrsSolution(
            d=d,
            multiplier=best.multiplier,
            model_decrease=best.model_decrease,
            on_boundary=best.on_boundary,
            hard_case=best.hard_case,
        ),
        m_used,
    )


def kkt_residuals(g: Array, H: Array, delta: float, sol: TrsSolution) -> dict[str, float]:
    """KKT residuals of a TrsSolution for reporting and tests.

    Keys: ``feasibility`` (||d|| - Delta, positive part), ``complementarity``
    (lambda * (Delta - ||d||)), ``stationarity`` (||(H + lambda I) d + g||),
    ``psd`` (negative part of lambda + lambda_min[H]), ``multiplier_sign``
    (negative part of lambda).
    """
    g = np.asarray(g, dtype=float)
    H = 0.5 * (np.asarray(H, dtype=float) + np.asarray(H, dtype=float).T)
    dnorm = float(np.linalg.norm(sol.d))
    lam_min = float(np.linalg.eigvalsh(H)[0])
    return {
        "feasibility": max(0.0, dnorm - delta),
        "complementarity": abs(sol.multiplier * (delta - dnorm)),
        "stationarity": float(np.linalg.norm((H + sol.multiplier * np.eye(len(g))) @ sol.d + g)),
        "psd": max(0.0, -(sol.multiplier + lam_min)),
        "multiplier_sign": max(0.0, -sol.multiplier),
    }


def _sphere_polish(a: Array, B: Array, u: Array, iters: int = 12) -> Array:
    # Projected Newton for min_{||u||=1} a^T u + (1/2) u^T B u.  The tangent
    # Newton system is solved in the full space with a rank-one term pinning
    # the normal component; lstsq keeps degenerate (hard-case) instances safe.
    n = len(a)
    eye = np.eye(n)
    for _ in range(iters):
        r = a + B @ u
        theta = float(np.dot(u, r))
        grad = r - theta * u
        P = eye - np.outer(u, u)
        M = P @ (B - theta * eye) @ P + np.outer(u, u)
        v, *_ = np.linalg.lstsq(M, -grad, rcond=None)
        v -= np.dot(v, u) * u
        u_new = u + v
        nrm = float(np.linalg.norm(u_new))
        if nrm == 0.0:
            break
        u_new /= nrm
        if float(np.linalg.norm(u_new - u)) <= 1e-15:
            u = u_new
            break
        u = u_new
    return u


def brute_force_decrease(
    g: Array,
    H: Array,
    delta: float,
    rng: Optional[np.random.Generator] = None,
    n_angles: int = 10_000,
    n_starts: int = 100,
    n_iters: int = 300,
) -> float:
    """Brute-force reference value of the best model decrease over the ball.

    Enumerates interior stationary points (linear solve) and optimizes the
    boundary restriction: a dense angle grid for n = 2 (10^4 points), or
    projected-gradient ascent on the sphere restarted from ``n_starts``
    random seeds for n >= 3; a projected-Newton polish sharpens the best
    boundary candidates to roundoff.  Shares no logic with the secular
    solver, so it can serve as an independent oracle for it.
    """
    g = np.asarray(g, dtype=float)
    H = 0.5 * (np.asarray(H, dtype=float) + np.asarray(H, dtype=float).T)
    n = len(g)
    if rng is None:
        rng = np.random.default_rng(0)

    def model(d: Array) -> float:
        return float(np.dot(g, d) + 0.5 * np.dot(d, H @ d))

    values = [0.0]  # d = 0
    try:
        d_int = np.linalg.solve(H, -g)
        if np.all(np.isfinite(d_int)) and float(np.linalg.norm(d_int)) <= delta:
            values.append(model(d_int))
    except np.linalg.LinAlgError:
        pass

    if n == 1:
        values.append(model(np.array([delta])))
        values.append(model(np.array([-delta])))
        return max(0.0, -min(values))

    if n == 2:
        th = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
        D = delta * np.vstack([np.cos(th), np.sin(th)])
        vals = g @ D + 0.5 * np.sum(D * (H @ D), axis=0)
        order = np.argsort(vals)
        candidates = [D[:, i] / delta for i in order[:3]]
    else:
        U = rng.standard_normal((n, n_starts))
        extra = [g / np.linalg.norm(g)] if np.linalg.norm(g) > 0 else []
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            extra.extend([e, -e])
        U = np.column_stack([U] + [e.reshape(-1, 1) for e in extra])
        U /= np.linalg.norm(U, axis=0)
        a = delta * g
        B = (delta * delta) * H
        lip = float(np.linalg.norm(B)) + float(np.linalg.norm(a)) + 1.0
        step = 1.0 / lip
        for _ in range(n_iters):
            grad = a[:, None] + B @ U
            grad_t = grad - U * np.sum(U * grad, axis=0)
            U = U - step * grad_t
            U /= np.linalg.norm(U, axis=0)
        vals = a @ U + 0.5 * np.sum(U * (B @ U), axis=0)
        order = np.argsort(vals)
        candidates = [U[:, i] for i in order[:5]]

    a = delta * g
    B = (delta * delta) * H
    for u in candidates:
        u = _sphere_polish(a, B, np.array(u, dtype=float))
        values.append(model(delta * u))
    return max(0.0, -min(values))
