"""The adaptively scaled trust-region iteration loop.

Per iteration: evaluate g_k and H_k, compute the second-order measure
phi_k at radius 1 and its clip hatphi_k = min(phi_k, xi); decide the branch
by ||g_k||^2 >= hatphi_k^3 (ties go to the linear branch); feed the decided
branch's term to the scaling state and emit the weights; form the radii
Delta^L = ||g||/w^L, Delta^Q = hatphi/w^Q; take either the closed-form
scaled-gradient step s = -g/w^L or a trust-region step of radius Delta^Q;
accept the trial point unconditionally.  The objective value is never read
by the step computation; with ``record_f`` set, f is evaluated once per
iteration purely for the trace.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .measures import phi2, phi2_subspace
from .oracle import ProblemOracle
from .scaling import (
    AdagradScaling,
    DivergentScaling,
    adagrad_weights,
    divergent_weights,
)
from .trs import (
    LanczosNoConvergence,
    cauchy_decrease,
    eigen_decrease,
    min_eigpair,
    solve_trs_exact,
    solve_trs_krylov,
)

Array = np.ndarray


class SolverAbort(RuntimeError):
    """Non-finite derivative values; carries the trace recorded so far."""

    def __init__(self, reason: str, trace: list["IterateRecord"]):
        super().__init__(reason)
        self.reason = reason
        self.trace = trace


@dataclass
class Astr2Config:
    """Run configuration.

    ``scaling`` is a template state (copied per run).  ``eps1``/``eps2`` are
    optional termination thresholds on the first-/second-order measures at
    radius 1 (both or neither).  ``subspace_max_dim`` switches the measure
    and the quadratic step to Krylov-subspace computations of that dimension.
    ``record_f`` reads the diagnostic objective value into the trace; the
    step computation never sees it.
    """

    scaling: Union[AdagradScaling, DivergentScaling]
    max_iter: int
    tau: float = 1.0
    chi: float = 1.0
    xi: float = 1.0
    eps1: Optional[float] = None
    eps2: Optional[float] = None
    subspace_max_dim: Optional[int] = None
    record_f: bool = False
    delta: float = field(default=1.0, init=False)  # measure radius, fixed

    def __post_init__(self) -> None:
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau!r}")
        if not 0.0 < self.chi <= 1.0:
            raise ValueError(f"chi must be in (0, 1], got {self.chi!r}")
        if not self.xi >= 1.0:
            raise ValueError(f"xi must be >= 1, got {self.xi!r}")
        if not (isinstance(self.max_iter, (int, np.integer)) and self.max_iter >= 1):
            raise ValueError(f"max_iter must be an integer >= 1, got {self.max_iter!r}")
        if (self.eps1 is None) != (self.eps2 is None):
            raise ValueError("eps1 and eps2 must be supplied together")
        if self.eps1 is not None and not (self.eps1 > 0 and self.eps2 > 0):
            raise ValueError("termination thresholds must be positive")
        if self.subspace_max_dim is not None and self.subspace_max_dim < 1:
            raise ValueError(f"subspace_max_dim must be >= 1, got {self.subspace_max_dim!r}")


@dataclass(frozen=True)
class IterateRecord:
    """One iteration of the trace.

    ``x`` is the iterate at which the derivatives were evaluated (None when
    parsed back from CSV, which does not serialize x).  ``f`` is the
    diagnostic objective value at x, present only when the run recorded it.
    """

    k: int
    x: Optional[Array]
    norm_g: float
    phi: float
    hatphi: float
    branch: str
    w_l: float
    w_q: float
    delta_l: float
    delta_q: float
    norm_s: float
    dq: float
    f: Optional[float] = None


def _emit_weights(
    state: Union[AdagradScaling, DivergentScaling],
    k: int,
    branch: str,
    g_norm_sq: float,
    hatphi_cubed: float,
) -> tuple[float, float]:
    if isinstance(state, AdagradScaling):
        return adagrad_weights(state, k, branch, g_norm_sq, hatphi_cubed)
    return divergent_weights(state, k)


def astr2_step(
    oracle: ProblemOracle,
    x: Array,
    k: int,
    config: Astr2Config,
    scaling_state: Union[AdagradScaling, DivergentScaling],
) -> tuple[Array, IterateRecord]:
    """One full iteration from x; returns (next iterate, trace record).

    Mutates ``scaling_state`` (accumulator update for the decided branch).
    Raises ValueError on non-finite derivative values; :func:`run` converts
    that to :class:`SolverAbort` with the partial trace attached.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(oracle.gradient(x), dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError(f"non-finite gradient at iteration {k}")
    norm_g = float(np.linalg.norm(g))

    subspace = config.subspace_max_dim is not None
    H: Optional[Array] = None
    eigpair = None
    if subspace:
        def hvp(v: Array) -> Array:
            out = np.asarray(oracle.hvp(x, v), dtype=float)
            if not np.all(np.isfinite(out)):
                raise ValueError(f"non-finite Hessian-vector product at iteration {k}")
            return out

        seed = None
        if norm_g == 0.0:
            eigpair = _min_eigpair_with_fallback(oracle, x, hvp, config.chi)
            seed = eigpair.vector
        phi, _ = phi2_subspace(g, hvp, config.delta, config.subspace_max_dim, seed_direction=seed)
    else:
        if oracle.hessian is None:
            raise ValueError(
                f"problem {oracle.name!r} has no dense Hessian; set subspace_max_dim"
            )
        H = np.asarray(oracle.hessian(x), dtype=float)
        if not np.all(np.isfinite(H)):
            raise ValueError(f"non-finite Hessian at iteration {k}")
        phi, _ = phi2(g, H, config.delta)

    hatphi = min(phi, config.xi)
    branch = "L" if norm_g * norm_g >= hatphi ** 3 else "Q"
    w_l, w_q = _emit_weights(scaling_state, k, branch, norm_g * norm_g, hatphi ** 3)
    delta_l = norm_g / w_l
    delta_q = hatphi / w_q

    if branch == "L":
        s = -g / w_l
        Hs = oracle.hvp(x, s) if H is None else H @ s
        dq = -(float(np.dot(g, s)) + 0.5 * float(np.dot(s, Hs)))
    else:
        if not subspace:
            sol = solve_trs_exact(g, H, delta_q)
            s = sol.d
            dq = sol.model_decrease
        else:
            sol, _ = solve_trs_krylov(
                g, hvp, delta_q, config.subspace_max_dim, config.tau,
                seed_direction=eigpair.vector if eigpair is not None else None,
            )
            s, dq = sol.d, sol.model_decrease
            # The subspace solve can in principle miss the required fraction of
            # the best single-direction decreases; check and fall back.
            _, dq_c = cauchy_decrease(g, hvp, delta_q)
            if eigpair is None:
                eigpair = _min_eigpair_with_fallback(oracle, x, hvp, config.chi)
            u, alpha_e, dq_e = eigen_decrease(g, hvp, delta_q, config.chi, eigpair=eigpair)
            if dq + 1e-10 < config.tau * max(dq_c, dq_e):
                if dq_c >= dq_e:
                    alpha_c, _ = cauchy_decrease(g, hvp, delta_q)
                    s, dq = -alpha_c * g, dq_c
                else:
                    s, dq = alpha_e * u, dq_e

    x_next = x + s
    f_val: Optional[float] = None
    if config.record_f and oracle.f_diagnostic is not None:
        f_val = float(oracle.f_diagnostic(x))
    record = IterateRecord(
        k=k,
        x=x.copy(),
        norm_g=norm_g,
        phi=phi,
        hatphi=hatphi,
        branch=branch,
        w_l=w_l,
        w_q=w_q,
        delta_l=delta_l,
        delta_q=delta_q,
        norm_s=float(np.linalg.norm(s)),
        dq=dq,
        f=f_val,
    )
    return x_next, record


def _min_eigpair_with_fallback(oracle, x, hvp, chi):
    try:
        return min_eigpair(hvp, n=oracle.n, tol=1e-8, chi=chi)
    except LanczosNoConvergence:
        if oracle.hessian is not None:
            return min_eigpair(np.asarray(oracle.hessian(x), dtype=float))
        raise


def run(oracle: ProblemOracle, x0: Array, config: Astr2Config) -> list[IterateRecord]:
    """Run the iteration from x0; returns the trace.

    Stops after ``max_iter`` iterations, or earlier as soon as the recorded
    iteration satisfies phi1 <= eps1 and phi2 <= eps2/2 at radius 1 (when the
    thresholds are set).  The scaling template in ``config`` is copied, so
    repeated runs from the same config are identical.

    Raises
    ------
    SolverAbort
        On non-finite derivative values; the exception carries the partial
        trace in its ``trace`` attribute.
    """
    x = np.asarray(x0, dtype=float)
    if x.shape != (oracle.n,):
        raise ValueError(f"x0 must have shape ({oracle.n},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 contains non-finite entries")
    state = copy.deepcopy(config.scaling)
    trace: list[IterateRecord] = []
    for k in range(config.max_iter):
        try:
            x, record = astr2_step(oracle, x, k, config, state)
        except ValueError as exc:
            raise SolverAbort(str(exc), trace) from exc
        trace.append(record)
        if config.eps1 is not None:
            if record.norm_g * config.delta <= config.eps1 and record.phi <= config.eps2 / 2.0:
                break
    return trace


def rate_envelopes(trace: list[IterateRecord]) -> tuple[float, float, float, float]:
    """The four empirical rate envelopes of a trace.

    Returns (sup_k (k+1) * avg_{j<=k} ||g_j||^2,
             sup_k (k+1) * avg_{j<=k} hatphi_j^3,
             sup_k sqrt(k+1) * min_{j<=k} ||g_j||,
             sup_k (k+1)^{1/3} * min_{j<=k} hatphi_j).

    Boundedness of these as the trace grows is the empirical content of the
    O(1/k) average and O(k^{-1/2}), O(k^{-1/3}) min-rate guarantees.
    """
    if not trace:
        raise ValueError("trace must be nonempty")
    gnorms = np.array([r.norm_g for r in trace])
    hatphis = np.array([r.hatphi for r in trace])
    kk = np.arange(1, len(trace) + 1, dtype=float)
    env_avg_g = float(np.max(np.cumsum(gnorms ** 2)))
    env_avg_phi = float(np.max(np.cumsum(hatphis ** 3)))
    env_min_g = float(np.max(np.sqrt(kk) * np.minimum.accumulate(gnorms)))
    env_min_phi = float(np.max(kk ** (1.0 / 3.0) * np.minimum.accumulate(hatphis)))
    return env_avg_g, env_avg_phi, env_min_g, env_min_phi
