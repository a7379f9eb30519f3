"""First- and second-order optimality measures.

The second-order measure of a point is the largest decrease of the local
quadratic model within a ball of radius delta,

    phi2(g, H, delta) = max_{||d|| <= delta} -(g^T d + (1/2) d^T H d),

computed by an exact trust-region solve; it is zero exactly at second-order
stationary points.  The first-order analogue is phi1 = delta * ||g||.  The
combined report adds the clipped measure hatphi = min(phi2, xi), the
composite psi = min(1, max(||g||^2, phi2^3)) and the negative-curvature size
eta = max(0, -lambda_min[H]).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .trs import solve_trs_exact, solve_trs_krylov

Array = np.ndarray


@dataclass(frozen=True)
class OptimalityReport:
    """All measures of one point, computed consistently from (g, H)."""

    phi1: float
    phi2: float
    hatphi: float
    psi: float
    eta: float
    argmin_d: Array


def phi1(g: Array, delta: float) -> float:
    """First-order measure: delta * ||g||."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    return float(delta * np.linalg.norm(g))


def phi2(g: Array, H: Array, delta: float) -> tuple[float, Array]:
    """Second-order measure and the model minimizer achieving it."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    sol = solve_trs_exact(g, H, delta)
    return sol.model_decrease, sol.d


def phi2_subspace(
    g: Array,
    hvp: Callable[[Array], Array],
    delta: float,
    max_dim: int,
    seed_direction: Optional[Array] = None,
) -> tuple[float, int]:
    """Second-order measure restricted to a grown Krylov subspace.

    Monotonically nondecreasing in ``max_dim`` and equal to :func:`phi2`
    once the subspace spans the reachable space (max_dim >= n on generic
    instances).  ``max_dim = 0`` is the degenerate choice S = {0}, where the
    restricted measure is 0 by definition.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    if max_dim < 0:
        raise ValueError(f"max_dim must be >= 0, got {max_dim!r}")
    if max_dim == 0:
        return 0.0, 0
    sol, dim = solve_trs_krylov(g, hvp, delta, max_dim, seed_direction=seed_direction)
    return sol.model_decrease, dim


def combined_measures(g: Array, H: Array, xi: float, delta: float) -> OptimalityReport:
    """Fill an :class:`OptimalityReport` for one point.

    ``xi >= 1`` is the clipping level of hatphi; ``delta > 0`` the ball
    radius (the optimizer always uses delta = 1).
    """
    if not xi >= 1.0:
        raise ValueError(f"xi must be >= 1, got {xi!r}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    g = np.asarray(g, dtype=float)
    value, d = phi2(g, H, delta)
    gnorm2 = float(np.dot(g, g))
    lam_min = float(np.linalg.eigvalsh(0.5 * (np.asarray(H, float) + np.asarray(H, float).T))[0])
    return OptimalityReport(
        phi1=phi1(g, delta),
        phi2=value,
        hatphi=min(value, xi),
        psi=min(1.0, max(gnorm2, value ** 3)),
        eta=max(0.0, -lam_min),
        argmin_d=d,
    )
