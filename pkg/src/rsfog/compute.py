"""Local / server computing cost and the convexified compute constraints.

The offloaded fraction of user k's task is ``beta_k**2``.
"""

from __future__ import annotations

import cvxpy as cp
import numpy as np

from .rates import InfeasibleRateError

# beta = 1 makes the 1/(1 - beta) energy atoms blow up; full offload is the
# cloud baseline's job
BETA_MAX = 0.999


def server_cost(beta_k, L, omega, f_k, kappa=1e-24):
    """Server time ``omega beta^2 L / f`` and energy ``kappa f^2 omega beta^2 L``."""
    load = omega * beta_k ** 2 * L
    if load == 0:
        return 0.0, 0.0
    if not f_k > 0:
        raise InfeasibleRateError("offloaded task with zero server CPU share")
    return load / f_k, kappa * f_k ** 2 * load


def local_cost(beta_k, L, omega, f_tilde, kappa=1e-24):
    """Local time and energy for the remaining ``1 - beta^2`` share."""
    load = omega * (1.0 - beta_k ** 2) * L
    if load == 0:
        return 0.0, 0.0
    if not f_tilde > 0:
        raise InfeasibleRateError("local task with zero local CPU frequency")
    return load / f_tilde, kappa * f_tilde ** 2 * load


def optimal_local_frequency(P_k_W, kappa, F_k):
    """``min(cbrt(P_k / kappa), F_k)``: fastest clock the energy budget allows."""
    return np.minimum(np.cbrt(np.asarray(P_k_W) / kappa), F_k)


def _check_beta(beta):
    beta = np.asarray(beta, dtype=float)
    if np.any(np.abs(beta) >= 1):
        raise ValueError("beta must lie in (-1, 1)")
    return beta


def energy_rate(f, beta, f_tilde, kappa):
    """Exact server energy per unit processing time when ``T^p = T^l_k``.

    ``kappa f_tilde f^2 beta^2 / (1 - beta^2)``, which equals the partial
    fraction ``kappa f_tilde (-f^2 + f^2/(2(1-beta)) + f^2/(2(1+beta)))`` used
    by the convex builder. The direct form avoids cancellation at small beta.
    """
    f = np.asarray(f, dtype=float)
    beta = _check_beta(beta)
    return kappa * f_tilde * f ** 2 * beta ** 2 / (1 - beta ** 2)


def energy_rate_linearized(f, beta, f_tilde, f_prev, kappa):
    """Upper bound of :func:`energy_rate`, tight at ``f = f_prev``.

    Only the concave ``-f^2`` part is replaced by its tangent
    ``-f_prev (2 f - f_prev) = -f^2 + (f - f_prev)^2``.
    """
    f = np.asarray(f, dtype=float)
    return energy_rate(f, beta, f_tilde, kappa) + kappa * f_tilde * (f - f_prev) ** 2


def energy_constraint_terms(f, beta, f_tilde, f_prev, kappa):
    """Per-user convex expressions whose sum is bounded by ``P_b``.

    ``f``/``beta`` are cvxpy expressions of length K; ``f_tilde`` is constant
    and ``f_prev`` may be a constant or a cvxpy Parameter. Units of ``f`` are
    the caller's: pass ``kappa`` pre-multiplied by the square of the unit.
    """
    return [
        kappa * f_tilde[k] * (
            -f_prev[k] * (2 * f[k] - f_prev[k])
            + cp.quad_over_lin(f[k], 2 * (1 - beta[k]))
            + cp.quad_over_lin(f[k], 2 * (1 + beta[k])))
        for k in range(len(f_tilde))
    ]


def local_time_linearized(beta, beta_prev, f_tilde, L, omega):
    """``omega (1 - beta_prev (2 beta - beta_prev)) L / f_tilde``.

    Tangent of the concave local time in beta, so never below the exact
    ``omega (1 - beta^2) L / f_tilde``. Works on numbers and on cvxpy
    expressions.
    """
    return omega * L / f_tilde * (1 - beta_prev * (2 * beta - beta_prev))


def local_time_constraint_terms(beta, beta_prev, f_tilde, L, omega):
    """Per-user affine left-hand sides of the ``<= T^p`` local-time bounds."""
    return [local_time_linearized(beta[k], beta_prev[k], f_tilde[k], L[k], omega[k])
            for k in range(len(f_tilde))]
