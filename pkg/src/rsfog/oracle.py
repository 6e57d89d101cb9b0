"""Brute-force reference optimum for a single-antenna, single-user instance.

Used by the self-test and the test suite to check the AO result on a case
small enough to enumerate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compute import optimal_local_frequency
from .rates import model_uplink_rates, rs_model
from .scenario import Scenario


@dataclass
class GridOptimum:
    objective: float
    beta: float
    split: float
    f: float


def scalar_config(cfg):
    """``cfg`` reduced to one user with one antenna everywhere."""
    return cfg.replace(K=1, A_ut=1, A_br=1, A_bt=1, A_u=1)


def best_server_frequency(beta, L, omega, f_tilde, cfg):
    """Fastest server clock meeting ``kappa f^2 omega beta^2 L <= P_b T^p`` and ``f <= F_b``.

    The energy bound holds iff ``f <= cbrt(P_b / kappa)`` (server branch of
    ``T^p``) or ``f <= sqrt(P_b T_l / (kappa omega beta^2 L))`` (local branch).
    """
    load = omega * beta ** 2 * L
    t_local = omega * (1 - beta ** 2) * L / f_tilde
    f1 = np.cbrt(cfg.P_b / cfg.kappa)
    with np.errstate(divide="ignore", invalid="ignore"):
        f2 = np.sqrt(cfg.P_b * t_local / (cfg.kappa * load))
    f2 = np.where(load > 0, f2, np.inf)
    return np.minimum(cfg.F_b_cyc_s, np.maximum(f1, f2))


def _total_time(beta, rate_up, rate_down, scenario, f_tilde):
    cfg = scenario.cfg
    L = scenario.L_bit[0]
    omega = scenario.omega[0]
    b2 = beta ** 2
    f = best_server_frequency(beta, L, omega, f_tilde, cfg)
    t_u = b2 * L / (cfg.bandwidth_hz * rate_up)
    t_p = np.maximum(omega * b2 * L / f, omega * (1 - b2) * L / f_tilde)
    t_d = cfg.epsilon_compress * b2 * L / (cfg.bandwidth_hz * rate_down)
    return t_u + t_p + t_d, f


def grid_optimum(scenario: Scenario, n_beta: int = 200, n_split: int = 200,
                 zoom: int = 2) -> GridOptimum:
    """Minimise total time over a (beta, uplink power split) grid.

    The uplink power ``P_k`` is split as ``(s, 1 - s)`` over the two streams
    and the exact SIC rates are evaluated for every ``s``. The downlink
    carries full BS power, which for one user and one antenna attains
    ``log2(1 + |h|^2 P_b)`` however it is split. ``zoom`` extra passes refine
    the beta grid around the incumbent.
    """
    cfg = scenario.cfg
    if scenario.K != 1 or (cfg.A_ut, cfg.A_br, cfg.A_bt, cfg.A_u) != (1, 1, 1, 1):
        raise ValueError("grid oracle needs K=1 with single antennas")
    model = rs_model(scenario.H_up, 1)
    f_tilde = float(optimal_local_frequency(cfg.P_k, cfg.kappa, cfg.F_k_cyc_s))
    rate_down = np.log2(1 + abs(scenario.h_down[0, 0]) ** 2 * cfg.P_b)
    splits = np.linspace(0.0, 1.0, n_split)
    rate_up = np.empty(n_split)
    for i, s in enumerate(splits):
        W = np.zeros((1, 2, 1, 1), dtype=complex)
        W[0, 0, 0, 0] = np.sqrt(s * cfg.P_k)
        W[0, 1, 0, 0] = np.sqrt((1 - s) * cfg.P_k)
        rate_up[i] = model_uplink_rates(W, scenario.H_up, model).sum()

    lo, hi = 0.0, 1.0
    best = None
    for _ in range(zoom + 1):
        betas = np.linspace(lo, hi, n_beta)
        B, R = np.meshgrid(betas, rate_up, indexing="ij")
        T, F = _total_time(B, R, rate_down, scenario, f_tilde)
        i, j = np.unravel_index(np.argmin(T), T.shape)
        if best is None or T[i, j] < best.objective:
            best = GridOptimum(float(T[i, j]), float(betas[i]), float(splits[j]), float(F[i, j]))
        step = betas[1] - betas[0]
        lo, hi = max(0.0, best.beta - 2 * step), min(1.0, best.beta + 2 * step)
    return best
