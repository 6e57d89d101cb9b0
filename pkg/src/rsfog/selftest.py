"""Invariant checks run by ``rsfog selftest``.

Every check is deterministic for fixed seeds and returns a :class:`Check`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import surrogate
from .baselines import solve_rs_from_sdma
from .oracle import grid_optimum, scalar_config
from .rates import (DecodingOrder, link_rates, rs_model, stacked_precoders, uplink_stream_rate,
                    uplink_sum_capacity)
from .scenario import SystemConfig, build_scenario
from .solver import AOOptions, ao_minimize, audit

AUDIT_TOL = 1e-6
SLACK = 1e-6


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def random_point(rng, K, cfg):
    """Random precoders at full power for a K-user instance."""
    W = rng.standard_normal((K, 2, cfg.A_ut, cfg.A_u)) + 1j * rng.standard_normal((K, 2, cfg.A_ut, cfg.A_u))
    W *= np.sqrt(cfg.P_k / np.sum(np.abs(W) ** 2, axis=(1, 2, 3)))[:, None, None, None]
    P = rng.standard_normal((K + 1, cfg.A_bt)) + 1j * rng.standard_normal((K + 1, cfg.A_bt))
    P *= np.sqrt(cfg.P_b / np.sum(np.abs(P) ** 2))
    return W, P[K], P[:K]


def random_order(rng, K):
    streams = [(k, m) for k in range(K) for m in (0, 1)]
    return DecodingOrder([streams[i] for i in rng.permutation(len(streams))])


def tightness_gaps(n_instances=100, seed=0, max_users=4):
    """Largest surrogate-vs-exact gap per family over random instances."""
    rng = np.random.default_rng(seed)
    gaps = {"downlink_common": 0.0, "downlink_private": 0.0, "uplink_first": 0.0, "uplink_second": 0.0}
    for n in range(n_instances):
        K = int(rng.integers(1, max_users + 1))
        sc = build_scenario(SystemConfig(K=K), seed=int(rng.integers(1 << 31)))
        W, p_c, p = random_point(rng, K, sc.cfg)
        H, h = sc.H_up, sc.h_down
        order = random_order(rng, K)
        Y, Phi = surrogate.update_uplink_aux(W, H, order)
        for k, m in order:
            exact = uplink_stream_rate(W, H, order, k, m)
            approx = surrogate.eval_uplink_surrogate(Y, Phi, W, H, order, k, m)
            key = "uplink_first" if m == 0 else "uplink_second"
            gaps[key] = max(gaps[key], abs(approx - exact))
        y_c, y_p = surrogate.update_downlink_aux(p_c, p, h)
        exact = link_rates(stacked_precoders(p_c, p), h, rs_model(H, K).links)
        for k in range(K):
            gaps["downlink_common"] = max(gaps["downlink_common"], abs(
                surrogate.eval_downlink_surrogate(y_c[k], p_c, p, h, "common", k) - exact[k]))
            gaps["downlink_private"] = max(gaps["downlink_private"], abs(
                surrogate.eval_downlink_surrogate(y_p[k], p_c, p, h, "private", k) - exact[K + k]))
    return gaps


def check_tightness(n_instances=100, seed=0) -> Check:
    gaps = tightness_gaps(n_instances, seed)
    worst = max(gaps.values())
    return Check("surrogate tightness", worst < 1e-9,
                 ", ".join(f"{k}={v:.1e}" for k, v in gaps.items()))


def sum_rate_gap(n_instances=100, seed=1, max_users=4) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        K = int(rng.integers(1, max_users + 1))
        sc = build_scenario(SystemConfig(K=K), seed=int(rng.integers(1 << 31)))
        W, _, _ = random_point(rng, K, sc.cfg)
        order = random_order(rng, K)
        total = sum(uplink_stream_rate(W, sc.H_up, order, k, m) for k, m in order)
        worst = max(worst, abs(total - uplink_sum_capacity(W, sc.H_up)))
    return worst


def check_sum_rate(n_instances=100, seed=1) -> Check:
    gap = sum_rate_gap(n_instances, seed)
    return Check("sum-rate conservation", gap < 1e-9, f"max gap {gap:.1e}")


def trace_rise(trace) -> float:
    """Largest increase between consecutive trace entries."""
    return float(np.max(np.diff(trace), initial=0.0))


def equalization_spread(scenario, state) -> float:
    """``max_k |T_l_k - T^p| / T^p``."""
    t_local = scenario.omega * (1 - state.beta ** 2) * scenario.L_bit / state.f_tilde
    return float(np.max(np.abs(t_local - state.rates.T_p)) / state.rates.T_p)


def run_selftest(seeds=(0,), K=4) -> list:
    checks = [check_tightness(), check_sum_rate()]
    cfg = SystemConfig(K=K)
    for seed in seeds:
        sc = build_scenario(cfg, seed)
        sol = ao_minimize(sc)
        rise = trace_rise(sol.trace)
        checks.append(Check(f"monotone descent (seed {seed})",
                            rise <= SLACK and sol.status == "converged",
                            f"max rise {rise:.1e}, {sol.status} in {sol.iterations}"))
        viol = audit(sc, sol.state)
        worst = max(viol, key=viol.get)
        checks.append(Check(f"constraint audit (seed {seed})", viol[worst] <= AUDIT_TOL,
                            f"worst {worst}={viol[worst]:.1e}"))
        beta = sol.state.beta
        if np.all((beta >= 0.01) & (beta <= 0.99)):
            spread = equalization_spread(sc, sol.state)
            checks.append(Check(f"local-time equalization (seed {seed})", spread <= 1e-2,
                                f"spread {spread:.1e}"))
        rs, sdma = solve_rs_from_sdma(sc, AOOptions())
        checks.append(Check(f"RS <= SDMA nesting (seed {seed})",
                            rs.objective <= sdma.objective + 1e-3,
                            f"{rs.objective:.6f} vs {sdma.objective:.6f}"))
        one = build_scenario(scalar_config(cfg), seed)
        grid = grid_optimum(one)
        ao = ao_minimize(one).objective
        rel = abs(ao - grid.objective) / grid.objective
        checks.append(Check(f"single-user grid oracle (seed {seed})", rel <= 0.02,
                            f"AO {ao:.6f} vs grid {grid.objective:.6f} ({rel:.1e})"))
    return checks
