"""Alternating optimisation: closed-form auxiliaries vs. a convex subproblem.

Each AO iteration refreshes the quadratic-transform auxiliaries at the current
point, then solves one conic program (second-order and exponential cones) in
the beamformers, offloading split, server CPU shares, rate and time variables.
The objective trace records exact stage times recomputed from exact rates.

The cvxpy problem is built once per run with DPP parameters for everything
that changes between iterations (auxiliaries and the Taylor expansion point),
so later iterations skip canonicalisation.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace

import cvxpy as cp
import numpy as np

from .compute import BETA_MAX, optimal_local_frequency
from .rates import (RateModel, RateReport, allocate_common_rate, link_rates, message_rates,
                    model_uplink_rates, rs_model, stacked_precoders, stage_times)
from .scenario import Scenario
from .surrogate import LN2, AuxState, update_link_aux, update_stream_aux

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITER = "max-iter"
INFEASIBLE = "infeasible"

CARRYOVER_TOL = 1e-6

# Clarabel sometimes reports no progress, either at a point that already meets
# the 1e-7 accuracy contract or, on badly scaled instances, far from it. The
# settings below are tried in order until one returns an optimal point.
_TIGHT = dict(tol_feas=1e-7, tol_gap_abs=1e-7, tol_gap_rel=1e-7)
_SOLVER_LADDER = {
    "CLARABEL": ({}, _TIGHT,
                 dict(iterative_refinement_reltol=1e-14, iterative_refinement_abstol=1e-14,
                      iterative_refinement_max_iter=50),
                 dict(max_step_fraction=0.9),
                 dict(_TIGHT, static_regularization_constant=1e-7)),
}


class SubproblemError(RuntimeError):
    """The conic solver did not return an optimal point."""


class CarryoverError(RuntimeError):
    """The previous iterate is infeasible for the freshly assembled subproblem."""


@dataclass(frozen=True)
class Formulation:
    """Rate structure of a scheme plus whether all data goes to the server."""

    model: RateModel
    cloud: bool = False


@dataclass
class TransmitState:
    W: np.ndarray        # (K, 2, A_ut, A_u)
    p_c: np.ndarray      # (A_bt,)
    p: np.ndarray        # (K, A_bt)
    beta: np.ndarray     # (K,)
    f: np.ndarray        # (K,) server cycles/s
    f_tilde: np.ndarray  # (K,) local cycles/s
    rates: RateReport | None = None

    @property
    def objective(self) -> float:
        return self.rates.total

    @property
    def alpha(self):
        return self.beta ** 2

    def copy(self) -> "TransmitState":
        return replace(self, W=self.W.copy(), p_c=self.p_c.copy(), p=self.p.copy(),
                       beta=self.beta.copy(), f=self.f.copy(), f_tilde=self.f_tilde.copy())


@dataclass
class AOOptions:
    tol: float | None = None       # defaults to cfg.tol_ao
    max_iter: int | None = None    # defaults to cfg.max_iter
    solver: str = "CLARABEL"
    init: TransmitState | None = None
    check_carryover: bool = True
    equalize: bool = True


@dataclass
class Solution:
    state: TransmitState
    trace: list
    iterations: int
    status: str
    scheme: str = "RS_FOG"
    wall_s: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.state.objective

    @property
    def rates(self) -> RateReport:
        return self.state.rates


# ---------------------------------------------------------------------------
# exact evaluation


def evaluate(scenario: Scenario, form: Formulation, W, p_c, p, beta, f, f_tilde) -> TransmitState:
    """Exact rates and stage times of a point; the common rate is re-split optimally."""
    cfg = scenario.cfg
    model = form.model
    Ru = model_uplink_rates(W, scenario.H_up, model)
    Rd_c, Rd_p = message_rates(stacked_precoders(p_c, p), scenario.h_down, model)
    beta = np.asarray(beta, dtype=float)
    load = cfg.epsilon_compress * beta ** 2 * scenario.L_bit / cfg.bandwidth_hz
    alloc = allocate_common_rate(Rd_c, Rd_p, load) if model.has_common else np.zeros(model.K)
    T_u, T_p, T_d = stage_times(Ru.sum(axis=1), alloc + Rd_p, beta, f, f_tilde, scenario,
                                cloud=form.cloud)
    report = RateReport(Ru, Rd_c, alloc, Rd_p, T_u, T_p, T_d)
    return TransmitState(np.asarray(W), np.asarray(p_c), np.asarray(p), beta,
                         np.asarray(f, dtype=float), np.asarray(f_tilde, dtype=float), report)


def server_energy(scenario, state) -> float:
    cfg = scenario.cfg
    return float(np.sum(cfg.kappa * state.f ** 2 * scenario.omega * state.beta ** 2 * scenario.L_bit))


def _repair(scenario, form, W, p_c, p, beta, f, f_tilde):
    """Pull a solver output back inside the exact budgets (solver tolerance is ~1e-8)."""
    cfg = scenario.cfg
    W = W.copy()
    for k in range(scenario.K):
        pw = np.sum(np.abs(W[k]) ** 2)
        if pw > cfg.P_k:
            W[k] *= math.sqrt(cfg.P_k / pw)
    pw = np.sum(np.abs(p) ** 2) + np.sum(np.abs(p_c) ** 2)
    if pw > cfg.P_b:
        s = math.sqrt(cfg.P_b / pw)
        p, p_c = p * s, p_c * s
    if form.cloud:
        beta = np.ones(scenario.K)
    else:
        beta = np.clip(beta, 0.0, BETA_MAX)
    f = np.maximum(f, 0.0)
    if f.sum() > cfg.F_b_cyc_s:
        f = f * (cfg.F_b_cyc_s / f.sum())
    # offloading over a link with no rate is not possible; drop numerical dust
    Ru = model_uplink_rates(W, scenario.H_up, form.model).sum(axis=1)
    beta = np.where((Ru <= 0) | (f <= 0), 0.0, beta) if not form.cloud else beta
    state = evaluate(scenario, form, W, p_c, p, beta, f, f_tilde)
    e = server_energy(scenario, state)
    budget = cfg.P_b * state.rates.T_p
    if e > budget:
        # shrinking f can only lengthen T^p, so one rescale restores the bound
        state = evaluate(scenario, form, W, p_c, p, beta, f * math.sqrt(budget / e), f_tilde)
    return state


def equalize_local_times(scenario, form, state) -> TransmitState:
    """Trim offloading so every user's local time meets ``T^p``.

    Users finishing early locally offload more than needed; handing the excess
    back costs no processing time and shortens uplink and feedback.
    """
    if form.cloud:
        return state
    T_p = state.rates.T_p
    target = 1.0 - T_p * state.f_tilde / (scenario.omega * scenario.L_bit)
    beta = np.minimum(state.beta, np.sqrt(np.clip(target, 0.0, None)))
    if np.array_equal(beta, state.beta):
        return state
    new = evaluate(scenario, form, state.W, state.p_c, state.p, beta, state.f, state.f_tilde)
    return new if new.objective <= state.objective else state


def audit(scenario: Scenario, state: TransmitState, cloud: bool = False) -> dict:
    """Violation of every original problem constraint at ``state`` (0 = satisfied).

    Power, CPU and energy terms are absolute (W, cycles/s, J); the rest are
    in their natural units. Energy bounds use the exact stage time ``T^p``.
    """
    cfg = scenario.cfg
    r = state.rates
    user_power = np.sum(np.abs(state.W) ** 2, axis=(1, 2, 3)) - cfg.P_k
    bs_power = np.sum(np.abs(state.p) ** 2) + np.sum(np.abs(state.p_c) ** 2) - cfg.P_b
    local_energy = (cfg.kappa * state.f_tilde ** 2 * scenario.omega * (1 - state.beta ** 2)
                    * scenario.L_bit) - cfg.P_k * r.T_p
    out = {
        "user_power": float(np.max(user_power)),
        "bs_power": float(bs_power),
        "server_cpu": float(np.sum(state.f) - cfg.F_b_cyc_s),
        "bs_energy": server_energy(scenario, state) - cfg.P_b * r.T_p,
        "local_cpu": float(np.max(state.f_tilde - cfg.F_k_cyc_s)),
        "local_energy": 0.0 if cloud else float(np.max(local_energy)),
        "common_rate_nonneg": float(np.max(-r.Rd_c_alloc)),
        "common_rate_sum": float(np.sum(r.Rd_c_alloc) - r.Rd_c),
        "beta_range": float(max(np.max(-state.beta), np.max(state.beta - 1.0))),
    }
    if cloud:
        out["cloud_beta"] = float(np.max(np.abs(state.beta - 1.0)))
    return {k: max(v, 0.0) for k, v in out.items()}


# ---------------------------------------------------------------------------
# auxiliaries


def update_aux(scenario, form, state) -> AuxState:
    model = form.model
    Y, Phi = update_stream_aux(state.W, scenario.H_up, model.streams, model.interferers)
    y = update_link_aux(stacked_precoders(state.p_c, state.p), scenario.h_down, model.links)
    return AuxState(y, Y, Phi)


# ---------------------------------------------------------------------------
# subproblem


def _chol(A):
    return np.linalg.cholesky(0.5 * (A + A.conj().T))


def _real_block(G):
    """Real matrix acting on ``[Re x; Im x]`` as G acts on x."""
    return np.block([[G.real, -G.imag], [G.imag, G.real]])


class Subproblem:
    """The convex subproblem for fixed auxiliaries, as a parametrised cvxpy problem.

    Internally the beamformers are normalised by their power budgets and the
    server CPU shares by ``F_b`` so the conic data stays well scaled.
    ``families`` maps each constraint family name to its constraint list.
    """

    def __init__(self, scenario: Scenario, form: Formulation, solver: str = "CLARABEL"):
        self.scenario = scenario
        self.form = form
        self.solver = solver
        cfg = scenario.cfg
        model = form.model
        K = scenario.K
        self.K = K
        self.sqrt_Pk = math.sqrt(cfg.P_k)
        self.sqrt_Pb = math.sqrt(cfg.P_b)
        self.H = scenario.H_up * self.sqrt_Pk
        self.h = scenario.h_down * self.sqrt_Pb
        A_ut, A_u, A_bt = cfg.A_ut, cfg.A_u, cfg.A_bt
        self.f_tilde = optimal_local_frequency(cfg.P_k, cfg.kappa, cfg.F_k_cyc_s) * np.ones(K)
        L = scenario.L_bit
        omega = scenario.omega
        B = cfg.bandwidth_hz

        # -- variables; complex quantities are stacked real blocks so the
        # parametrised problem stays in cvxpy's cached real DPP path
        #   W (A_ut, A_u) -> [Re W; Im W] (2 A_ut, A_u)
        #   row x (A_bt,) -> [Re x, Im x] (2 A_bt,)
        self.Wv = {s: cp.Variable((2 * A_ut, A_u), name=f"W{s[0]}_{s[1]}") for s in model.streams}
        self.n_rows = K + int(model.has_common)
        self.Pv = cp.Variable((self.n_rows, 2 * A_bt), name="p")
        self.beta = None if form.cloud else cp.Variable(K, name="beta")
        beta = np.ones(K) if form.cloud else self.beta
        self.fh = cp.Variable(K, nonneg=True, name="f")
        self.Tu = cp.Variable(nonneg=True, name="T_u")
        self.Tp = cp.Variable(nonneg=True, name="T_p")
        self.Td = cp.Variable(nonneg=True, name="T_d")
        self.Ru = cp.Variable(len(model.streams), nonneg=True, name="R_u")
        self.Rp = cp.Variable(K, nonneg=True, name="R_p")
        self.Rc = cp.Variable(K, nonneg=True, name="R_c") if model.has_common else None
        self.stream_index = {s: i for i, s in enumerate(model.streams)}

        fam = {name: [] for name in (
            "uplink_rate", "downlink_common", "downlink_private", "offload_delay",
            "server_time", "local_time", "feedback_delay", "user_power", "bs_power",
            "server_cpu", "bs_energy", "beta_range")}

        # -- uplink surrogate caps on the received signals Z_s = H_k^H W_s, in
        # completed-square form
        #   cap = c0 - ||G Z_s - D||^2 - sum_t ||G Z_t||^2
        # with G = L^H Y^H / sqrt(ln2), D = L^H / sqrt(ln2), L L^H = I + Phi.
        # Every term stays O(1) even at SINRs near 1e9, where the expanded
        # const + linear - quadratic form cancels three numbers of that size.
        self.Z = {s: cp.Constant(_real_block(self.H[s[0]].conj().T)) @ self.Wv[s]
                  for s in model.streams}
        self.p_const, self.p_quad, self.p_target = {}, {}, {}
        for s in model.streams:
            i = self.stream_index[s]
            const = cp.Parameter(name=f"c{i}")
            quad = cp.Parameter((2 * A_u, 2 * cfg.A_br), name=f"G{i}")
            target = cp.Parameter((2 * A_u, A_u), name=f"D{i}")
            self.p_const[s], self.p_quad[s], self.p_target[s] = const, quad, target
            cap = const - cp.sum_squares(quad @ self.Z[s] - target)
            if model.interferers[s]:
                seen = cp.hstack([self.Z[t] for t in model.interferers[s]])
                cap = cap - cp.sum_squares(quad @ seen)
            fam["uplink_rate"].append(self.Ru[i] <= cap)

        # -- downlink surrogate caps; each log argument is divided by its value
        # a0 at the expansion point so the exponential cones see u ~ 1
        self.p_k0, self.p_clin, self.p_cquad, self.p_loga, self.u_link = [], [], [], [], []
        for n, ln in enumerate(model.links):
            k0 = cp.Parameter(name=f"k{n}")
            clin = cp.Parameter(2 * A_bt, name=f"y{n}")
            cquad = cp.Parameter((2 * A_bt, 2), name=f"q{n}")
            loga = cp.Parameter(nonneg=True, name=f"la{n}")
            self.p_k0.append(k0)
            self.p_clin.append(clin)
            self.p_cquad.append(cquad)
            self.p_loga.append(loga)
            arg = k0 + self.Pv[ln.signal] @ clin
            if ln.interferers:
                arg = arg - cp.sum_squares(self.Pv[list(ln.interferers), :] @ cquad)
            # epigraph scalar keeps the log argument a plain real variable
            u = cp.Variable(name=f"u{n}")
            self.u_link.append((u, arg))
            group = fam["downlink_common" if ln.message is None else "downlink_private"]
            rate = cp.sum(self.Rc) if ln.message is None else self.Rp[ln.message]
            group += [u <= arg, LN2 * rate <= cp.log(u) + loga]

        # -- stage times
        ru_user = [cp.sum(cp.hstack([self.Ru[self.stream_index[s]] for s in model.user_streams(k)]))
                   if model.user_streams(k) else 0 for k in range(K)]
        rd_user = self.Rp + self.Rc if model.has_common else self.Rp
        a_u = np.sqrt(L / B)
        a_d = np.sqrt(cfg.epsilon_compress * L / B)
        self.p_beta = cp.Parameter(K, name="beta_prev")
        self.p_beta_sq = cp.Parameter(K, nonneg=True, name="beta_prev_sq")
        self.p_f = cp.Parameter(K, nonneg=True, name="f_prev")
        self.p_f_sq = cp.Parameter(K, nonneg=True, name="f_prev_sq")
        for k in range(K):
            fam["offload_delay"].append(cp.quad_over_lin(beta[k] * a_u[k], ru_user[k]) <= self.Tu)
            fam["feedback_delay"].append(cp.quad_over_lin(beta[k] * a_d[k], rd_user[k]) <= self.Td)
        F_b = cfg.F_b_cyc_s
        kappa_n = cfg.kappa * F_b ** 2  # kappa in units of F_b
        if form.cloud:
            for k in range(K):
                fam["server_time"].append(omega[k] * L[k] / F_b * cp.inv_pos(self.fh[k]) <= self.Tp)
            fam["bs_energy"].append(
                cp.sum(cp.multiply(kappa_n * omega * L, cp.square(self.fh))) <= cfg.P_b * self.Tp)
        else:
            a_s = np.sqrt(omega * L / F_b)
            c_l = omega * L / self.f_tilde
            for k in range(K):
                fam["server_time"].append(cp.quad_over_lin(beta[k] * a_s[k], self.fh[k]) <= self.Tp)
                # tangent of omega (1 - beta^2) L / f_tilde at beta_prev
                fam["local_time"].append(
                    c_l[k] * (1 + self.p_beta_sq[k]) - 2 * c_l[k] * cp.multiply(self.p_beta[k], beta[k])
                    <= self.Tp)
            energy = []
            for k in range(K):
                w = kappa_n * self.f_tilde[k]
                energy.append(w * (self.p_f_sq[k] - 2 * cp.multiply(self.p_f[k], self.fh[k])
                                   + cp.quad_over_lin(self.fh[k], 2 * (1 - beta[k]))
                                   + cp.quad_over_lin(self.fh[k], 2 * (1 + beta[k]))))
            fam["bs_energy"].append(cp.sum(cp.hstack(energy)) <= cfg.P_b)
            fam["beta_range"] += [self.beta >= 0, self.beta <= BETA_MAX]

        # -- budgets
        for k in range(K):
            ws = [self.Wv[s] for s in model.user_streams(k)]
            if ws:
                fam["user_power"].append(cp.sum([cp.sum_squares(w) for w in ws]) <= 1)
        fam["bs_power"].append(cp.sum_squares(self.Pv) <= 1)
        fam["server_cpu"].append(cp.sum(self.fh) <= 1)

        self.families = fam
        self.constraints = [c for group in fam.values() for c in group]
        self.problem = cp.Problem(cp.Minimize(self.Tu + self.Tp + self.Td), self.constraints)

    # -- parameters

    def assemble(self, aux: AuxState, prev: TransmitState) -> "Subproblem":
        """Load auxiliaries and the expansion point into the parameters."""
        model = self.form.model
        F_b = self.scenario.cfg.F_b_cyc_s
        r = math.sqrt(LN2)
        for s in model.streams:
            k, m = s
            Y, Phi = aux.Y[k, m], aux.Phi[k, m]
            n = Phi.shape[0]
            Lc = _chol(np.eye(n) + Phi)
            G = Lc.conj().T @ Y.conj().T
            logdet = 2.0 * np.sum(np.log(np.abs(np.diag(Lc)))) / LN2
            self.p_const[s].value = float(logdet + (n - np.sum(np.abs(G) ** 2)) / LN2)
            self.p_quad[s].value = _real_block(G / r)
            D = Lc.conj().T / r
            self.p_target[s].value = np.vstack([D.real, D.imag])
        rates = link_rates(stacked_precoders(prev.p_c, prev.p), self.scenario.h_down, model.links)
        for n, ln in enumerate(model.links):
            # log argument at the expansion point is 1 + SINR = 2^rate
            a0 = 2.0 ** rates[n]
            y = aux.y[n]
            c = np.conj(y * self.h[ln.decoder])
            self.p_k0[n].value = (1.0 - abs(y) ** 2) / a0
            self.p_clin[n].value = 2.0 * np.concatenate([c.real, -c.imag]) / a0
            c = c / math.sqrt(a0)
            self.p_cquad[n].value = np.block([[c.real[:, None], c.imag[:, None]],
                                               [-c.imag[:, None], c.real[:, None]]])
            self.p_loga[n].value = math.log(a0)
        self.p_beta.value = prev.beta.astype(float)
        self.p_beta_sq.value = prev.beta.astype(float) ** 2
        fp = prev.f / F_b
        self.p_f.value = fp
        self.p_f_sq.value = fp ** 2
        return self

    def load_point(self, state: TransmitState):
        """Write a TransmitState (with exact rates) into the variable values."""
        model = self.form.model
        for (k, m), v in self.Wv.items():
            Wk = state.W[k, m] / self.sqrt_Pk
            v.value = np.vstack([Wk.real, Wk.imag])
        P = stacked_precoders(state.p_c, state.p)[:self.n_rows] / self.sqrt_Pb
        self.Pv.value = np.hstack([P.real, P.imag])
        if self.Rc is not None:
            self.Rc.value = state.rates.Rd_c_alloc
        if self.beta is not None:
            self.beta.value = state.beta
        self.fh.value = state.f / self.scenario.cfg.F_b_cyc_s
        self.Ru.value = np.array([state.rates.Ru[s] for s in model.streams])
        self.Rp.value = state.rates.Rd_p
        self.Tu.value = state.rates.T_u
        self.Tp.value = state.rates.T_p
        self.Td.value = state.rates.T_d
        for u, arg in self.u_link:
            u.value = float(np.real(arg.value))

    def violations(self, state: TransmitState) -> dict:
        """Largest violation per constraint family at ``state``."""
        self.load_point(state)
        out = {}
        for name, group in self.families.items():
            # quad_over_lin(0, 0) evaluates to nan; as a rotated cone it holds
            with np.errstate(invalid="ignore", divide="ignore"):
                v = [float(np.nan_to_num(np.max(c.violation()), nan=0.0)) for c in group]
            out[name] = max(v) if v else 0.0
        return out

    def solve(self) -> TransmitState:
        status, err = None, "no attempt"
        for settings in _SOLVER_LADDER.get(self.solver, ({},)):
            try:
                with warnings.catch_warnings():
                    # inaccurate points are repaired and re-evaluated exactly
                    warnings.simplefilter("ignore", UserWarning)
                    self.problem.solve(solver=self.solver, **settings)
            except cp.error.SolverError as exc:
                err = str(exc)
                continue
            status = self.problem.status
            if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
                break
            err = f"subproblem status {status}"
        else:
            raise SubproblemError(err)
        cfg = self.scenario.cfg
        K = self.K
        W = np.zeros((K, 2, cfg.A_ut, cfg.A_u), dtype=complex)
        A_ut, A_bt = cfg.A_ut, cfg.A_bt
        for (k, m), v in self.Wv.items():
            W[k, m] = (v.value[:A_ut] + 1j * v.value[A_ut:]) * self.sqrt_Pk
        P = (self.Pv.value[:, :A_bt] + 1j * self.Pv.value[:, A_bt:]) * self.sqrt_Pb
        p = P[:K]
        p_c = P[K] if self.n_rows > K else np.zeros(A_bt, complex)
        beta = np.ones(K) if self.form.cloud else np.asarray(self.beta.value, dtype=float)
        f = np.asarray(self.fh.value, dtype=float) * cfg.F_b_cyc_s
        self.last_status = status
        self.last_value = float(self.problem.value)
        return _repair(self.scenario, self.form, W, p_c, p, beta, f, self.f_tilde)


def assemble_subproblem(scenario, aux, prev, form: Formulation | None = None, solver="CLARABEL"):
    form = form or Formulation(rs_model(scenario.H_up, scenario.K))
    return Subproblem(scenario, form, solver).assemble(aux, prev)


def solve_subproblem(sub: Subproblem) -> TransmitState:
    return sub.solve()


# ---------------------------------------------------------------------------
# initialisation and the AO loop


def _dominant_left(M):
    u, _, _ = np.linalg.svd(M, full_matrices=False)
    return u[:, 0]


def initial_f(scenario, form, beta) -> np.ndarray:
    """Equal server shares, shrunk until the BS energy bound holds."""
    cfg = scenario.cfg
    K = scenario.K
    f = cfg.F_b_cyc_s / K
    f_tilde = optimal_local_frequency(cfg.P_k, cfg.kappa, cfg.F_k_cyc_s)
    if form.cloud:
        load = scenario.omega * scenario.L_bit
        # kappa f^2 sum(load) <= P_b max(load) / f
        f_max = np.cbrt(cfg.P_b * load.max() / (cfg.kappa * load.sum()))
    else:
        b2 = np.asarray(beta) ** 2
        rate = np.sum(cfg.kappa * f_tilde * b2 / (1 - b2))
        f_max = math.sqrt(cfg.P_b / rate) if rate > 0 else np.inf
    return np.full(K, min(f, 0.99 * f_max))


def initialize(scenario: Scenario, seed: int = 0, form: Formulation | None = None) -> TransmitState:
    """Deterministic feasible starting point.

    Full power on the dominant transmit eigenmodes split evenly over the
    active uplink streams; matched-filter private precoders with 90% of the
    BS power and the common precoder on the dominant direction of the stacked
    downlink channel with the remaining 10%. ``seed`` is unused: the start is
    a function of the channels only.
    """
    cfg = scenario.cfg
    form = form or Formulation(rs_model(scenario.H_up, scenario.K))
    model = form.model
    K = scenario.K
    W = np.zeros((K, 2, cfg.A_ut, cfg.A_u), dtype=complex)
    for k in range(K):
        streams = model.user_streams(k)
        # transmit directions: left singular vectors of H_k (right ones of H_k^H)
        U, _, _ = np.linalg.svd(scenario.H_up[k], full_matrices=True)
        base = U[:, :cfg.A_u] * math.sqrt(cfg.P_k / (len(streams) * cfg.A_u))
        for _, m in streams:
            W[k, m] = base
    h = scenario.h_down
    common_share = 0.1 if model.has_common else 0.0
    p = h / np.linalg.norm(h, axis=1, keepdims=True) * math.sqrt((1 - common_share) * cfg.P_b / K)
    if model.has_common:
        p_c = _dominant_left(h.T) * math.sqrt(common_share * cfg.P_b)
    else:
        p_c = np.zeros(cfg.A_bt, dtype=complex)
    beta = np.ones(K) if form.cloud else np.full(K, 0.5)
    f = initial_f(scenario, form, beta)
    f_tilde = optimal_local_frequency(cfg.P_k, cfg.kappa, cfg.F_k_cyc_s) * np.ones(K)
    return evaluate(scenario, form, W, p_c, p, beta, f, f_tilde)


def run_ao(scenario: Scenario, form: Formulation, opts: AOOptions | None = None,
           scheme: str = "RS_FOG") -> Solution:
    opts = opts or AOOptions()
    cfg = scenario.cfg
    tol = cfg.tol_ao if opts.tol is None else opts.tol
    max_iter = cfg.max_iter if opts.max_iter is None else opts.max_iter
    t0 = time.perf_counter()
    state = opts.init if opts.init is not None else initialize(scenario, form=form)
    if opts.init is not None:
        # re-evaluate so rates/times follow this scheme's structure
        state = evaluate(scenario, form, state.W, state.p_c, state.p, state.beta, state.f,
                         state.f_tilde)
    trace = [state.objective]
    sub = Subproblem(scenario, form, opts.solver)
    status = MAX_ITER
    notes = []
    n = 0
    for n in range(1, max_iter + 1):
        aux = update_aux(scenario, form, state)
        sub.assemble(aux, state)
        if opts.check_carryover:
            viol = sub.violations(state)
            worst = max(viol, key=viol.get)
            if viol[worst] > CARRYOVER_TOL:
                raise CarryoverError(
                    f"iteration {n}: previous point violates {worst} by {viol[worst]:.3e}")
        try:
            new = sub.solve()
        except SubproblemError as exc:
            if n == 1:
                raise
            notes.append(f"iteration {n}: {exc}; keeping previous point")
            log.warning("%s", notes[-1])
            status = CONVERGED if abs(trace[-1] - trace[-2]) <= tol * trace[-2] else MAX_ITER
            break
        if opts.equalize:
            new = equalize_local_times(scenario, form, new)
        if new.objective > state.objective:
            # solver tolerance can leave the exact objective a hair above the
            # previous one; the previous point is then (numerically) optimal
            notes.append(f"iteration {n}: no descent ({new.objective - state.objective:.2e}); stopped")
            trace.append(state.objective)
            status = CONVERGED
            break
        rel = abs(state.objective - new.objective) / max(state.objective, 1e-300)
        state = new
        trace.append(state.objective)
        if rel <= tol:
            status = CONVERGED
            break
    return Solution(state, trace, n, status, scheme, time.perf_counter() - t0, notes)


def ao_minimize(scenario: Scenario, opts: AOOptions | None = None) -> Solution:
    """Joint uplink/downlink rate-splitting design with partial offloading."""
    form = Formulation(rs_model(scenario.H_up, scenario.K))
    return run_ao(scenario, form, opts, "RS_FOG")
