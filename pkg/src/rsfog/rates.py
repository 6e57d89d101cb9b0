"""Exact achievable rates and stage times.

Array conventions (0-based indices throughout):

* ``W``   : (K, 2, A_ut, A_u) uplink precoders, ``W[k, m]`` for split m.
* ``H``   : (K, A_ut, A_br) uplink channels; the BS sees ``H[k]^H W[k, m]``.
* ``p_c`` : (A_bt,) common downlink precoder, ``p`` : (K, A_bt) private ones.
* ``h``   : (K, A_bt) downlink channels; user k sees ``h[k]^H x``.

Rates are spectral efficiencies in bit/s/Hz. Noise is unit power because the
channels are noise-normalised when drawn.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

Stream = tuple  # (user, split)


class InfeasibleRateError(ValueError):
    """A user has data to move but a zero rate to move it with."""


def hermitian(A):
    return 0.5 * (A + A.conj().swapaxes(-1, -2))


def logdet2(A) -> float:
    """log2 det of a Hermitian positive-definite matrix via Cholesky."""
    L = np.linalg.cholesky(hermitian(A))
    return float(2.0 * np.sum(np.log2(np.abs(np.diag(L)))))


@dataclass(frozen=True)
class DecodingOrder:
    """SIC order at the BS; ``streams[0]`` is decoded first."""

    streams: tuple

    def __post_init__(self):
        streams = tuple(tuple(int(v) for v in s) for s in self.streams)
        object.__setattr__(self, "streams", streams)
        if len(set(streams)) != len(streams):
            raise ValueError("decoding order repeats a stream")

    @classmethod
    def full(cls, streams, K: int) -> "DecodingOrder":
        order = cls(streams)
        expected = {(k, m) for k in range(K) for m in (0, 1)}
        if set(order.streams) != expected:
            raise ValueError("decoding order must be a permutation of all (k, m) streams")
        return order

    def position(self, k: int, m: int) -> int:
        return self.streams.index((k, m))

    def after(self, k: int, m: int) -> tuple:
        """Streams decoded after (k, m): these still interfere with it."""
        return self.streams[self.position(k, m) + 1:]

    def __len__(self):
        return len(self.streams)

    def __iter__(self):
        return iter(self.streams)


def default_decoding_order(H, W_hint=None) -> DecodingOrder:
    """First splits of all users by descending ``||H_k||_F``, then second splits.

    Ties keep user-index order. ``W_hint`` is accepted for interface
    compatibility and ignored.
    """
    norms = np.linalg.norm(np.asarray(H).reshape(len(H), -1), axis=1)
    users = sorted(range(len(H)), key=lambda k: (-norms[k], k))
    return DecodingOrder([(k, 0) for k in users] + [(k, 1) for k in users])


def _check_dims(W, H):
    if W.ndim != 4 or H.ndim != 3 or W.shape[0] != H.shape[0] or W.shape[2] != H.shape[1]:
        raise ValueError(f"dimension mismatch: W{W.shape} vs H{H.shape}")


def received_covariance(W, H, streams: Sequence[Stream]):
    """``sum_{(i,j)} H_i^H W_ij W_ij^H H_i + I`` over the given streams."""
    W = np.asarray(W)
    H = np.asarray(H)
    _check_dims(W, H)
    Omega = np.eye(H.shape[2], dtype=complex)
    for i, j in streams:
        S = H[i].conj().T @ W[i, j]
        Omega += S @ S.conj().T
    return hermitian(Omega)


def uplink_interference(W, H, order: DecodingOrder, k: int, m: int):
    """Interference-plus-noise covariance seen when decoding stream (k, m)."""
    return received_covariance(W, H, order.after(k, m))


def sinr_matrix(S, Omega):
    """``S^H Omega^{-1} S`` computed with a Cholesky solve."""
    L = np.linalg.cholesky(hermitian(Omega))
    X = np.linalg.solve(L, S)
    return hermitian(X.conj().T @ X)


def stream_rate(S, Omega) -> float:
    if not np.any(S):
        return 0.0
    Gamma = sinr_matrix(S, Omega)
    return max(logdet2(np.eye(Gamma.shape[0]) + Gamma), 0.0)


def uplink_stream_rate(W, H, order: DecodingOrder, k: int, m: int) -> float:
    S = np.asarray(H)[k].conj().T @ np.asarray(W)[k, m]
    return stream_rate(S, uplink_interference(W, H, order, k, m))


def uplink_sum_capacity(W, H) -> float:
    """Joint ``log2 det(I + sum H^H W W^H H)``; SIC rates add up to this."""
    K = len(H)
    Omega = received_covariance(W, H, [(k, m) for k in range(K) for m in (0, 1)])
    return logdet2(Omega)


def downlink_powers(p_c, p, h):
    """Received power bookkeeping per user.

    Returns ``(S_c, I_c, S_p, I_p)`` with ``I_c = sum_j |h_k^H p_j|^2 + 1`` and
    ``I_p = I_c - S_p``.
    """
    h = np.asarray(h)
    G = np.abs(h.conj() @ np.asarray(p).T) ** 2  # G[k, j] = |h_k^H p_j|^2
    S_c = np.abs(h.conj() @ np.asarray(p_c)) ** 2
    S_p = np.diag(G).copy()
    I_c = G.sum(axis=1) + 1.0
    I_p = I_c - S_p
    return S_c, I_c, S_p, I_p


def downlink_rates(p_c, p, h):
    """Common-rate cap ``min_k log2(1 + S_c/I_c)`` and private rates."""
    S_c, I_c, S_p, I_p = downlink_powers(p_c, p, h)
    Rd_c = float(np.min(np.log2(1.0 + S_c / I_c)))
    Rd_p = np.log2(1.0 + S_p / I_p)
    return Rd_c, Rd_p


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    if np.any((num > 0) & ~(den > 0)):
        raise InfeasibleRateError("positive load with zero rate or CPU share")
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=num > 0)
    return out


def stage_times(uplink_rate, feedback_rate, beta, f, f_tilde, scenario, cloud=False):
    """Offload, processing and feedback stage durations in seconds.

    ``uplink_rate[k]`` is ``R^u_{k,1} + R^u_{k,2}`` and ``feedback_rate[k]`` is
    ``R^d_{k,c} + R^d_{k,p}``, both in bit/s/Hz. Zero numerators give zero
    terms whatever the denominator. With ``cloud=True`` nothing is processed
    locally.
    """
    cfg = scenario.cfg
    beta = np.asarray(beta, dtype=float)
    L = scenario.L_bit
    alpha = beta ** 2
    B = cfg.bandwidth_hz
    T_u = _ratio(alpha * L, B * np.asarray(uplink_rate))
    T_s = _ratio(scenario.omega * alpha * L, f)
    if cloud:
        T_l = np.zeros_like(T_s)
    else:
        T_l = _ratio(scenario.omega * (1.0 - alpha) * L, f_tilde)
    T_d = _ratio(cfg.epsilon_compress * alpha * L, B * np.asarray(feedback_rate))
    return float(T_u.max()), float(np.maximum(T_s, T_l).max()), float(T_d.max())


@dataclass
class RateReport:
    Ru: np.ndarray          # (K, 2) uplink stream rates
    Rd_c: float             # common-rate cap (0 when there is no common stream)
    Rd_c_alloc: np.ndarray  # (K,) allocated common portions
    Rd_p: np.ndarray        # (K,) private (or NOMA message) rates
    T_u: float
    T_p: float
    T_d: float

    @property
    def uplink(self):
        return self.Ru.sum(axis=1)

    @property
    def feedback(self):
        return self.Rd_c_alloc + self.Rd_p

    @property
    def total(self) -> float:
        return self.T_u + self.T_p + self.T_d


# ---------------------------------------------------------------------------
# scheme-level rate structure


@dataclass(frozen=True)
class DownlinkLink:
    """One decoding event at a user.

    ``signal`` and ``interferers`` index rows of the stacked precoder matrix
    whose last row (index K) is the common precoder. ``message`` is the user
    whose rate variable is capped, or ``None`` for the shared common rate.
    """

    decoder: int
    signal: int
    interferers: tuple
    message: int | None


@dataclass(frozen=True)
class RateModel:
    """Which streams exist and who interferes with whom, for one scheme."""

    name: str
    K: int
    streams: tuple
    interferers: Mapping
    links: tuple
    has_common: bool

    def user_streams(self, k: int):
        return [s for s in self.streams if s[0] == k]


def rs_model(H, K: int, order: DecodingOrder | None = None) -> RateModel:
    """Uplink RS with SIC in ``order`` plus downlink 1-layer RS."""
    order = order or default_decoding_order(H)
    interferers = {s: order.after(*s) for s in order}
    links = [DownlinkLink(k, K, tuple(range(K)), None) for k in range(K)]
    links += [DownlinkLink(k, k, tuple(j for j in range(K) if j != k), k) for k in range(K)]
    return RateModel("RS", K, order.streams, interferers, tuple(links), True)


def stacked_precoders(p_c, p):
    return np.vstack([np.asarray(p), np.asarray(p_c)[None, :]])


def model_uplink_rates(W, H, model: RateModel):
    """(K, 2) stream rates; inactive streams report 0."""
    K = model.K
    Ru = np.zeros((K, 2))
    for k, m in model.streams:
        S = H[k].conj().T @ W[k, m]
        Ru[k, m] = stream_rate(S, received_covariance(W, H, model.interferers[(k, m)]))
    return Ru


def link_rates(P, h, links):
    """Exact ``log2(1 + SINR)`` for every downlink decoding event."""
    out = np.empty(len(links))
    for n, ln in enumerate(links):
        g = h[ln.decoder].conj()
        s = abs(g @ P[ln.signal]) ** 2
        i = 1.0 + sum(abs(g @ P[j]) ** 2 for j in ln.interferers)
        out[n] = np.log2(1.0 + s / i)
    return out


def message_rates(P, h, model: RateModel):
    """Common cap and per-user message rate (min over decoders)."""
    r = link_rates(P, h, model.links)
    Rd_c = 0.0
    common = [r[n] for n, ln in enumerate(model.links) if ln.message is None]
    if common:
        Rd_c = float(min(common))
    Rd_p = np.full(model.K, np.inf)
    for n, ln in enumerate(model.links):
        if ln.message is not None:
            Rd_p[ln.message] = min(Rd_p[ln.message], r[n])
    Rd_p[~np.isfinite(Rd_p)] = 0.0
    return Rd_c, Rd_p


def allocate_common_rate(Rd_c: float, Rd_p, load, iters: int = 200):
    """Split the common rate to minimise ``max_k load_k / (c_k + Rd_p_k)``.

    Bisection on the achieved feedback-time level; ``load`` is
    ``epsilon * beta^2 * L / B`` in seconds x bit/s/Hz.
    """
    Rd_p = np.asarray(Rd_p, dtype=float)
    load = np.asarray(load, dtype=float)
    K = len(load)
    if Rd_c <= 0 or not np.any(load > 0):
        return np.zeros(K)

    def need(t):
        return np.maximum(load / t - Rd_p, 0.0)

    # an equal split is always achievable, so it bounds the optimum
    hi = float(np.max(_ratio(load, Rd_p + Rd_c / K)))
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= 0:
            break
        if need(mid).sum() <= Rd_c:
            hi = mid
        else:
            lo = mid
    c = need(hi)
    total = c.sum()
    if total > Rd_c:
        c *= Rd_c / total
    return c
