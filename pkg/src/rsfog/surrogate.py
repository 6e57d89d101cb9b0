"""Quadratic-transform surrogates for scalar and matrix rates.

Scalar form, for a link with useful amplitude ``s`` and interference-plus-noise
power ``I``::

    log2(1 + |s|^2 / I) = max_y log2(1 + 2 Re(conj(y) s) - |y|^2 I),  y* = s / I

Matrix form, for a stream with effective channel ``S = H^H W`` and
interference covariance ``Omega``::

    log2 det(I + S^H Omega^{-1} S)
        = max_{Y, Phi} log2 det(I + Phi)
          + Tr((I + Phi)(2 Re(S^H Y) - Y^H (S S^H + Omega) Y) - Phi) / ln 2

with ``Y* = (S S^H + Omega)^{-1} S`` and ``Phi* = S^H Omega^{-1} S``. For any
auxiliaries the right-hand side never exceeds the exact rate, which is what
makes the rate constraints of the convex subproblem inner approximations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import (DecodingOrder, downlink_powers, hermitian, logdet2, received_covariance,
                    sinr_matrix)

LN2 = np.log(2.0)


class SurrogateDomainError(ValueError):
    """The surrogate's log argument is non-positive (stale auxiliary)."""


@dataclass
class AuxState:
    """Auxiliaries of one AO iteration.

    ``y`` holds one complex scalar per downlink decoding event (in the order
    of ``RateModel.links``); ``Y[k, m]`` and ``Phi[k, m]`` are zero for
    streams a scheme does not use.
    """

    y: np.ndarray
    Y: np.ndarray
    Phi: np.ndarray


# -- scalar (downlink) ---------------------------------------------------------


def scalar_aux(s, I):
    return s / I


def scalar_surrogate(y, s, I) -> float:
    arg = 1.0 + 2.0 * np.real(np.conj(y) * s) - abs(y) ** 2 * I
    if not arg > 0:
        raise SurrogateDomainError(f"surrogate log argument {arg:.3e} <= 0")
    return float(np.log2(arg))


def _link_terms(P, h, link):
    g = h[link.decoder].conj()
    s = g @ P[link.signal]
    I = 1.0 + sum(abs(g @ P[j]) ** 2 for j in link.interferers)
    return s, I


def update_link_aux(P, h, links):
    out = np.empty(len(links), dtype=complex)
    for n, ln in enumerate(links):
        s, I = _link_terms(P, h, ln)
        out[n] = scalar_aux(s, I)
    return out


def eval_link_surrogates(y, P, h, links):
    return np.array([scalar_surrogate(y[n], *_link_terms(P, h, ln)) for n, ln in enumerate(links)])


def update_downlink_aux(p_c, p, h):
    """Closed-form ``y_c[k] = h_k^H p_c / I_kc`` and ``y_p[k] = h_k^H p_k / I_kp``."""
    h = np.asarray(h)
    _, I_c, _, I_p = downlink_powers(p_c, p, h)
    s_c = h.conj() @ np.asarray(p_c)
    s_p = np.einsum("ka,ka->k", h.conj(), np.asarray(p))
    return s_c / I_c, s_p / I_p


def eval_downlink_surrogate(y, p_c, p, h, which: str, k: int) -> float:
    """Scalar surrogate of the common (``"common"``) or private rate of user k."""
    h = np.asarray(h)
    _, I_c, _, I_p = downlink_powers(p_c, p, h)
    if which == "common":
        return scalar_surrogate(y, h[k].conj() @ np.asarray(p_c), I_c[k])
    if which == "private":
        return scalar_surrogate(y, h[k].conj() @ np.asarray(p)[k], I_p[k])
    raise ValueError(f"which must be 'common' or 'private', got {which!r}")


# -- matrix (uplink) ------------------------------------------------------------


def matrix_aux(S, Omega):
    """Closed-form ``(Y*, Phi*)`` for effective channel S and covariance Omega."""
    Y = np.linalg.solve(hermitian(S @ S.conj().T + Omega), S)
    Phi = sinr_matrix(S, Omega)
    return Y, Phi


def matrix_surrogate_expanded(Y, Phi, S, Omega) -> float:
    """The surrogate exactly as written in the module docstring.

    Loses about ``eps * ||Phi||`` to cancellation at high SINR; kept as a
    cross-check for :func:`matrix_surrogate`.
    """
    n = Phi.shape[0]
    IP = np.eye(n) + hermitian(Phi)
    # 2 Re(S^H Y) taken as its Hermitian part so the trace is real
    X = S.conj().T @ Y + Y.conj().T @ S - Y.conj().T @ (S @ S.conj().T + Omega) @ Y
    return logdet2(IP) + float(np.real(np.trace(IP @ X - Phi))) / LN2


def matrix_surrogate(Y, Phi, S, Omega) -> float:
    """Matrix surrogate in a cancellation-free arrangement.

    With ``A = S S^H + Omega``, ``Gamma = S^H Omega^{-1} S`` and
    ``E = Y - A^{-1} S`` the trace term equals
    ``n - Tr((I+Phi)(I+Gamma)^{-1}) - Tr((I+Phi) E^H A E)``, which stays
    accurate when ``Phi`` is of order 1e9.
    """
    n = Phi.shape[0]
    IP = np.eye(n) + hermitian(Phi)
    A = hermitian(S @ S.conj().T + Omega)
    E = Y - np.linalg.solve(A, S)
    G = np.eye(n) + sinr_matrix(S, Omega)
    ratio = np.trace(np.linalg.solve(G, IP))
    penalty = np.trace(IP @ E.conj().T @ A @ E)
    return logdet2(IP) + float(np.real(n - ratio - penalty)) / LN2


def _stream_S(W, H, k, m):
    return np.asarray(H)[k].conj().T @ np.asarray(W)[k, m]


def update_stream_aux(W, H, streams, interferers):
    """Auxiliaries for every listed stream; unused slots stay zero."""
    W = np.asarray(W)
    K, _, _, A_u = W.shape
    A_br = np.asarray(H).shape[2]
    Y = np.zeros((K, 2, A_br, A_u), dtype=complex)
    Phi = np.zeros((K, 2, A_u, A_u), dtype=complex)
    for k, m in streams:
        Omega = received_covariance(W, H, interferers[(k, m)])
        Y[k, m], Phi[k, m] = matrix_aux(_stream_S(W, H, k, m), Omega)
    return Y, Phi


def update_uplink_aux(W, H, order: DecodingOrder):
    """Closed-form uplink auxiliaries for the RS decoding ``order``."""
    return update_stream_aux(W, H, order.streams, {s: order.after(*s) for s in order})


def eval_uplink_surrogate(Y, Phi, W, H, order: DecodingOrder, k: int, m: int) -> float:
    Omega = received_covariance(W, H, order.after(k, m))
    return matrix_surrogate(Y[k, m], Phi[k, m], _stream_S(W, H, k, m), Omega)
