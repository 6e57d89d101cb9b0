"""Comparison schemes built from the same AO machinery.

Each scheme is a :class:`RateModel` (which streams exist, who interferes with
whom, which downlink decoding events cap which rates) plus the cloud flag.
"""

from __future__ import annotations

import enum

import numpy as np

from .rates import DownlinkLink, RateModel, default_decoding_order, rs_model
from .scenario import Scenario
from .solver import AOOptions, Formulation, Solution, run_ao


class SchemeKind(str, enum.Enum):
    RS_FOG = "RS_FOG"
    SDMA = "SDMA"
    NOMA = "NOMA"
    RS_CLOUD = "RS_CLOUD"

    @classmethod
    def parse(cls, name: str) -> "SchemeKind":
        try:
            return cls(name.strip().upper())
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown scheme {name!r} (expected one of {valid})") from None


def sdma_model(H, K: int) -> RateModel:
    """One stream per user, everything else treated as noise, no common stream."""
    streams = tuple((k, 0) for k in range(K))
    interferers = {(k, 0): tuple((i, 0) for i in range(K) if i != k) for k in range(K)}
    links = tuple(DownlinkLink(k, k, tuple(j for j in range(K) if j != k), k) for k in range(K))
    return RateModel("SDMA", K, streams, interferers, links, False)


def downlink_noma_order(h) -> list:
    """Users by descending ``||h_k||``, ties by index; position 0 is the strongest."""
    norms = np.linalg.norm(np.asarray(h), axis=1)
    return sorted(range(len(norms)), key=lambda k: (-norms[k], k))


def noma_model(H, h, K: int) -> RateModel:
    """Uplink SIC over single streams; downlink superposition coding.

    Downlink: the user at position i decodes every weaker user's message
    (positions j > i) before its own, so message j is decoded by positions
    0..j with the stronger users' messages (positions l < j) as interference.
    """
    up = default_decoding_order(H)
    first = [s for s in up if s[1] == 0]
    interferers = {s: tuple(first[n + 1:]) for n, s in enumerate(first)}
    o = downlink_noma_order(h)
    links = []
    for j in range(K):
        stronger = tuple(o[l] for l in range(j))
        for i in range(j + 1):
            links.append(DownlinkLink(o[i], o[j], stronger, o[j]))
    return RateModel("NOMA", K, tuple(first), interferers, tuple(links), False)


def sic_layers(kind: SchemeKind, K: int) -> int:
    """Messages a user must cancel before its own in the downlink."""
    if kind is SchemeKind.NOMA:
        return K - 1
    if kind in (SchemeKind.RS_FOG, SchemeKind.RS_CLOUD):
        return 1
    return 0


def formulation(kind: SchemeKind, scenario: Scenario) -> Formulation:
    H, h, K = scenario.H_up, scenario.h_down, scenario.K
    if kind is SchemeKind.RS_FOG:
        return Formulation(rs_model(H, K))
    if kind is SchemeKind.RS_CLOUD:
        return Formulation(rs_model(H, K), cloud=True)
    if kind is SchemeKind.SDMA:
        return Formulation(sdma_model(H, K))
    return Formulation(noma_model(H, h, K))


def solve_scheme(kind, scenario: Scenario, opts: AOOptions | None = None) -> Solution:
    kind = SchemeKind.parse(kind) if isinstance(kind, str) else kind
    return run_ao(scenario, formulation(kind, scenario), opts, kind.value)


def solve_sdma(scenario, opts=None) -> Solution:
    return solve_scheme(SchemeKind.SDMA, scenario, opts)


def solve_noma(scenario, opts=None) -> Solution:
    return solve_scheme(SchemeKind.NOMA, scenario, opts)


def solve_cloud(scenario, opts=None) -> Solution:
    return solve_scheme(SchemeKind.RS_CLOUD, scenario, opts)


def solve_rs_from_sdma(scenario, opts: AOOptions | None = None):
    """RS_FOG warm-started at the SDMA solution; returns ``(rs, sdma)``.

    An SDMA point is an RS point with empty second splits and no common
    stream, so the monotone AO can only improve on it.
    """
    opts = opts or AOOptions()
    sdma = solve_sdma(scenario, opts)
    warm = AOOptions(tol=opts.tol, max_iter=opts.max_iter, solver=opts.solver,
                     init=sdma.state, check_carryover=opts.check_carryover,
                     equalize=opts.equalize)
    return solve_scheme(SchemeKind.RS_FOG, scenario, warm), sdma
