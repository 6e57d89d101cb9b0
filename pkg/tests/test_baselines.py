import numpy as np
import pytest

from rsfog import surrogate
from rsfog.baselines import (SchemeKind, downlink_noma_order, noma_model, sdma_model, sic_layers,
                             solve_cloud, solve_noma, solve_rs_from_sdma, solve_scheme, solve_sdma)
from rsfog.rates import link_rates, message_rates, model_uplink_rates, stacked_precoders
from rsfog.scenario import SystemConfig, build_scenario
from rsfog.solver import ao_minimize, audit

from conftest import crandn


@pytest.fixture(scope="module")
def k3():
    return build_scenario(SystemConfig(K=3), seed=5)


@pytest.fixture(scope="module")
def k3_solutions(k3):
    return {kind: solve_scheme(kind, k3) for kind in SchemeKind}


# -- names

def test_scheme_names():
    assert [s.value for s in SchemeKind] == ["RS_FOG", "SDMA", "NOMA", "RS_CLOUD"]


@pytest.mark.parametrize("text,kind", [("sdma", SchemeKind.SDMA), (" RS_cloud ", SchemeKind.RS_CLOUD)])
def test_parse_is_lenient_about_case(text, kind):
    assert SchemeKind.parse(text) is kind


def test_parse_rejects_unknown():
    with pytest.raises(ValueError, match="RS_FOG, SDMA, NOMA, RS_CLOUD"):
        SchemeKind.parse("OMA")


@pytest.mark.parametrize("K", [1, 2, 8])
def test_sic_layers(K):
    assert sic_layers(SchemeKind.NOMA, K) == K - 1
    assert sic_layers(SchemeKind.RS_FOG, K) == 1
    assert sic_layers(SchemeKind.RS_CLOUD, K) == 1
    assert sic_layers(SchemeKind.SDMA, K) == 0


# -- rate structures

def test_sdma_treats_everyone_as_noise(rng):
    K = 3
    H = crandn(rng, K, 2, 2)
    m = sdma_model(H, K)
    assert m.streams == ((0, 0), (1, 0), (2, 0))
    assert set(m.interferers[(1, 0)]) == {(0, 0), (2, 0)}
    assert not m.has_common
    assert all(ln.message == ln.decoder == ln.signal for ln in m.links)


def test_sdma_rate_against_direct_sinr(rng):
    K = 3
    H = crandn(rng, K, 2, 2)
    W = crandn(rng, K, 2, 2, 2)
    W[:, 1] = 0
    rates = model_uplink_rates(W, H, sdma_model(H, K))
    for k in range(K):
        S = H[k].conj().T @ W[k, 0]
        Om = np.eye(2) + sum(H[i].conj().T @ W[i, 0] @ W[i, 0].conj().T @ H[i]
                             for i in range(K) if i != k)
        ref = np.log2(np.linalg.det(np.eye(2) + S.conj().T @ np.linalg.solve(Om, S)).real)
        assert rates[k, 0] == pytest.approx(ref, rel=1e-12)
        assert rates[k, 1] == 0


def test_noma_uplink_order_follows_channel_norm(rng):
    H = crandn(rng, 4, 2, 2) * np.array([0.1, 3.0, 1.0, 0.5])[:, None, None]
    m = noma_model(H, crandn(rng, 4, 4), 4)
    assert m.streams == ((1, 0), (2, 0), (3, 0), (0, 0))
    assert m.interferers[(1, 0)] == ((2, 0), (3, 0), (0, 0))
    assert m.interferers[(0, 0)] == ()


def test_noma_downlink_order():
    h = np.array([[1.0, 0], [3.0, 0], [2.0, 0], [3.0, 0]])
    assert downlink_noma_order(h) == [1, 3, 2, 0]


def test_noma_two_user_downlink_by_hand(rng):
    """Weak user's rate is the worse of its own and the strong user's decoding."""
    h = crandn(rng, 2, 3) * np.array([[2.0], [0.5]])
    p = crandn(rng, 2, 3)
    H = crandn(rng, 2, 2, 2)
    model = noma_model(H, h, 2)
    P = stacked_precoders(np.zeros(3), p)
    _, Rd_p = message_rates(P, h, model)
    g = lambda i, j: abs(h[i].conj() @ p[j]) ** 2  # noqa: E731
    # user 0 is strong: it decodes user 1's message against its own signal
    weak = min(np.log2(1 + g(0, 1) / (1 + g(0, 0))), np.log2(1 + g(1, 1) / (1 + g(1, 0))))
    strong = np.log2(1 + g(0, 0))
    assert Rd_p[1] == pytest.approx(weak, rel=1e-12)
    assert Rd_p[0] == pytest.approx(strong, rel=1e-12)
    # the scalar surrogates are tight on every decoding event
    y = surrogate.update_link_aux(P, h, model.links)
    np.testing.assert_allclose(surrogate.eval_link_surrogates(y, P, h, model.links),
                               link_rates(P, h, model.links), rtol=1e-12)


# -- solved schemes

def test_sdma_never_uses_common_or_second_split(k3_solutions):
    st = k3_solutions[SchemeKind.SDMA].state
    assert np.all(st.p_c == 0)
    assert np.all(st.W[:, 1] == 0)
    assert np.all(st.rates.Rd_c_alloc == 0)


def test_noma_never_uses_common_or_second_split(k3_solutions):
    st = k3_solutions[SchemeKind.NOMA].state
    assert np.all(st.p_c == 0)
    assert np.all(st.W[:, 1] == 0)


@pytest.mark.parametrize("kind", list(SchemeKind))
def test_every_scheme_passes_audit(k3, k3_solutions, kind):
    sol = k3_solutions[kind]
    assert sol.status == "converged"
    assert max(audit(k3, sol.state, cloud=kind is SchemeKind.RS_CLOUD).values()) <= 1e-6


def test_cloud_offloads_everything(k3, k3_solutions):
    sol = k3_solutions[SchemeKind.RS_CLOUD]
    st, r = sol.state, sol.rates
    assert np.all(st.beta == 1)
    cfg = k3.cfg
    rate = r.Rd_c_alloc + r.Rd_p
    assert r.T_d == pytest.approx(np.max(cfg.epsilon_compress * k3.L_bit / (cfg.bandwidth_hz * rate)),
                                  rel=1e-12)
    assert r.T_p == pytest.approx(np.max(k3.omega * k3.L_bit / st.f), rel=1e-12)


def test_cloud_ignores_local_cpu():
    sc = build_scenario(SystemConfig(K=2), seed=1)
    objs = [solve_cloud(sc.with_config(sc.cfg.replace(F_k_cyc_s=F))).objective
            for F in (1e6, 3e6, 5e6)]
    assert objs[0] == objs[1] == objs[2]


@pytest.mark.parametrize("seed", [0, 1])
def test_single_user_schemes_agree(seed):
    sc = build_scenario(SystemConfig(K=1), seed)
    rs = ao_minimize(sc).objective
    assert solve_sdma(sc).objective == pytest.approx(rs, abs=1e-3)
    assert solve_noma(sc).objective == pytest.approx(rs, abs=1e-3)


def test_warm_rate_splitting_improves_on_sdma(k3):
    rs, sdma = solve_rs_from_sdma(k3)
    assert rs.objective <= sdma.objective + 1e-3
    assert rs.trace[0] == pytest.approx(sdma.objective, rel=1e-12)
