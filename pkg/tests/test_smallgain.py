import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from netopacity import gains
from netopacity.gains import IDENTITY, Linear
from netopacity.interconnect import NetworkSpec
from netopacity.smallgain import (
    GainMatrix,
    LocalConstants,
    SynthesisError,
    build_gain_matrix,
    check_dwell_time,
    check_small_gain,
    derive_theorem2_constants,
    eta_bound,
    evaluate_local_sf,
    evaluate_network_sf,
    recheck,
    synthesize_parameters,
)
from netopacity.sysmodel import DeltaISSCertificate
from oracles import cycle_products, aggregate_slopes

F = Fraction
PINNED = {"kappa": F("0.1"), "rho": Linear(F("0.06")), "gamma_hat": Linear(F("1.05")),
          "alpha_bar": IDENTITY, "alpha": IDENTITY}


def cert(kappa, rho=F(1, 20), gamma=1, mu=1, eps=2):
    modes = list(kappa)
    return DeltaISSCertificate(
        kappa={p: F(k) for p, k in kappa.items()},
        rho={p: Linear(F(rho)) for p in modes},
        alpha_under={p: IDENTITY for p in modes},
        alpha_over={p: IDENTITY for p in modes},
        gamma={p: Linear(F(gamma)) if gamma != 1 else IDENTITY for p in modes},
        mu=F(mu), epsilon_exponent=F(eps))


def test_derived_constants_for_ring(ring_subsystem):
    c = derive_theorem2_constants(ring_subsystem.certificate, ring_subsystem.dwell_time)
    assert 0.052 <= float(c.rho.linear_slope()) <= 0.053
    assert 1.049 <= float(c.gamma_hat.linear_slope()) <= 1.051
    assert c.kappa == pytest.approx(0.1038, abs=1e-4)
    assert c.alpha_bar == IDENTITY or c.alpha_bar.linear_slope() == 1


@given(st.lists(st.fractions(F(1, 100), F(99, 100)), min_size=1, max_size=3),
       st.fractions(F(1, 100), 1), st.fractions(F(1, 10), 3), st.fractions(F(11, 10), 80), st.integers(1, 6))
def test_derived_constants_match_hand_formulas(ks, rho, gamma, eps, k_d):
    c = cert(dict(enumerate(ks, 1)), rho, gamma, eps=eps)
    kbar, rbar, ghat = aggregate_slopes([float(k) for k in ks], float(rho), float(gamma), float(eps), k_d)
    got = derive_theorem2_constants(c, k_d)
    assert got.kappa == pytest.approx(kbar, rel=1e-12)
    assert float(got.rho.linear_slope()) == pytest.approx(rbar, rel=1e-9)
    assert float(got.gamma_hat.linear_slope()) == pytest.approx(ghat, rel=1e-9)


@given(st.lists(st.fractions(F(1, 100), F(99, 100)), min_size=1, max_size=3), st.integers(1, 8))
def test_derived_gains_grow_with_dwell_time(ks, k_d):
    c = cert(dict(enumerate(ks, 1)))
    a, b = derive_theorem2_constants(c, k_d), derive_theorem2_constants(c, k_d + 1)
    assert a.rho.linear_slope() <= b.rho.linear_slope()
    assert a.gamma_hat.linear_slope() <= b.gamma_hat.linear_slope()


def test_dwell_time_examples():
    c = cert({1: F(1, 2)}, mu=2)
    rep = check_dwell_time(c, 3)
    assert rep.passed and rep.required[1] == pytest.approx(3)
    assert not check_dwell_time(c, 2).passed
    assert check_dwell_time(cert({1: F(1, 2)}, mu=1), 1).passed


def test_eta_bound_examples():
    consts = LocalConstants(F("0.1"), Linear(F("0.06")), Linear(F("1.05")), IDENTITY)
    assert eta_bound(F(1, 4), F(1, 4), consts) == F(1, 5)
    assert eta_bound(F(1, 4), F(1, 4), consts, span_bound=F(1, 10)) == F(1, 10)
    with pytest.raises(SynthesisError):
        eta_bound(F(1, 4), 4, consts)


def test_local_sf_example():
    c = cert({1: F(1, 10), 2: F(1, 10)})
    assert evaluate_local_sf(c, ([0.2], 1, 1), ([0.3], 1, 1)) == pytest.approx(0.1 * math.sqrt(10))
    with pytest.raises(ValueError):
        evaluate_local_sf(c, ([0.2], 1, 1), ([0.3], 2, 1))


def test_network_sf_examples():
    assert evaluate_network_sf([0.1, 0.3], [0.25, 0.5]) == pytest.approx(0.3)
    assert evaluate_network_sf([0.1, 0.1], [0.5, 0.5]) == pytest.approx(0.1)


def test_gain_matrix_examples():
    consts = {n: LocalConstants(**PINNED) for n in ("S1", "S2")}
    from netopacity.interconnect import Edge
    net = NetworkSpec(("S1", "S2"), (Edge("S2", "S1"), Edge("S1", "S2")))
    g = build_gain_matrix(consts, net)
    assert g[("S1", "S2")].linear_slope() == F(1, 15)
    two = LocalConstants(F(1, 2), Linear(F(1, 2)), IDENTITY, IDENTITY, Linear(2))
    g = build_gain_matrix({"S1": two, "S2": two}, net)
    assert g[("S1", "S2")].linear_slope() == F(1, 2)


@st.composite
def gain_graphs(draw):
    n = draw(st.integers(2, 8))
    names = [f"S{i}" for i in range(1, n + 1)]
    pairs = [(a, b) for a in names for b in names if a != b]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=min(len(pairs), 12)))
    slopes = {e: draw(st.fractions(F(1, 10), F(3, 2))) for e in chosen}
    return names, slopes


@given(gain_graphs())
def test_small_gain_matches_cycle_enumeration(graph):
    names, slopes = graph
    report = check_small_gain(GainMatrix(tuple(names), {e: Linear(s) for e, s in slopes.items()}))
    products = cycle_products(slopes)
    assert report.passed == all(p < 1 for p in products.values())
    assert len(report.cycles) == len(products)


def test_unit_cycle_fails():
    g = GainMatrix(("a", "b"), {("a", "b"): Linear(2), ("b", "a"): Linear(F(1, 2))})
    rep = check_small_gain(g)
    assert not rep.passed and rep.cycles[0]["slope"] == 1


# --- synthesis ----------------------------------------------------------------

def test_ring_synthesis_exact(ring2):
    from netopacity.pipeline import run_synthesis
    r = run_synthesis(ring2)
    assert r.etas == {"S1": F(1, 5), "S2": F(1, 5)}
    assert r.varthetas == {"S1": F(1, 4), "S2": F(1, 4)}
    assert r.epsilon_hat == F(1, 4)
    assert all(q["satisfied"] for q in r.inequalities)
    assert {f["constant"] for f in r.flags if "constant" in f} == {"kappa", "rho"}


def test_single_subsystem(ring_subsystem):
    r = synthesize_parameters([ring_subsystem], NetworkSpec(("S1",)),
                              epsilons={"S1": F(1, 4)}, pinned={"S1": PINNED})
    assert r.varthetas == {"S1": 0} and r.phis == {}
    assert r.etas["S1"] == F(1, 5) and r.epsilon_hat == F(1, 4)


def test_exactly_one_driver(ring2):
    with pytest.raises(SynthesisError):
        synthesize_parameters(ring2.subsystems, ring2.network)


def test_slack_fraction_out_of_range(ring2):
    v = ring2.verification
    with pytest.raises(SynthesisError):
        synthesize_parameters(ring2.subsystems, ring2.network, epsilons=v.epsilons,
                              pinned=v.pinned, fixed_phi=v.fixed_phi, slack_fraction=F(3, 2))


def test_delta_drives_uniform_precisions(ring2):
    v = ring2.verification
    r = synthesize_parameters(ring2.subsystems, ring2.network, delta=F(2, 5),
                              pinned=v.pinned, fixed_phi=v.fixed_phi)
    assert r.epsilons == {"S1": F(1, 5), "S2": F(1, 5)}
    assert r.epsilon_hat <= F(1, 5)


@given(st.fractions(F(1, 20), 2), st.sampled_from([F(1, 4), F(1, 2), F(3, 4)]))
def test_synthesis_rechecks_and_scales(eps, frac):
    from netopacity.bundled import generate_ring_config
    cfg = generate_ring_config(3, F(1, 2))
    v = cfg.verification
    r = synthesize_parameters(cfg.subsystems, cfg.network, epsilons={n: eps for n in cfg.network.names},
                              pinned=v.pinned, slack_fraction=frac)
    assert all(q["satisfied"] for q in recheck(r, cfg.subsystems, cfg.network))
    assert all(e > 0 for e in r.etas.values())
    bigger = synthesize_parameters(cfg.subsystems, cfg.network,
                                   epsilons={n: 2 * eps for n in cfg.network.names},
                                   pinned=v.pinned, slack_fraction=frac)
    assert all(bigger.etas[n] >= r.etas[n] for n in cfg.network.names)
