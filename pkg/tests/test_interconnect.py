import time
from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from netopacity.abstraction import FiniteTransitionSystem, build_symbolic_model
from netopacity.bundled import load_golden, random_fts, ring_document
from netopacity.config import parse_config
from netopacity.interconnect import Edge, InterconnectionError, NetworkSpec, check_interconnection_constraint, compose
import oracles
from oracles import dec

F = Fraction
ETA = F(1, 5)


def ring_parts(cfg, comparison="strict"):
    return [build_symbolic_model(s, ETA, ETA, comparison) for s in cfg.subsystems]


def z_names(net, parts):
    return oracles.z_names(net, parts, load_golden("golden_local")["symbols"], load_golden("golden_network")["symbols"])


def test_network_model_matches_golden(ring2):
    gold = load_golden("golden_network")
    t0 = time.perf_counter()
    parts = ring_parts(ring2)
    net = compose(parts, ring2.network)
    assert time.perf_counter() - t0 < 1.0
    names = z_names(net, parts)
    assert sorted(names.values()) == sorted(gold["symbols"])
    assert {names[s] for s in net.secret} == set(gold["secret"])
    assert {names[s] for s in net.initial} == set(gold["initial"])
    edges = {(names[s], tuple(u), names[t]) for s in range(len(net)) for u, _, t in net.edges[s]}
    assert edges == {(a, tuple(u), b) for a, u, b in gold["edges"]}
    for s in range(len(net)):
        assert [dec(v) for v in net.outputs[s]] == gold["outputs"][names[s]]
    assert net.int_inputs == ()


def test_z1_has_unique_successor_z6(ring2):
    parts = ring_parts(ring2)
    net = compose(parts, ring2.network)
    names = z_names(net, parts)
    z1 = next(s for s, n in names.items() if n == "z1")
    assert [(u, names[t]) for u, _, t in net.edges[z1]] == [((2, 2), "z6")]


def test_constraint_passes_for_ring(ring2):
    rep = check_interconnection_constraint(ring_parts(ring2), ring2.network)
    assert rep.passed and all(c["satisfied"] for c in rep.checks)


def _single_output_system(name, value, w_values):
    return FiniteTransitionSystem(
        name, (0,), frozenset({0}), frozenset(), (1,), tuple((F(v),) for v in w_values),
        (tuple((1, (F(v),), 0) for v in w_values),), ((F(value),),), {"B": (0, 1)}, (), None)


def test_constraint_reports_first_violation():
    a = _single_output_system("A", "0.3", ["0.2"])
    b = FiniteTransitionSystem("B", (0,), frozenset({0}), frozenset(), (1,), ((F("0.2"),), (F("0.4"),)),
                               (((1, (F("0.2"),), 0), (1, (F("0.4"),), 0)),), ((F(0),),), {"B": (0, 1)}, (), "B")
    net = NetworkSpec(("A", "B"), (Edge("A", "B"),))
    rep = check_interconnection_constraint([a, b], net)
    assert not rep.passed and rep.violation["output"] == [0.3]
    with pytest.raises(InterconnectionError):
        compose([a, b], net)
    # a tolerance of 0.1 lets 0.3 read as 0.2 or 0.4
    net_phi = NetworkSpec(("A", "B"), (Edge("A", "B", 0, F("0.1")),))
    assert check_interconnection_constraint([a, b], net_phi).passed
    assert compose([a, b], net_phi, reachable_only=False).edges


def test_empty_edge_set_passes_vacuously():
    ts = random_fts(3)
    assert check_interconnection_constraint([ts], NetworkSpec((ts.name,))).passed


@pytest.mark.parametrize("seed", range(10))
def test_single_system_composition_is_isomorphic(seed):
    ts = random_fts(seed)
    net = compose([ts], NetworkSpec((ts.name,)), reachable_only=False)
    assert len(net) == len(ts)
    relabel = {s: net.index[(ts.states[s],)] for s in range(len(ts))}
    got = {(s, u[0], t) for s in range(len(net)) for u, _, t in net.edges[s]}
    want = {(relabel[s], u, relabel[t]) for s in range(len(ts)) for u, _, t in ts.edges[s]}
    assert got == want
    assert net.initial == frozenset(relabel[s] for s in ts.initial)
    assert net.secret == frozenset(relabel[s] for s in ts.secret)


def test_empty_initial_set_rejected(ring2):
    parts = ring_parts(ring2)
    parts[0] = replace(parts[0], initial=frozenset())
    with pytest.raises(InterconnectionError):
        compose(parts, ring2.network)


# --- properties -------------------------------------------------------------

_cache = {}


@st.composite
def ring_variants(draw):
    n = draw(st.sampled_from([2, 3]))
    a1, a2 = draw(st.integers(1, 9)), draw(st.integers(1, 9))
    comparison = draw(st.sampled_from(["strict", "nonstrict"]))
    sync = draw(st.booleans())
    return n, a1, a2, comparison, sync


def variant_network(n, a1, a2, comparison, sync):
    key = (n, a1, a2, comparison, sync)
    if key not in _cache:
        doc = ring_document(n)
        for sub in doc["subsystems"]:
            sub["modes"] = [{"id": 1, "dynamics": [f"0.0{a1}*x1 + 0.05*w1 + 0.1"]},
                            {"id": 2, "dynamics": [f"0.0{a2}*x1 + 0.05*w1 + 0.15"]}]
        doc["network"]["synchronize_modes"] = sync
        cfg = parse_config(doc)
        parts = ring_parts(cfg, comparison)
        _cache[key] = (cfg, parts, compose(parts, cfg.network))
    return _cache[key]


@given(ring_variants())
def test_projection_soundness_and_exact_wiring(variant):
    cfg, parts, net = variant_network(*variant)
    by_name = {p.name: k for k, p in enumerate(parts)}
    for s, lab in enumerate(net.states):
        idx = [p.index[l] for p, l in zip(parts, lab)]
        for us, _, t in net.edges[s]:
            nxt = [p.index[l] for p, l in zip(parts, net.states[t])]
            for i, p in enumerate(parts):
                src = cfg.network.incoming(p.name)[0].source
                y = parts[by_name[src]].block(idx[by_name[src]], p.name)
                # the component moved under exactly the neighbor's current output
                assert (us[i], y, nxt[i]) in set(p.edges[idx[i]])


@given(ring_variants())
def test_composition_independent_of_order(variant):
    cfg, parts, net = variant_network(*variant)
    rev = NetworkSpec(tuple(reversed(cfg.network.names)), cfg.network.edges, cfg.network.zero_slots,
                      cfg.network.synchronize_modes)
    other = compose(list(reversed(parts)), rev)
    flip = lambda lab: tuple(reversed(lab))  # noqa: E731
    edges_a = {(net.states[s], us, net.states[t]) for s in range(len(net)) for us, _, t in net.edges[s]}
    edges_b = {(flip(other.states[s]), flip(us), flip(other.states[t]))
               for s in range(len(other)) for us, _, t in other.edges[s]}
    assert edges_a == edges_b
    assert {net.states[s] for s in net.secret} == {flip(other.states[s]) for s in other.secret}
    assert {net.states[s] for s in net.initial} == {flip(other.states[s]) for s in other.initial}
