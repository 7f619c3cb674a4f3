import copy
import time
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from netopacity.abstraction import (
    AbstractionError,
    DwellTimeViolation,
    TSState,
    build_symbolic_model,
    simulate_concrete,
    successor_modes,
    to_dot,
)
from netopacity.bundled import load_golden, ring_document
from netopacity.config import parse_config
from netopacity.geometry import grid_values
from oracles import dec, local_symbol_map, labeled_edges, local_state_key

F = Fraction
ETA = F(1, 5)


def build(spec, comparison="strict", eta=ETA, phi=ETA):
    return build_symbolic_model(spec, eta, phi, comparison)


def find(ts, x, mode, counter=0):
    return ts.index[TSState((int(F(x) / ts.step[0]),), mode, counter)]


@pytest.mark.parametrize("idx", [0, 1])
def test_local_model_matches_golden(ring2, idx):
    gold = load_golden("golden_local")
    names = local_symbol_map({k: tuple(v) for k, v in gold["symbols"].items()})
    spec = ring2.subsystems[idx]
    t0 = time.perf_counter()
    ts = build(spec)
    assert time.perf_counter() - t0 < 1.0
    reach = ts.reachable()
    assert {names[local_state_key(ts, s)] for s in reach} == set(gold["symbols"])
    assert labeled_edges(ts, names) == {(a, u, w, b) for a, u, w, b in gold["edges"]}
    sysgold = gold["systems"][spec.name]
    assert {names[local_state_key(ts, s)] for s in ts.initial} == set(sysgold["initial"])
    assert {names[local_state_key(ts, s)] for s in ts.secret} == set(sysgold["secret"])
    for s in range(len(ts)):
        assert [dec(v) for v in ts.outputs[s]] == sysgold["outputs"][names[local_state_key(ts, s)]]


def test_successor_modes_examples():
    full = {(1, 2), (2, 1), (1, 1), (2, 2)}
    assert successor_modes(2, 0, 1, full) == {(2, 0), (1, 0)}
    assert successor_modes(1, 0, 3, full) == {(1, 1)}
    assert successor_modes(1, 1, 2, {(1, 1), (2, 2), (2, 1)}) == {(1, 1)}
    with pytest.raises(ValueError):
        successor_modes(1, 3, 2, full)


def test_strict_versus_nonstrict_at_exact_distance(ring_subsystem):
    strict = build(ring_subsystem, "strict")
    loose = build(ring_subsystem, "nonstrict")
    q1 = find(strict, "0.4", 2)
    w_lo, w_hi = (F("0.2"),), (F("0.4"),)
    succ = lambda ts, w: {local_state_key(ts, t) for u, ww, t in ts.edges[q1] if ww == w}  # noqa: E731
    assert succ(strict, w_hi) == {("0.2", 1, 0), ("0.4", 1, 0)}
    assert succ(strict, w_lo) == {("0.2", 1, 0)}
    assert succ(loose, w_lo) == {("0.2", 1, 0), ("0.4", 1, 0)}


def _doc_with(**changes):
    doc = ring_document(2)
    sub = doc["subsystems"][0]
    sub.update(changes)
    return doc


def test_constant_dynamics_hits_its_grid_point():
    doc = _doc_with(modes=[{"id": 1, "dynamics": ["0.4"]}, {"id": 2, "dynamics": ["0.4 + 0*w1"]}])
    spec = parse_config(doc).subsystems[0]
    ts = build(spec, "nonstrict")
    for s in range(len(ts)):
        assert any(local_state_key(ts, t)[0] == "0.4" for _, _, t in ts.edges[s])


def test_blocking_model_is_reported():
    doc = _doc_with(modes=[{"id": 1, "dynamics": ["x1 + 2"]}, {"id": 2, "dynamics": ["x1"]}])
    spec = parse_config(doc).subsystems[0]
    with pytest.raises(AbstractionError, match="no outgoing transition"):
        build(spec)


def test_eta_above_span_bound_rejected(ring_subsystem):
    with pytest.raises(AbstractionError):
        build(ring_subsystem, eta=F("0.3"))


def test_simulate_concrete_examples(ring_subsystem):
    tr = simulate_concrete(ring_subsystem, [F("0.2")], [2, 1], [[F("0.4")], [F("0.4")]])
    assert [x[0] for x in tr.states] == [F("0.2"), F("0.19"), F("0.1295")]
    doc = _doc_with(modes=[{"id": 1, "dynamics": ["0.3"]}, {"id": 2, "dynamics": ["0.3"]}])
    const = parse_config(doc).subsystems[0]
    tr = simulate_concrete(const, [F("0.1")], [2, 1, 2], [[0], [0], [0]])
    assert [x[0] for x in tr.states] == [F("0.1"), F("0.3"), F("0.3"), F("0.3")]


def test_simulate_rejects_short_dwell():
    doc = _doc_with(dwell_time=2, initial_modes=[1, 2], mode_graph=[[1, 1], [2, 2], [1, 2], [2, 1]])
    spec = parse_config(doc).subsystems[0]
    with pytest.raises(DwellTimeViolation):
        simulate_concrete(spec, [F("0.2")], [1, 2, 1], [[F("0.2")]] * 3)


def test_dot_export(ring_subsystem):
    ts = build(ring_subsystem)
    text = to_dot(ts)
    assert text.count("peripheries=2") == len(ts.secret)
    assert 'label="S1=(0.2, 1, 0) / [0; 0.2]"' in text
    assert '[label="(2, 0.4)"]' in text
    assert text == to_dot(build(ring_subsystem))


# --- properties -------------------------------------------------------------

@st.composite
def subsystem_variants(draw):
    doc = ring_document(2)
    sub = copy.deepcopy(doc["subsystems"][0])
    k_d = draw(st.integers(1, 3))
    # every mode needs at least one way out, otherwise the model blocks by construction
    graph = []
    for p in (1, 2):
        outs = draw(st.sampled_from([[1], [2], [1, 2]]))
        graph += [[p, q] for q in outs]
    a1, a2 = draw(st.integers(1, 9)), draw(st.integers(1, 9))
    sub.update(dwell_time=k_d, mode_graph=graph, initial_modes=[1, 2],
               modes=[{"id": 1, "dynamics": [f"0.0{a1}*x1 + 0.05*w1 + 0.1"]},
                      {"id": 2, "dynamics": [f"0.0{a2}*x1 + 0.05*w1 + 0.15"]}])
    doc["subsystems"][0] = sub
    return parse_config(doc).subsystems[0], draw(st.sampled_from(["strict", "nonstrict"]))


_variant_cache = {}


def cached_build(spec, comparison):
    key = (spec.modes, spec.dwell_time, spec.mode_graph, comparison)
    if key not in _variant_cache:
        _variant_cache[key] = build(spec, comparison)
    return _variant_cache[key]


@given(subsystem_variants())
def test_counter_discipline_and_state_count(variant):
    spec, comparison = variant
    ts = cached_build(spec, comparison)
    assert len(ts) == 2 * len(spec.mode_ids) * spec.dwell_time
    k_d = spec.dwell_time
    for s in range(len(ts)):
        a = ts.states[s]
        for u, _, t in ts.edges[s]:
            b = ts.states[t]
            assert u == a.mode
            if a.counter < k_d - 1:
                assert (b.mode, b.counter) == (a.mode, a.counter + 1)
            elif b.mode == a.mode:
                assert b.counter == k_d - 1 and (a.mode, a.mode) in spec.mode_graph
            else:
                assert b.counter == 0 and (a.mode, b.mode) in spec.mode_graph
    assert all(ts.states[s].counter == 0 for s in ts.initial)


@given(st.integers(1, 2), st.sampled_from([1, 2]), st.integers(1, 2), st.sampled_from(["strict", "nonstrict"]))
def test_soundness_against_concrete_step(ring2, xk, p, wk, comparison):
    spec = ring2.subsystems[0]
    ts = cached_build(spec, comparison)
    x, w = xk * ETA, (wk * ETA,)
    f = spec.step((x,), p, w)[0]
    succ = {grid_values(ts.states[t].cell, ts.step)[0] for s in range(len(ts)) if ts.states[s].cell == (xk,)
            and ts.states[s].mode == p for u, ww, t in ts.edges[s] if ww == w}
    if spec.state_set.contains((f,)):
        assert any(abs(f - g) <= ETA for g in succ)
        if comparison == "nonstrict":
            nearest = min((g for g in (ETA, 2 * ETA)), key=lambda g: abs(f - g))
            assert nearest in succ


FINE = F(1, 20)


@given(st.integers(1, 11), st.sampled_from([1, 2]), st.integers(1, 11), st.sampled_from(["strict", "nonstrict"]))
def test_soundness_on_fine_grid(ring2, xk, p, wk, comparison):
    spec = ring2.subsystems[0]
    key = ("fine", comparison)
    if key not in _variant_cache:
        _variant_cache[key] = build(spec, comparison, eta=FINE, phi=FINE)
    ts = _variant_cache[key]
    x, w = xk * FINE, (wk * FINE,)
    f = spec.step((x,), p, w)[0]
    succ = {grid_values(ts.states[t].cell, ts.step)[0] for s in range(len(ts)) if ts.states[s].cell == (xk,)
            and ts.states[s].mode == p for u, ww, t in ts.edges[s] if ww == w}
    assert spec.state_set.contains((f,))
    assert any(abs(f - g) <= FINE for g in succ)
    if comparison == "nonstrict":
        grid = [k * FINE for k in range(1, 12)]
        assert min(grid, key=lambda g: abs(f - g)) in succ


def test_build_is_deterministic(ring_subsystem):
    a, b = build(ring_subsystem), build(ring_subsystem)
    assert a == b
