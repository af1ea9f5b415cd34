import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mksys import apply_map, contraction_estimate, eval_prob, parse_system, validate_system, vertex_of
from mksys.errors import DomainError, NumericError
from mksys.system import radical_inverse, sample_box


def test_vertex_of(sys_a, sys_b):
    assert vertex_of(sys_b, 0.0) == "V1"
    assert vertex_of(sys_b, 1.0) == "V2"
    assert vertex_of(sys_a, 0.3) == "V1"
    with pytest.raises(DomainError):
        vertex_of(sys_a, 2.5)
    with pytest.raises(DomainError):
        vertex_of(sys_b, 0.5000005)  # in the gap between the boxes


def test_point_dimension_checked(sys_fig1, sys_a):
    with pytest.raises(DomainError):
        vertex_of(sys_fig1, 0.5)
    assert vertex_of(sys_fig1, (2.5, 0.5)) == "K2"
    with pytest.raises(DomainError):
        vertex_of(sys_a, (0.1, 0.2))


def test_eval_prob(sys_b, sys_c):
    assert eval_prob(sys_c, "e1", 0.6) == pytest.approx(0.65, abs=1e-15)
    assert eval_prob(sys_b, "e11", 0.0) == 0.9
    with pytest.raises(DomainError):
        eval_prob(sys_c, "e1", 2.0)
    with pytest.raises(DomainError):
        eval_prob(sys_b, "e21", 0.0)  # e21 starts in V2


def test_eval_prob_out_of_range():
    s = parse_system('space dim=1\nvertex V { box = [0, 1] }\n'
                     'edge a { from=V to=V map="x/2" prob="2*x" }\n')
    with pytest.raises(NumericError):
        eval_prob(s, "a", 0.9)


def test_apply_map(sys_a, sys_b):
    assert apply_map(sys_a, "e1", 0.6) == (0.3,)
    assert apply_map(sys_a, "e2", 0.0) == (0.5,)
    assert apply_map(sys_b, "e12", 0.0) == (1.0,)


def test_validate_examples(sys_a, sys_c, sys_broken):
    rep = validate_system(sys_a, 1000)
    assert rep.ok and rep.min_prob == 0.5
    rep = validate_system(sys_c, 1000)
    assert rep.ok and rep.min_prob == pytest.approx(0.25, abs=1e-15)
    rep = validate_system(sys_broken, 1000)
    assert not rep.ok
    [v] = rep.violations
    assert (v.check, v.ident) == ("prob-sum", "V1")
    assert v.value == pytest.approx(0.9, abs=1e-15)


def test_fixtures_valid(all_systems):
    for name, s in all_systems.items():
        rep = validate_system(s)
        assert rep.ok, (name, rep.violations)
        assert rep.max_prob_sum_error <= 1e-9
        assert rep.ok == (not rep.violations)


def checks(src):
    return {(v.check, v.ident) for v in validate_system(parse_system(src), 200).violations}


def test_detects_overlap_containment_floor_and_sinks():
    base = "space dim=1\n"
    assert checks(base + "vertex V1 { box = [0, 1] }\nvertex V2 { box = [1, 2] }\n"
                  'edge a { from=V1 to=V1 map="x/2" prob="1" }\n'
                  'edge b { from=V2 to=V2 map="1+x/4" prob="1" }\n') == {("box-overlap", "V1/V2")}
    found = checks(base + "vertex V { box = [0, 1] }\n"
                   'edge a { from=V to=V map="x+0.5" prob="x" }\n'
                   'edge b { from=V to=V map="x/2" prob="1-x" }\n')
    assert ("map-containment", "a") in found
    assert ("prob-floor", "a") in found and ("prob-floor", "b") in found
    found = checks(base + "vertex V { box = [0, 1] }\nvertex W { box = [2, 3] }\n"
                   'edge a { from=V to=W map="x+2" prob="1" }\n')
    assert ("no-outgoing", "W") in found
    found = checks(base + "vertex V { box = [0, 1] }\n"
                   'edge a { from=V to=V map="x/2" prob="log(x)+1" }\n')
    assert ("prob-eval", "a") in found


def test_validation_sample_grid():
    assert [radical_inverse(i, 2) for i in range(1, 5)] == [0.5, 0.25, 0.75, 0.125]
    assert radical_inverse(1, 3) == pytest.approx(1 / 3)
    from mksys.system import VertexSet
    pts = sample_box(VertexSet("K", ((0.0, 1.0), (2.0, 4.0))), 10)
    assert pts.shape == (14, 2)
    assert pts[:4].tolist() == [[0, 2], [1, 2], [0, 4], [1, 4]]


def test_contraction_examples(sys_a, sys_b, sys_c):
    assert contraction_estimate(sys_a, 10_000, seed=1).a_hat == pytest.approx(0.5, abs=1e-12)
    est = contraction_estimate(sys_c, 10_000, seed=1)
    assert est.a_hat == pytest.approx(0.5, abs=1e-12)
    assert est.contractive and est.pairs_tested == 10_000
    assert contraction_estimate(sys_b, 1000, seed=1).a_hat == 0.0


def test_contraction_worst_pair_matches_a_hat(sys_fig1):
    est = contraction_estimate(sys_fig1, 2000, seed=3)
    x, y, vid = est.worst_pair
    ratio = sum(eval_prob(sys_fig1, e.id, x) * math.dist(apply_map(sys_fig1, e.id, x),
                                                          apply_map(sys_fig1, e.id, y))
                for e in sys_fig1.edges if e.source == vid) / math.dist(x, y)
    assert ratio == pytest.approx(est.a_hat, rel=1e-12)
    assert est.a_hat < 1


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_contraction_monotone_in_pairs(sys_fig1, seed):
    values = [contraction_estimate(sys_fig1, p, seed).a_hat for p in (1, 10, 100, 1000)]
    assert values == sorted(values)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["A", "B", "C", "fig1"]), st.data())
def test_normalisation_and_containment_on_resampled_points(all_systems, name, data):
    s = all_systems[name]
    v = data.draw(st.sampled_from(s.vertices))
    x = tuple(data.draw(st.floats(lo, hi)) for lo, hi in v.box)
    out = [e for e in s.edges if e.source == v.id]
    ps = [eval_prob(s, e.id, x) for e in out]
    assert abs(sum(ps) - 1) <= 1e-9
    assert min(ps) >= s.delta_floor
    for e in out:
        assert vertex_of(s, apply_map(s, e.id, x)) == e.target


def test_locate_vec_matches_locate(sys_fig1):
    rng = np.random.default_rng(0)
    X = rng.uniform([-0.5, -0.5], [5.5, 1.5], size=(500, 2))
    V = sys_fig1.locate_vec(X)
    for x, v in zip(X, V):
        try:
            assert sys_fig1.locate(tuple(x)) == v
        except DomainError:
            assert v == -1
