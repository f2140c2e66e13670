import math

import numpy as np
import pytest

from oracles import match_points, point_core_dist, union_vertices_sampled
from racetrack.geometry import ConvexCore, DegenerateInputError, OffsetShape, contains, offset
from racetrack.models import gen_adversarial, gen_disjoint_polygons, gen_disjoint_segments
from racetrack.union import (
    UnionVertex,
    classify_rr_terminal,
    pair_crossing_counts,
    union_stats,
    union_vertices,
)

EPS = 1e-9


def seg(a, b):
    return ConvexCore.segment(a, b)


def random_family(seed, n_max=6, polygons=False):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, n_max + 1))
    if polygons:
        inst = gen_disjoint_polygons(n, int(rng.integers(3, 6)), (0, 0, 3, 3), rng)
    else:
        inst = gen_disjoint_segments(n, (0, 0, 3, 3), rng, min_len=0.2, max_len=1.5)
    radii = rng.uniform(0.05, 1.0, n)
    return inst, radii


def test_single_racetrack():
    st_ = union_stats([offset(seg((0, 0), (2, 0)), 1.0)])
    assert st_.as_dict() == {"psi": 4, "cc": 0, "rr": 0, "rr_terminal": 0, "rr_nonterminal": 0,
                             "cr": 0, "shape_vertices_on_boundary": 4}


def test_two_separate_racetracks():
    shapes = [offset(seg((0, 0), (1, 0)), 0.5), offset(seg((5, 5), (6, 5)), 0.5)]
    st_ = union_stats(shapes)
    assert st_.psi == 8 and st_.cc == st_.rr == st_.cr == 0


def test_empty_family():
    assert union_stats([]).psi == 0
    assert union_vertices([]) == []


@pytest.mark.parametrize("seed", range(25))
def test_matches_sampling_oracle_segments(seed):
    inst, radii = random_family(seed)
    shapes = [OffsetShape(c, r) for c, r in zip(inst.cores, radii)]
    got = np.array([v.point for v in union_vertices(shapes)])
    ref = union_vertices_sampled([c.as_array() for c in inst.cores], radii)
    assert match_points(got, ref, 10 * EPS)


@pytest.mark.parametrize("seed", range(8))
def test_matches_sampling_oracle_polygons(seed):
    inst, radii = random_family(seed, n_max=4, polygons=True)
    radii = radii * 2  # reach across grid cells
    shapes = [OffsetShape(c, r) for c, r in zip(inst.cores, radii)]
    got = np.array([v.point for v in union_vertices(shapes)])
    ref = union_vertices_sampled([c.as_array() for c in inst.cores], radii, samples=60_000)
    assert match_points(got, ref, 10 * EPS)


def test_matches_sampling_oracle_adversarial():
    inst, radii = gen_adversarial(8)
    shapes = [OffsetShape(c, r) for c, r in zip(inst.cores, radii)]
    got = np.array([v.point for v in union_vertices(shapes)])
    ref = union_vertices_sampled([c.as_array() for c in inst.cores], radii, samples=400_000)
    assert match_points(got, ref, 10 * EPS)


@pytest.mark.parametrize("seed", range(10))
def test_vertices_are_on_union_boundary(seed):
    inst, radii = random_family(100 + seed, n_max=10)
    shapes = [OffsetShape(c, r) for c, r in zip(inst.cores, radii)]
    vs = union_vertices(shapes)
    st_ = union_stats(shapes)
    assert st_.psi == len(vs)
    assert st_.psi == st_.cc + st_.rr + st_.cr + st_.shape_vertices_on_boundary
    assert st_.rr == st_.rr_terminal + st_.rr_nonterminal
    for v in vs:
        owners = [o for o in v.owners if o is not None]
        for k, s in enumerate(shapes):
            if k in owners:
                assert contains(s, v.point, "closed")
                assert not contains(s, v.point, "open")
            else:
                assert not contains(s, v.point, "open")
    keys = [(v.point.x, v.point.y) for v in vs]
    assert keys == sorted(keys)


@pytest.mark.parametrize("seed", range(6))
def test_removal_never_uncovers(seed):
    inst, radii = random_family(200 + seed, n_max=8)
    shapes = [OffsetShape(c, r) for c, r in zip(inst.cores, radii)]
    full = np.array([v.point for v in union_vertices(shapes)]).reshape(-1, 2)
    for k, s in enumerate(shapes):
        rest = shapes[:k] + shapes[k + 1:]
        for v in union_vertices(rest):
            if contains(s, v.point, "open"):
                if len(full):
                    assert np.hypot(*(full - np.array(v.point)).T).min() > 10 * EPS


def test_terminal_edge_ends_inside_other():
    # the vertical racetrack's straight edges end inside the horizontal one
    h = offset(seg((-10, 0), (10, 0)), 0.5)
    v = offset(seg((0, 0.1), (0, 10)), 1.0)
    rr = [x for x in union_vertices([h, v]) if x.cls == "RR"]
    assert len(rr) == 2
    assert all(x.terminal for x in rr)
    assert all(classify_rr_terminal(x, [h, v]) for x in rr)


def test_nonterminal_long_crossing():
    a = offset(seg((-10, 0.01), (10, -0.01)), 0.3)
    b = offset(seg((0.02, -10), (-0.01, 10)), 0.3)
    rr = [x for x in union_vertices([a, b]) if x.cls == "RR"]
    assert len(rr) == 4
    assert not any(classify_rr_terminal(x, [a, b]) for x in rr)
    assert union_stats([a, b]).rr_nonterminal == 4


def test_classify_rejects_non_rr():
    a = offset(ConvexCore.point((0, 0)), 1)
    b = offset(ConvexCore.point((1, 0)), 1)
    cc = [x for x in union_vertices([a, b]) if x.cls == "CC"]
    assert len(cc) == 2
    with pytest.raises(ValueError):
        classify_rr_terminal(cc[0], [a, b])
    with pytest.raises(ValueError):
        classify_rr_terminal(UnionVertex((0.0, 0.0), (0, None), "shape-vertex"), [a])


def test_terminal_flag_matches_endpoint_rule():
    rng = np.random.default_rng(4)
    for _ in range(20):
        inst = gen_disjoint_segments(12, (0, 0, 4, 4), rng, min_len=0.5, max_len=3)
        shapes = [OffsetShape(c, r) for c, r in zip(inst.cores, rng.uniform(0.05, 1.0, 12))]
        for v in union_vertices(shapes):
            if v.cls != "RR":
                continue
            i, j = v.owners
            ends = []
            for own, (_, edge) in ((i, v.curves[0]), (j, v.curves[1])):
                c = next(c for c in shapes[own].boundary() if c.kind == "edge" and c.index == edge)
                ends.append((own, c.start, c.end))
            expect = False
            for own, p, q in ends:
                other = j if own == i else i
                d = point_core_dist(np.array([p, q]), shapes[other].core.as_array())
                expect |= bool((d <= shapes[other].radius + EPS).any())
            assert v.terminal == expect


def test_equal_radii_linear_and_pseudo_disk():
    rng = np.random.default_rng(9)
    n = 50
    inst = gen_disjoint_segments(n, (0, 0, np.sqrt(n), np.sqrt(n)), rng, min_len=0.1, max_len=1.0)
    shapes = [OffsetShape(c, 0.3) for c in inst.cores]
    assert union_stats(shapes).psi <= 6 * n
    assert max(pair_crossing_counts(shapes).values(), default=0) <= 2


def test_terminal_bound_random():
    rng = np.random.default_rng(21)
    for n in (20, 60):
        inst = gen_disjoint_segments(n, (0, 0, np.sqrt(n), np.sqrt(n)), rng, min_len=0.1, max_len=1.0)
        shapes = [OffsetShape(c, r) for c, r in zip(inst.cores, rng.uniform(0.01, 2.0, n))]
        assert union_stats(shapes).rr_terminal <= 4 * n


def test_adversarial_rr_dominates():
    counts = []
    for n in (8, 16):
        inst, radii = gen_adversarial(n)
        st_ = union_stats([OffsetShape(c, r) for c, r in zip(inst.cores, radii)])
        assert st_.rr >= st_.cc and st_.rr_terminal == 0
        counts.append(st_.rr)
    assert counts[1] / counts[0] > 3  # superlinear in n


def test_three_boundaries_through_one_point_rejected():
    p = (0.3, 0.2)
    disks = [offset(ConvexCore.point((p[0] + math.cos(a), p[1] + math.sin(a))), 1.0) for a in (0.1, 2.2, 4.0)]
    with pytest.raises(DegenerateInputError):
        union_stats(disks)
    # moving one disk off the common point makes the input generic again
    disks[2] = offset(ConvexCore.point((p[0] + math.cos(4.0), p[1] + math.sin(4.0) + 1e-3)), 1.0)
    assert union_stats(disks).psi > 0
