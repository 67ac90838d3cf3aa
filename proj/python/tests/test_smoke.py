import json
import random

import pytest

import cycletrack as ct


def n1():
    vertices = [(0, 0.0, 0.0), (1, 1.0, 0.0), (2, 1.0, 1.0), (3, 0.0, 1.0)]
    edges = [(0, 1, 3.0), (1, 2, 3.0), (2, 3, 3.0), (3, 0, 3.0), (0, 2, 1.0)]
    return ct.ForceNetwork(vertices, edges)


def test_network_roundtrip():
    net = n1()
    assert len(net) == 4
    assert net.omega == 3.0
    assert ct.ForceNetwork.from_json(net.to_json()) == net
    assert net.level("median") == 3.0
    assert net.level("fine") == 0.0
    assert net.rattlers() == []


def test_invalid_network_raises_data_error():
    with pytest.raises(ct.DataError, match="edge crossing"):
        ct.ForceNetwork([(0, 0, 0), (1, 1, 0), (2, 1, 1), (3, 0, 1)], [(0, 2, 1.0), (1, 3, 1.0)])
    with pytest.raises(ValueError):
        ct.ForceNetwork([(0, 0, 0), (1, 1, 0)], [(0, 1, -1.0)])


def test_hierarchy_segments():
    tri = ct.Triangulation(n1())
    assert len(tri) == 2
    h = ct.CycleHierarchy(tri)
    assert h.leaf_count == 2
    fine = h.segments(0.5)
    assert len(fine) == 2
    assert sum(s["area"] for s in fine) == pytest.approx(1.0, abs=1e-15)
    assert len(h.segments(3.0)) == 1
    assert json.loads(h.to_json())["step"] == 0


def test_overlap_area_against_shapely():
    geometry = pytest.importorskip("shapely.geometry")
    rng = random.Random(5)
    for _ in range(300):
        a = [(rng.uniform(0, 1), rng.uniform(0, 1)) for _ in range(3)]
        b = [(rng.uniform(0, 1), rng.uniform(0, 1)) for _ in range(3)]
        pa, pb = geometry.Polygon(a), geometry.Polygon(b)
        if pa.area < 1e-6 or pb.area < 1e-6:
            continue
        a = list(pa.exterior.coords)[:3] if pa.exterior.is_ccw else list(pa.exterior.coords)[2::-1]
        b = list(pb.exterior.coords)[:3] if pb.exterior.is_ccw else list(pb.exterior.coords)[2::-1]
        expected = pa.intersection(pb).area
        assert ct.triangle_overlap_area(a, b) == pytest.approx(expected, abs=1e-12)


def test_overlap_matrix_rows_cover_each_triangle():
    steps = ct.generate_synthetic("grid=6x6,steps=2,profile=constant", seed=3)
    ta, tb = ct.Triangulation(steps[0]), ct.Triangulation(steps[1])
    entries = ct.overlap_matrix(ta, tb)
    covered = [0.0] * len(ta)
    for i, _, area in entries:
        covered[i] += area
    for i in range(len(ta)):
        assert covered[i] == pytest.approx(ta.area(i), rel=1e-9)


def test_track_n1_pair():
    g = ct.track([n1(), n1()], "fine,median", 0.0)
    assert g.node_count == 6
    assert len(g.hierarchy_links) == 4
    leaf = [l for l in g.temporal_links if l["level"] == 0]
    coarse = [l for l in g.temporal_links if l["level"] == 1]
    assert len(leaf) == 2
    assert len(coarse) == 1
    assert all(abs(l["omega"] - 1.0) <= 1e-12 for l in leaf)
    again = ct.TrackingGraph.from_json(g.to_json())
    assert again.to_json() == g.to_json()
    svg = g.layout("sankey", 0, "spatial", "svg")
    assert svg.count("<rect") == 4
    assert json.loads(g.layout("nested", 0, "parent", "json"))["kind"] == "nested"


def test_cli_in_process(tmp_path):
    code, _, err = ct.run_cli(["build", "--output", str(tmp_path / "g.json")])
    assert code == 2
    assert "--input" in err
    code, _, _ = ct.run_cli(
        ["build", "--synthetic", "grid=6x6,steps=3", "--seed", "1", "--output", str(tmp_path / "g.json")]
    )
    assert code == 0
    graph = json.loads((tmp_path / "g.json").read_text())
    assert graph["params"]["levels"]
    assert (tmp_path / "g_hierarchy" / "0.json").exists()
