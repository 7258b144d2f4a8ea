import numpy as np
import pytest

from geoprob import PointSet, unit_cube
from geoprob.errors import DegenerateInputError, ParameterError
from geoprob.geometry import (
    Graph,
    SpatialIndex,
    build_spatial_index,
    delaunay_2d,
    delaunay_triangles,
    graph_from_csv,
    graph_to_csv,
    incident_edges,
    knn_brute,
    knn_graph,
    sig_brute,
    sig_graph,
    voronoi_cells_2d,
    voronoi_graph,
    _incircle,
    _orient2d,
)

def edge_key_set(G: Graph):
    return set(map(tuple, G.edges.tolist()))


# ---------------------------------------------------------------------------
# spatial index
# ---------------------------------------------------------------------------


def test_index_single_point():
    X = PointSet(np.array([[0.3, 0.7]]))
    idx = build_spatial_index(X)
    for q in ([0.0, 0.0], [0.3, 0.7], [5.0, -2.0]):
        ind, dist = idx.nearest(q, k=1)
        assert ind.tolist() == [0]


def test_index_nn_queries_match_brute_force():
    g = np.random.default_rng(1)
    pts = g.random((100, 2))
    idx = SpatialIndex(PointSet(pts))
    for _ in range(50):
        q = g.random(2) * 1.4 - 0.2
        k = int(g.integers(1, 8))
        ind, dist = idx.nearest(q, k=k)
        d2 = np.sum((pts - q) ** 2, axis=1)
        brute = np.argsort(d2, kind="stable")[:k]
        assert ind.tolist() == brute.tolist()
        assert np.allclose(dist, np.sqrt(d2[brute]))


def test_index_range_query_zero_radius_excludes_center():
    pts = np.array([[0.5, 0.5], [0.2, 0.2]])
    idx = SpatialIndex(PointSet(pts))
    assert idx.range_query([0.5, 0.5], 0.0).size == 0
    got = idx.range_query([0.5, 0.5], 0.5)
    assert got.tolist() == [1]


def test_index_range_query_matches_brute():
    g = np.random.default_rng(2)
    pts = g.random((150, 3))
    idx = SpatialIndex(PointSet(pts))
    for _ in range(30):
        q = g.random(3)
        r = float(g.random()) * 0.5
        got = set(idx.range_query(q, r).tolist())
        d2 = np.sum((pts - q) ** 2, axis=1)
        want = set(np.flatnonzero((d2 <= r * r) & (d2 > 0)).tolist())
        assert got == want


# ---------------------------------------------------------------------------
# k-nearest-neighbor graphs
# ---------------------------------------------------------------------------


def test_knn_d1_fixture():
    X = PointSet(np.array([[0.0], [1.0], [3.0]]))
    Gu = knn_graph(X, 1, directed=False)
    assert edge_key_set(Gu) == {(0, 1), (1, 2)}
    Gd = knn_graph(X, 1, directed=True)
    assert set(map(tuple, Gd.edges.tolist())) == {(0, 1), (1, 0), (2, 1)}
    # out-degree k for every vertex
    assert np.all(np.bincount(Gd.edges[:, 0], minlength=3) == 1)


def test_knn_oracle_equivalence_random():
    for t in range(25):
        for d in (1, 2, 3):
            g = np.random.default_rng(900 + 3 * t + d)
            n = int(g.integers(5, 200))
            X = PointSet(g.random((n, d)))
            k = int(g.integers(1, min(5, n - 1) + 1))
            for directed in (True, False):
                G1 = knn_graph(X, k, directed)
                G2 = knn_brute(X, k, directed)
                assert np.array_equal(G1.edges, G2.edges), (t, d, k, directed)
                assert np.allclose(G1.lengths, G2.lengths)


def test_knn_parameter_errors():
    X = PointSet(np.array([[0.0], [1.0]]))
    with pytest.raises(ParameterError):
        knn_graph(X, 2, directed=False)
    with pytest.raises(ParameterError):
        knn_graph(PointSet(np.array([[0.0]])), 1, directed=False)


def test_knn_lengths_match_endpoint_distances():
    g = np.random.default_rng(3)
    X = PointSet(g.random((80, 2)))
    G = knn_graph(X, 3, directed=False)
    d = np.sqrt(np.sum((X.points[G.edges[:, 0]] - X.points[G.edges[:, 1]]) ** 2,
                       axis=1))
    assert np.allclose(G.lengths, d, rtol=1e-12)


def test_degree_identity_undirected():
    g = np.random.default_rng(4)
    X = PointSet(g.random((60, 2)))
    for G in (knn_graph(X, 2, False), sig_graph(X), delaunay_2d(X)):
        assert G.degree_sum() == 2 * len(G.edges)


# ---------------------------------------------------------------------------
# Delaunay and Voronoi
# ---------------------------------------------------------------------------


def test_delaunay_triangle():
    X = PointSet(np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]]))
    G = delaunay_2d(X)
    assert edge_key_set(G) == {(0, 1), (0, 2), (1, 2)}


def test_delaunay_cocircular_square_tie_break():
    # the diagonal through the smallest vertex index is chosen
    X = PointSet(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))
    G = delaunay_2d(X)
    edges = edge_key_set(G)
    assert len(edges) == 5
    assert (0, 2) in edges and (1, 3) not in edges


def test_delaunay_empty_circumcircle_random():
    for seed in (5, 6, 7):
        g = np.random.default_rng(seed)
        pts = g.random((30, 2))
        tris = delaunay_triangles(PointSet(pts))
        for t in tris:
            a, b, c = pts[t[0]], pts[t[1]], pts[t[2]]
            if _orient2d(a, b, c) < 0:
                a, b = b, a
            for m in range(30):
                if m in t:
                    continue
                assert _incircle(a, b, c, pts[m]) <= 0


def test_delaunay_collinear_rejected():
    X = PointSet(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]))
    with pytest.raises(DegenerateInputError):
        delaunay_2d(X)


def test_voronoi_single_and_two_points():
    W = unit_cube(2)
    [cell] = voronoi_cells_2d(PointSet(np.array([[0.3, 0.4]])), W)
    assert np.isclose(cell.area(), 1.0)
    assert cell.unbounded_flag
    cells = voronoi_cells_2d(
        PointSet(np.array([[0.25, 0.5], [0.75, 0.5]])), W
    )
    assert np.isclose(cells[0].area(), 0.5) and np.isclose(cells[1].area(), 0.5)
    assert all(c.unbounded_flag for c in cells)


def test_voronoi_tiling_and_site_membership():
    W = unit_cube(2)
    g = np.random.default_rng(8)
    pts = g.random((30, 2))
    cells = voronoi_cells_2d(PointSet(pts), W)
    total = sum(c.area() for c in cells)
    assert abs(total - 1.0) < 1e-6
    for c in cells:
        poly = c.polygon
        site = pts[c.site_index]
        for i in range(len(poly)):
            e = poly[(i + 1) % len(poly)] - poly[i]
            cross = e[0] * (site[1] - poly[i][1]) - e[1] * (site[0] - poly[i][0])
            assert cross >= -1e-9


def test_voronoi_cells_convex():
    g = np.random.default_rng(9)
    cells = voronoi_cells_2d(PointSet(g.random((25, 2))), unit_cube(2))
    for c in cells:
        poly = c.polygon
        m = len(poly)
        for i in range(m):
            a, b, cc = poly[i], poly[(i + 1) % m], poly[(i + 2) % m]
            cr = (b[0] - a[0]) * (cc[1] - a[1]) - (b[1] - a[1]) * (cc[0] - a[0])
            assert cr >= -1e-9


def test_incident_edges():
    # no out-edges -> empty list
    G0 = Graph(3, np.empty((0, 2), dtype=int), np.empty(0), directed=True)
    assert incident_edges(G0, 1).size == 0
    X = PointSet(np.array([[0.0], [1.0], [3.0]]))
    G = knn_graph(X, 1, directed=False)
    assert sorted(incident_edges(G, 1).tolist()) == [1.0, 2.0]
    with pytest.raises(ParameterError):
        incident_edges(G, 5)


def test_voronoi_graph_3x3_grid_center():
    pts = np.array([[float(i), float(j)] for j in range(3) for i in range(3)])
    VG = voronoi_graph(PointSet(pts))
    lens = incident_edges(VG, 4)
    finite = lens[np.isfinite(lens)]
    assert len(finite) == 4
    assert np.allclose(finite, 1.0)


def test_voronoi_graph_unbounded_edges_inf():
    g = np.random.default_rng(10)
    X = PointSet(g.random((12, 2)))
    VG = voronoi_graph(X)
    assert np.any(np.isinf(VG.lengths))  # hull edges dual to rays


# ---------------------------------------------------------------------------
# sphere of influence
# ---------------------------------------------------------------------------


def test_sig_two_points_always_joined():
    X = PointSet(np.array([[0.1, 0.1], [0.8, 0.4]]))
    assert edge_key_set(sig_graph(X)) == {(0, 1)}


def test_sig_d1_fixture_strict_overlap():
    # radii 1, 1, 9: touching balls (0 and 10) are NOT joined
    X = PointSet(np.array([[0.0], [1.0], [10.0]]))
    assert edge_key_set(sig_graph(X)) == {(0, 1), (1, 2)}


def test_sig_oracle_equivalence_random():
    for t in range(20):
        for d in (1, 2, 3):
            g = np.random.default_rng(1200 + 3 * t + d)
            n = int(g.integers(5, 200))
            X = PointSet(g.random((n, d)))
            G1, G2 = sig_graph(X), sig_brute(X)
            assert np.array_equal(G1.edges, G2.edges), (t, d)


# ---------------------------------------------------------------------------
# invariances and serialization
# ---------------------------------------------------------------------------


def test_graph_structure_translation_scale_invariance():
    g = np.random.default_rng(11)
    pts = g.random((40, 2))
    X = PointSet(pts)
    builds = [
        lambda Y: knn_graph(Y, 2, False),
        lambda Y: delaunay_2d(Y),
        lambda Y: sig_graph(Y),
    ]
    for build in builds:
        E0 = build(X)
        for a in (0.5, 2.0):
            shift = g.random(2) * 3
            Y = PointSet(pts * a + shift)
            E1 = build(Y)
            assert edge_key_set(E0) == edge_key_set(E1)
            assert np.allclose(E1.lengths, a * E0.lengths, rtol=1e-9)


def test_graph_csv_roundtrip():
    g = np.random.default_rng(12)
    X = PointSet(g.random((20, 2)))
    G = knn_graph(X, 2, directed=True)
    H = graph_from_csv(graph_to_csv(G))
    assert H.directed == G.directed and H.n == G.n
    assert np.array_equal(H.edges, G.edges)
    assert np.array_equal(H.lengths, G.lengths)
