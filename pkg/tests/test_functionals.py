import math

import numpy as np
import pytest

from geoprob import MarkLaw, PointSet, RngStream, attach_marks, unit_cube
from geoprob import sample_homogeneous_poisson
from geoprob.errors import DegenerateInputError, ParameterError
from geoprob.functionals import (
    CountingFunctional,
    DelaunayEdgeFunctional,
    EdgeWeight,
    InsertsEvaluator,
    KnnEdgeFunctional,
    RsaFunctional,
    SigEdgeFunctional,
    VoronoiEdgeFunctional,
    add_one_cost,
    birth_growth,
    germ_grain_volume,
    integrate,
    make_functional,
    phi_len_half,
    point_measure,
    rsa_pack,
    total_mass,
    weighted_mass,
    xi_graph,
    xi_rescaled,
)

D1_FIXTURE = PointSet(np.array([[0.0], [1.0], [3.0]]))


# ---------------------------------------------------------------------------
# graph functionals
# ---------------------------------------------------------------------------


def test_xi_graph_d1_fixture():
    xi_t = KnnEdgeFunctional(1, False, EdgeWeight("power", p=1, scale=1))
    assert xi_graph(xi_t, 1, D1_FIXTURE) == 3.0
    xi_half = KnnEdgeFunctional(1, False, phi_len_half())
    assert xi_graph(xi_half, 1, D1_FIXTURE) == 1.5
    # summing the halved weights over all points gives total edge length
    assert total_mass(xi_half, D1_FIXTURE) == 3.0
    xi_ind = KnnEdgeFunctional(1, False, EdgeWeight("indicator", threshold=1.5))
    assert xi_graph(xi_ind, 1, D1_FIXTURE) == 1.0


def test_xi_rescaled():
    cnt = CountingFunctional()
    for lam in (0.5, 1.0, 7.0):
        assert xi_rescaled(cnt, lam, 0, D1_FIXTURE) == 1.0
    xi = KnnEdgeFunctional(1, False, EdgeWeight("power", p=1, scale=1))
    base = xi.value_at(D1_FIXTURE, 1)
    assert xi_rescaled(xi, 1.0, 1, D1_FIXTURE) == base
    # homogeneous of order gamma: rescaling multiplies by lam**(gamma/d)
    g = np.random.default_rng(0)
    X = PointSet(g.random((30, 2)))
    v = xi.values(X)
    for lam in (0.25, 4.0):
        vr = np.array([xi_rescaled(xi, lam, i, X) for i in range(5)])
        assert np.allclose(vr, lam ** (1 / 2) * v[:5], rtol=1e-12)


def test_voronoi_functional_rejects_constant_phi():
    with pytest.raises(ParameterError):
        VoronoiEdgeFunctional(EdgeWeight("constant", value=1.0))
    VoronoiEdgeFunctional(phi_len_half())  # power weight vanishes at infinity


def test_translation_invariance_all_graph_functionals():
    g = np.random.default_rng(1)
    fns = [
        KnnEdgeFunctional(2, False, phi_len_half()),
        KnnEdgeFunctional(1, True, EdgeWeight("power", p=2, scale=1)),
        SigEdgeFunctional(phi_len_half()),
        DelaunayEdgeFunctional(phi_len_half()),
        VoronoiEdgeFunctional(EdgeWeight("indicator", threshold=0.4)),
    ]
    for trial in range(20):
        pts = g.random((25, 2))
        shift = g.random(2) * 10 - 5
        for xi in fns:
            v0 = xi.values(PointSet(pts))
            v1 = xi.values(PointSet(pts + shift))
            assert np.allclose(v0, v1, rtol=1e-9, atol=1e-12), xi.name


def test_homogeneity_power_weights():
    g = np.random.default_rng(2)
    pts = g.random((40, 2))
    for p in (1.0, 2.0):
        xi = KnnEdgeFunctional(1, False, EdgeWeight("power", p=p, scale=1))
        v0 = xi.values(PointSet(pts))
        for a in (0.5, 2.0):
            v1 = xi.values(PointSet(pts * a))
            assert np.allclose(v1, a**p * v0, rtol=1e-9)


def test_homogeneity_order_zero_kinds():
    g = np.random.default_rng(3)
    pts = g.random((30, 2))
    times = g.random(30)
    X = PointSet(pts, times=times)
    vol = math.pi * 0.05**2
    f0 = rsa_pack(X, vol).flags
    for a in (0.5, 2.0):
        # jointly scaled radii: ball volume scales by a^d
        fa = rsa_pack(PointSet(pts * a, times=times), vol * a**2).flags
        assert np.array_equal(f0, fa)
    cnt = CountingFunctional()
    assert np.array_equal(cnt.values(X), cnt.values(PointSet(pts * 2, times=times)))


# ---------------------------------------------------------------------------
# packing
# ---------------------------------------------------------------------------


def test_rsa_single_and_fixture():
    X1 = PointSet(np.array([[0.4]]), times=np.array([0.5]))
    assert rsa_pack(X1, 0.5).flags.tolist() == [True]
    X = PointSet(np.array([[0.2], [0.9]]), times=np.array([0.1, 0.9]))
    assert rsa_pack(X, 0.5).flags.tolist() == [True, True]
    Xc = PointSet(np.array([[0.2], [0.55]]), times=np.array([0.1, 0.9]))
    assert rsa_pack(Xc, 0.5).flags.tolist() == [True, False]


def test_rsa_duplicate_times_rejected():
    X = PointSet(np.array([[0.1], [0.9]]), times=np.array([0.5, 0.5]))
    with pytest.raises(DegenerateInputError):
        rsa_pack(X, 0.1)


def test_rsa_packing_legality():
    g = np.random.default_rng(4)
    vol = math.pi * 0.06**2
    r = 0.06
    for trial in range(20):
        pts = g.random((60, 2))
        X = PointSet(pts, times=g.random(60))
        av = rsa_pack(X, vol)
        acc = np.flatnonzero(av.flags)
        rej = np.flatnonzero(~av.flags)
        for i_, j_ in zip(*np.triu_indices(len(acc), k=1)):
            d = np.linalg.norm(pts[acc[i_]] - pts[acc[j_]])
            assert d >= 2 * r - 1e-12
        for j in rej:
            earlier = acc[X.times[acc] < X.times[j]]
            dd = np.sqrt(np.sum((pts[earlier] - pts[j]) ** 2, axis=1))
            assert np.any(dd < 2 * r)


def test_rsa_order_by_time_invariance():
    g = np.random.default_rng(5)
    pts = g.random((40, 2))
    times = g.random(40)
    X = PointSet(pts, times=times)
    av = rsa_pack(X, math.pi * 0.05**2)
    perm = g.permutation(40)
    Xp = PointSet(pts[perm], times=times[perm])
    avp = rsa_pack(Xp, math.pi * 0.05**2)
    assert np.array_equal(av.flags[perm], avp.flags)


def test_rsa_mean_accepted_two_interval_analytic():
    # d=1, n=2, intervals of length 1/2: E[#accepted] = 1 + (1 - 1/2)^2
    reps = 20_000
    acc = np.empty(reps)
    for r in range(reps):
        gen = RngStream(50, r).generator()
        pts = gen.random((2, 1))
        X = PointSet(pts, times=np.array([0.25, 0.75]))
        acc[r] = rsa_pack(X, 0.5).accepted_count()
    se = acc.std(ddof=1) / np.sqrt(reps)
    assert abs(acc.mean() - 1.25) < 3 * se


def test_birth_growth_fixture_and_reduction():
    X1 = PointSet(np.array([[0.3, 0.3]]), times=np.array([0.1]),
                  radii=np.array([0.2]))
    assert birth_growth(X1, 1.0).flags.tolist() == [True]
    Xf = PointSet(np.array([[0.0], [0.3]]), times=np.array([0.0, 0.5]),
                  radii=np.array([0.0, 0.1]))
    assert birth_growth(Xf, 1.0).flags.tolist() == [True, False]
    # v = 0 with constant radii reduces to RSA packing, per seed
    r = 0.05
    vol = math.pi * r * r
    for trial in range(50):
        gen = RngStream(51, trial).generator()
        pts = gen.random((30, 2))
        times = gen.random(30)
        a_rsa = rsa_pack(PointSet(pts, times=times), vol).flags
        a_bg = birth_growth(
            PointSet(pts, times=times, radii=np.full(30, r)), 0.0
        ).flags
        assert np.array_equal(a_rsa, a_bg)


# ---------------------------------------------------------------------------
# germ-grain volume
# ---------------------------------------------------------------------------


def test_germ_grain_single_ball():
    X = PointSet(np.array([[0.5, 0.5]]), radii=np.array([0.2]))
    v = germ_grain_volume(X, 0, unit_cube(2))
    assert abs(v - math.pi * 0.04) < 1e-3 * math.pi * 0.04 * 3
    X0 = PointSet(np.array([[0.5, 0.5]]), radii=np.array([0.0]))
    assert germ_grain_volume(X0, 0, unit_cube(2)) == 0.0


def test_germ_grain_tiling_vs_hit_or_miss():
    # sum of per-cell volumes equals the union area over the window
    gen = RngStream(52).generator()
    n = 20
    pts = gen.random((n, 2))
    radii = gen.uniform(0.05, 0.15, n)
    X = PointSet(pts, radii=radii)
    W = unit_cube(2)
    total = sum(germ_grain_volume(X, i, W) for i in range(n))
    # independent plain Monte-Carlo hit-or-miss oracle over the window
    m = 400_000
    q = gen.random((m, 2))
    inside = np.zeros(m, dtype=bool)
    for c, r in zip(pts, radii):
        inside |= np.sum((q - c) ** 2, axis=1) <= r * r
    oracle = inside.mean()
    assert abs(total - oracle) < 0.01 * oracle


# ---------------------------------------------------------------------------
# masses, measures, add-one cost
# ---------------------------------------------------------------------------


def test_total_mass():
    cnt = CountingFunctional()
    g = np.random.default_rng(6)
    X = PointSet(g.random((17, 2)))
    assert total_mass(cnt, X, 5.0) == 17.0
    assert total_mass(cnt, PointSet.empty(2)) == 0.0
    xi = KnnEdgeFunctional(1, False, phi_len_half())
    assert total_mass(xi, D1_FIXTURE, 1.0) == 3.0


def test_weighted_mass_and_point_measure():
    cnt = CountingFunctional()
    X = PointSet(np.array([[0.2], [0.6]]))
    f1 = lambda p: p[:, 0]
    assert weighted_mass(cnt, f1, X, 1.0) == 0.8
    assert weighted_mass(cnt, lambda p: np.zeros(p.shape[0]), X, 1.0) == 0.0
    one = lambda p: np.ones(p.shape[0])
    assert weighted_mass(cnt, one, X, 3.0) == total_mass(cnt, X, 3.0)
    # exact consistency with the measure pairing
    xi = KnnEdgeFunctional(1, False, phi_len_half())
    g = np.random.default_rng(7)
    Y = PointSet(g.random((25, 2)))
    mu = point_measure(xi, Y, 25.0)
    assert weighted_mass(xi, f1, Y, 25.0) == integrate(f1, mu)
    # atoms sit at the unscaled positions
    assert np.array_equal(mu.positions, Y.points)


def test_point_measure_marked_atoms_are_spatial():
    gen = RngStream(53).generator()
    pts = gen.random((10, 2))
    X = PointSet(pts, times=gen.random(10))
    mu = point_measure(RsaFunctional(0.01), X, 10.0)
    assert mu.positions.shape == (10, 2)
    assert np.array_equal(mu.positions, pts)


def test_add_one_cost():
    cnt = CountingFunctional()
    g = np.random.default_rng(8)
    X = PointSet(g.random((12, 2)))
    assert add_one_cost(cnt, [0.5, 0.5], X) == 1.0
    xi = KnnEdgeFunctional(1, False, phi_len_half())
    X01 = PointSet(np.array([[0.0], [1.0]]))
    # oracle: direct evaluation of both configurations
    want = total_mass(xi, PointSet(np.array([[0.0], [1.0], [3.0]]))) - total_mass(
        xi, X01
    )
    assert add_one_cost(xi, [3.0], X01) == want == 2.0
    with pytest.raises(ParameterError):
        add_one_cost(cnt, X.points[3], X)


def test_add_one_cost_rsa_latest_time():
    gen = RngStream(54).generator()
    pts = gen.random((20, 2))
    times = gen.random(20) * 0.9
    X = PointSet(pts, times=times)
    vol = math.pi * 0.08**2
    xi = RsaFunctional(vol)
    accepted = np.flatnonzero(rsa_pack(X, vol).flags)
    # overlapping an accepted ball -> rejected -> cost 0
    target = pts[accepted[0]] + np.array([1e-3, 0.0])
    assert add_one_cost(xi, target, X, time=1.0) == 0.0
    # a far free spot -> accepted -> cost 1 (placed outside all balls)
    spot = np.array([5.0, 5.0])
    assert add_one_cost(xi, spot, X, time=1.0) == 1.0


# ---------------------------------------------------------------------------
# stabilization spot check: the six-triangle construction
# ---------------------------------------------------------------------------


def _six_triangle_radius(pts: np.ndarray, k: int) -> float:
    """Smallest t such that each of six equilateral sectors anchored at the
    origin holds >= k+1 points within covering triangle scale t."""
    ang = np.arctan2(pts[:, 1], pts[:, 0]) % (2 * np.pi)
    sector = np.minimum((ang / (np.pi / 3)).astype(int), 5)
    u1 = np.stack([np.cos(sector * np.pi / 3), np.sin(sector * np.pi / 3)], axis=1)
    u2 = np.stack(
        [np.cos((sector + 1) * np.pi / 3), np.sin((sector + 1) * np.pi / 3)], axis=1
    )
    # coordinates in the oblique sector frame: p = a u1 + b u2, scale = a + b
    det = u1[:, 0] * u2[:, 1] - u1[:, 1] * u2[:, 0]
    a = (pts[:, 0] * u2[:, 1] - pts[:, 1] * u2[:, 0]) / det
    b = (pts[:, 1] * u1[:, 0] - pts[:, 0] * u1[:, 1]) / det
    scale = a + b
    worst = 0.0
    for s in range(6):
        vals = np.sort(scale[sector == s])
        if vals.size < k + 1:
            return np.inf
        worst = max(worst, vals[k])
    return worst


def test_knn_six_triangle_stabilization():
    from geoprob import centered_box

    k = 1
    checked = 0
    for rep in range(50):
        stream = RngStream(55, rep)
        X = sample_homogeneous_poisson(1.0, centered_box(6.0, 2), stream)
        if len(X) < k + 1:
            continue
        t = _six_triangle_radius(X.points, k)
        if not np.isfinite(t) or t > 6.0:
            continue  # construction exceeds the sampled region
        xi = KnnEdgeFunctional(k, False, phi_len_half())
        ev = xi.inserts_evaluator(X)
        v0 = ev(np.zeros((1, 2)))[0]
        gen = stream.substream(9).generator()
        for b in range(6):
            u = gen.normal(size=2)
            u /= np.linalg.norm(u)
            far = u * 4.0 * t * (1 + 1e-6)
            cluster = far[None, :] + gen.normal(size=(3, 2)) * 1e-3
            Y = PointSet(
                np.vstack([X.points, cluster]), dim=2, _checked=True
            )
            v1 = xi.inserts_evaluator(Y)(np.zeros((1, 2)))[0]
            assert np.isclose(v1, v0, rtol=1e-12), (rep, b)
        checked += 1
    assert checked >= 20


# ---------------------------------------------------------------------------
# insert-evaluation fast paths against the generic route
# ---------------------------------------------------------------------------


def test_knn_insert_fast_path_matches_generic():
    for trial in range(25):
        g = np.random.default_rng(1500 + trial)
        n = int(g.integers(4, 60))
        d = int(g.integers(1, 4))
        k = int(g.integers(1, 4))
        X = PointSet(g.random((n, d)) * 2)
        ins = g.random((2, d)) * 2
        for directed in (False, True):
            xi = KnnEdgeFunctional(k, directed, EdgeWeight("power", p=1.3,
                                                           scale=0.7))
            ref = InsertsEvaluator(xi, X)
            ev = xi.inserts_evaluator(X)
            assert np.allclose(ev(ins), ref(ins), rtol=1e-11)
            anchor = g.random(d) * 2
            nodes = g.random((5, d)) * 2
            assert np.allclose(
                ev.pairs_with(anchor, nodes), ref.pairs_with(anchor, nodes),
                rtol=1e-11,
            )
            assert np.allclose(
                ev.singles(nodes), ref.singles(nodes), rtol=1e-11
            )


def test_acceptance_vector_csv():
    X = PointSet(np.array([[0.2], [0.9]]), times=np.array([0.25, 0.75]))
    av = rsa_pack(X, 0.5)
    lines = av.to_csv().splitlines()
    assert lines[0] == "index,time,accepted"
    assert lines[1].startswith("0,") and lines[1].endswith(",1")


def test_make_functional_registry():
    assert make_functional("counting").name == "counting"
    xi = make_functional("knn-len", k=2)
    assert xi.k == 2 and xi.phi.kind == "power"
    assert make_functional("rsa", ball_volume=0.5).ball_volume == 0.5
    with pytest.raises(ParameterError):
        make_functional("no-such")
    with pytest.raises(ParameterError):
        make_functional("germ-grain")  # window required
