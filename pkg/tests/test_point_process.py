import numpy as np
import pytest
from scipy.stats import chi2

from geoprob import (
    MarkLaw,
    PointSet,
    RngStream,
    attach_marks,
    make_density,
    rescale,
    sample_binomial,
    sample_homogeneous_poisson,
    sample_inhomogeneous_poisson,
    unit_cube,
)
from geoprob.errors import ParameterError, ParseError
from geoprob.point_process import pointset_from_csv, pointset_to_csv
from geoprob.windows import Window


def test_homogeneous_count_moments_2d():
    # tau=5 on [0,2]^2: count is Poisson with mean 20, variance 20
    W = Window("box", bounds=np.array([[0.0, 2.0], [0.0, 2.0]]))
    counts = np.array([
        len(sample_homogeneous_poisson(5.0, W, RngStream(11, r)))
        for r in range(4000)
    ])
    se_mean = np.sqrt(20.0 / counts.size)
    assert abs(counts.mean() - 20.0) < 3 * se_mean
    # variance of the sample variance of Poisson(20): (mu4 - var^2)/R
    mu4 = 3 * 400 + 20
    se_var = np.sqrt((mu4 - 400) / counts.size)
    assert abs(counts.var(ddof=1) - 20.0) < 3 * se_var


def test_homogeneous_count_mean_1d_large_reps():
    counts = np.array([
        len(sample_homogeneous_poisson(1.0, unit_cube(1), RngStream(12, r)))
        for r in range(100_000)
    ])
    assert abs(counts.mean() - 1.0) < 3 * np.sqrt(1.0 / counts.size)


def test_homogeneous_ball_window():
    W = Window("ball", center=np.zeros(2), radius=1.0)
    counts = np.array([
        len(sample_homogeneous_poisson(2.0, W, RngStream(13, r)))
        for r in range(3000)
    ])
    mean = 2 * np.pi
    assert abs(counts.mean() - mean) < 3 * np.sqrt(mean / counts.size)
    X = sample_homogeneous_poisson(50.0, W, RngStream(13, 99))
    assert np.all(np.sum(X.points**2, axis=1) <= 1.0)


def test_poisson_count_chi_squared_gof():
    # counts fit Poisson(lambda * integral kappa) at the 0.001 level
    kappa = make_density("linear", 2)
    lam = 8.0
    counts = np.array([
        len(sample_inhomogeneous_poisson(kappa, lam, RngStream(14, r)))
        for r in range(100_000)
    ])
    from scipy.stats import poisson as poisson_law

    kmax = int(counts.max())
    obs = np.bincount(counts, minlength=kmax + 1).astype(float)
    exp = poisson_law.pmf(np.arange(kmax + 1), lam) * counts.size
    exp[-1] = counts.size - exp[:-1].sum()  # fold the upper tail
    # pool cells until every expected count is >= 5
    o_pool, e_pool = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(obs, exp):
        o_acc += o
        e_acc += e
        if e_acc >= 5:
            o_pool.append(o_acc)
            e_pool.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0:
        o_pool[-1] += o_acc
        e_pool[-1] += e_acc
    o_pool = np.array(o_pool)
    e_pool = np.array(e_pool)
    stat = np.sum((o_pool - e_pool) ** 2 / e_pool)
    assert stat < chi2.ppf(0.999, len(o_pool) - 1)


def test_thinning_matches_homogeneous_for_uniform_density():
    # identical distributions: two-sample checks on counts and the
    # first-coordinate mean, 3 sigma
    kappa = make_density("uniform", 2)
    reps = 100_000
    c_thin = np.empty(reps)
    x_thin_sum = x_thin_n = 0.0
    c_hom = np.empty(reps)
    x_hom_sum = x_hom_n = 0.0
    for r in range(reps):
        X1 = sample_inhomogeneous_poisson(kappa, 3.0, RngStream(15, r))
        X2 = sample_homogeneous_poisson(3.0, unit_cube(2), RngStream(16, r))
        c_thin[r] = len(X1)
        c_hom[r] = len(X2)
        if len(X1):
            x_thin_sum += X1.points[:, 0].sum()
            x_thin_n += len(X1)
        if len(X2):
            x_hom_sum += X2.points[:, 0].sum()
            x_hom_n += len(X2)
    se = np.sqrt(c_thin.var(ddof=1) / reps + c_hom.var(ddof=1) / reps)
    assert abs(c_thin.mean() - c_hom.mean()) < 3 * se
    se_x = np.sqrt(1.0 / 12) * np.sqrt(1 / x_thin_n + 1 / x_hom_n)
    assert abs(x_thin_sum / x_thin_n - x_hom_sum / x_hom_n) < 3 * se_x


def test_inhomogeneous_linear_density_left_half():
    # mean count 600; mean count in [0, 1/2] x [0, 1] is 250 by exact
    # integration of (1 + x)/1.5
    kappa = make_density("linear", 2)
    reps = 400
    total = np.empty(reps)
    left = np.empty(reps)
    for r in range(reps):
        X = sample_inhomogeneous_poisson(kappa, 600.0, RngStream(17, r))
        total[r] = len(X)
        left[r] = np.sum(X.points[:, 0] <= 0.5)
    assert abs(total.mean() - 600.0) < 3 * total.std(ddof=1) / np.sqrt(reps)
    assert abs(left.mean() - 250.0) < 3 * left.std(ddof=1) / np.sqrt(reps)


def test_inhomogeneous_tiny_intensity_mostly_empty():
    empt = sum(
        len(sample_inhomogeneous_poisson(make_density("uniform", 2), 1e-4,
                                         RngStream(18, r))) == 0
        for r in range(2000)
    )
    assert empt >= 1990


def test_inhomogeneous_requires_positive_sup_bound():
    kappa = make_density("uniform", 2)
    degenerate = type(kappa)(kappa.window, kappa.evaluate, 0.0, 0.0, "broken")
    with pytest.raises(ParameterError):
        sample_inhomogeneous_poisson(degenerate, 1.0, RngStream(0))


def test_binomial_basics():
    kappa = make_density("uniform", 1)
    X = sample_binomial(1, kappa, RngStream(19))
    assert len(X) == 1 and 0 <= X.points[0, 0] <= 1
    for r in range(50):
        assert len(sample_binomial(3, kappa, RngStream(19, r))) == 3
    with pytest.raises(ParameterError):
        sample_binomial(0, kappa, RngStream(19))


def test_binomial_linear_left_half_fraction():
    # P(x1 <= 1/2) = (1/2 + 1/8)/(3/2) = 5/12 for the linear density
    kappa = make_density("linear", 2)
    X = sample_binomial(10_000, kappa, RngStream(20))
    frac = np.mean(X.points[:, 0] <= 0.5)
    p = 5.0 / 12.0
    assert abs(frac - p) < 3 * np.sqrt(p * (1 - p) / 10_000)


def test_attach_marks():
    X = sample_binomial(3, make_density("uniform", 2), RngStream(21))
    Xt = attach_marks(X, MarkLaw("uniform-time"), RngStream(22))
    assert Xt.times.shape == (3,)
    assert len(np.unique(Xt.times)) == 3
    assert np.all((Xt.times >= 0) & (Xt.times <= 1))
    Xr = attach_marks(X, MarkLaw("constant-radius", radius=0.1), RngStream(22))
    assert np.all(Xr.radii == 0.1)
    Xi = attach_marks(X, MarkLaw("iid-radius", low=0.05, high=0.1), RngStream(23))
    assert np.all((Xi.radii >= 0.05) & (Xi.radii <= 0.1))
    with pytest.raises(ParameterError):
        MarkLaw("iid-radius", low=0.0, high=np.inf)


def test_rescale():
    X = PointSet(np.array([[1.0, 1.0]]))
    assert np.array_equal(rescale(X, 1.0).points, X.points)
    assert np.allclose(rescale(X, 4.0).points, [[2.0, 2.0]])
    X1 = PointSet(np.array([[0.5]]))
    assert np.allclose(rescale(X1, 9.0).points, [[4.5]])
    # marks ride along unchanged
    Xm = PointSet(np.array([[0.5, 0.5]]), times=np.array([0.3]),
                  radii=np.array([0.2]))
    Xs = rescale(Xm, 7.0)
    assert Xs.times[0] == 0.3 and Xs.radii[0] == 0.2


def test_rescale_roundtrip_tolerance():
    g = np.random.default_rng(0)
    X = PointSet(g.random((200, 3)))
    for lam in (0.37, 2.0, 91.7):
        back = rescale(rescale(X, lam), 1.0 / lam).points
        assert np.allclose(back, X.points, rtol=1e-12, atol=0)


def test_determinism_bit_exact():
    for sampler in (
        lambda r: sample_homogeneous_poisson(7.0, unit_cube(2), r),
        lambda r: sample_inhomogeneous_poisson(make_density("linear", 2), 40.0, r),
        lambda r: sample_binomial(25, make_density("gaussian-bump", 2), r),
    ):
        A = sampler(RngStream(42, 3))
        B = sampler(RngStream(42, 3))
        assert np.array_equal(A.points, B.points)
        C = sampler(RngStream(42, 4))
        assert A.points.shape != C.points.shape or not np.array_equal(
            A.points, C.points
        )


def test_pointset_rejects_duplicates_and_bad_marks():
    with pytest.raises(ParameterError):
        PointSet(np.array([[0.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(ParameterError):
        PointSet(np.array([[0.0]]), times=np.array([1.5]))
    with pytest.raises(ParameterError):
        PointSet(np.array([[0.0]]), radii=np.array([-0.1]))


def test_csv_roundtrip_bit_exact():
    g = np.random.default_rng(5)
    X = PointSet(g.random((40, 2)) * np.pi, times=g.random(40),
                 radii=g.random(40) * 0.3)
    text = pointset_to_csv(X)
    assert text.splitlines()[0] == "dim=2,marks=time+radius"
    Y = pointset_from_csv(text)
    assert np.array_equal(X.points, Y.points)
    assert np.array_equal(X.times, Y.times)
    assert np.array_equal(X.radii, Y.radii)
    # unmarked header is exactly dim=<d>
    Z = PointSet(g.random((3, 3)))
    assert pointset_to_csv(Z).splitlines()[0] == "dim=3"
    assert np.array_equal(pointset_from_csv(pointset_to_csv(Z)).points, Z.points)


def test_csv_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError, match="line 1"):
        pointset_from_csv("not-a-header\n")
    with pytest.raises(ParseError, match="line 3"):
        pointset_from_csv("dim=2\n0.1,0.2\n0.3\n")
    with pytest.raises(ParseError, match="line 2"):
        pointset_from_csv("dim=1\nabc\n")
