import numpy as np
import pytest

from metriscope.core import ClassProbMatrix, FeatureMatrix, RngStream
from metriscope.metrics import (
    GaussianMoments,
    MetricConfig,
    MetricEntry,
    MetricError,
    MetricReport,
    MissingInputError,
    asw,
    authpct,
    ct_score,
    dreamsim_score,
    evaluate_all,
    extrapolate_intercept,
    fd_inf,
    fid,
    fid_from_features,
    fls,
    inception_score,
    kid,
    manifold_index,
    matrix_sqrt_psd,
    mmd_rbf,
    moments,
    perceptual_intra_distance,
    perceptual_nn_distance,
    prdc,
    realism,
    sample_projections,
    sfid,
    vendi,
    wasserstein_1d,
)
from oracles import assignment_w1, prdc_double_loop


def fm(values, tag="t", prefix="s"):
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    return FeatureMatrix(values, tuple(f"{prefix}{i}" for i in range(values.shape[0])), tag)


def random_fm(n, d, seed, loc=0.0, prefix="s"):
    gen = np.random.default_rng(seed)
    return fm(gen.normal(loc, 1.0, (n, d)), prefix=prefix)


class TestMatrixSqrt:
    def test_identity(self):
        assert np.allclose(matrix_sqrt_psd(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        assert np.allclose(matrix_sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_reconstruction_random_psd(self):
        gen = np.random.default_rng(0)
        for _ in range(20):
            d = int(gen.integers(2, 8))
            a = gen.normal(size=(d, d))
            psd = a @ a.T
            s = matrix_sqrt_psd(psd)
            err = np.linalg.norm(s @ s - psd) / np.linalg.norm(psd)
            assert err < 1e-8

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            matrix_sqrt_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestFid:
    def test_identical_moments_zero(self):
        m = moments(random_fm(50, 6, 1))
        assert fid(m, m) == pytest.approx(0.0, abs=1e-6)

    def test_univariate_closed_form_exact(self):
        real = GaussianMoments(mu=[0.0], sigma=[[1.0]], n=10)
        gen = GaussianMoments(mu=[1.0], sigma=[[4.0]], n=10)
        assert fid(real, gen) == pytest.approx(2.0, abs=1e-9)

    def test_univariate_closed_form_random(self):
        gen = np.random.default_rng(2)
        for _ in range(50):
            m1, m2 = gen.normal(size=2)
            s1, s2 = gen.uniform(0.5, 3.0, size=2)
            a = GaussianMoments(mu=[m1], sigma=[[s1 ** 2]], n=10)
            b = GaussianMoments(mu=[m2], sigma=[[s2 ** 2]], n=10)
            want = (m1 - m2) ** 2 + (s1 - s2) ** 2
            assert fid(a, b) == pytest.approx(want, abs=1e-9)

    def test_symmetry(self):
        a = moments(random_fm(60, 5, 3))
        b = moments(random_fm(60, 5, 4, loc=0.5))
        assert fid(a, b) == pytest.approx(fid(b, a), abs=1e-9)

    def test_dimension_mismatch(self):
        a = moments(random_fm(10, 3, 5))
        b = moments(random_fm(10, 4, 6))
        with pytest.raises(ValueError, match="mismatch"):
            fid(a, b)

    def test_singular_covariance_regularized(self):
        x = fm(np.tile([1.0, 2.0, 3.0], (10, 1)))
        value = fid_from_features(x, x)
        assert value == pytest.approx(0.0, abs=1e-6)


class TestSfid:
    def test_identical_zero(self):
        x = random_fm(30, 12, 7)
        assert sfid(x, x) == pytest.approx(0.0, abs=1e-6)

    def test_location_shift_louder_in_spatial_features(self):
        # same bright quadrant moved to the opposite corner: the pixel-value
        # histogram is unchanged, so global features barely react while the
        # grid features swap cells
        from metriscope.core import ImageSet, ImageVolume
        from metriscope.featstore import extract_global64, extract_spatial48

        def make(n, seed, offset):
            g = np.random.default_rng(seed)
            imgs = []
            for i in range(n):
                px = g.uniform(0.2, 0.5, (32, 32))
                px[offset:offset + 16, offset:offset + 16] += 0.3
                imgs.append(ImageVolume(pixels=np.clip(px, 0, 1), id=f"i{i}"))
            return ImageSet(images=tuple(imgs), name=f"o{offset}")

        real = make(80, 1, 0)
        gen = make(80, 2, 16)
        fid_value = fid_from_features(extract_global64(real), extract_global64(gen))
        sfid_value = sfid(extract_spatial48(real), extract_spatial48(gen))
        assert sfid_value > fid_value

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            sfid(random_fm(10, 4, 8), random_fm(10, 5, 9))


class TestKid:
    def test_hand_oracle_duplicated_points(self):
        real = fm([[0.0], [0.0]])
        gen = fm([[1.0], [1.0]])
        mean, std = kid(real, gen, subset_size=2, num_subsets=1, rng=RngStream(0))
        # k(0,0)=1, k(1,1)=8, k(0,1)=1 -> 1 + 8 - 2 = 7
        assert mean == 7.0
        assert std == 0.0

    def test_subset_too_large(self):
        with pytest.raises(ValueError, match="exceeds"):
            kid(random_fm(10, 2, 10), random_fm(10, 2, 11),
                subset_size=20, rng=RngStream(0))

    def test_identical_distribution_near_zero(self):
        real = random_fm(300, 4, 12)
        gen = random_fm(300, 4, 13)
        mean, std = kid(real, gen, subset_size=50, num_subsets=200, rng=RngStream(1))
        stderr = std / np.sqrt(200)
        assert abs(mean) <= 3 * stderr + 1e-12

    def test_permutation_invariant(self):
        real = random_fm(40, 3, 14)
        gen = random_fm(40, 3, 15)
        perm = np.random.default_rng(16).permutation(40)
        real_p = FeatureMatrix(real.values[perm],
                               tuple(real.ids[i] for i in perm), "t")
        assert kid(real, gen, subset_size=20, num_subsets=10, rng=RngStream(2)) == \
            kid(real_p, gen, subset_size=20, num_subsets=10, rng=RngStream(2))


class TestMmdRbf:
    def test_identical_sets_nonpositive(self):
        x = random_fm(40, 3, 17)
        value = mmd_rbf(x, x)
        assert value <= 0.0
        assert value >= -2.0 / 40

    def test_far_clouds_limit(self):
        # the pooled median IS the separation scale here, so the cross kernel
        # tends to e^{-1/2}: limit 2*(1 - e^{-1/2}), comfortably bounded by 2
        a = random_fm(30, 3, 18)
        b = fm(random_fm(30, 3, 19).values + 1000.0)
        value = mmd_rbf(a, b)
        assert value == pytest.approx(2.0 * (1.0 - np.exp(-0.5)), abs=0.02)
        assert 0.0 < value <= 2.0

    def test_all_identical_zero(self):
        x = fm(np.ones((5, 2)))
        assert mmd_rbf(x, x) == 0.0


class TestInceptionScore:
    def test_uniform_rows(self):
        probs = ClassProbMatrix(np.full((20, 4), 0.25),
                                tuple(f"s{i}" for i in range(20)))
        mean, std = inception_score(probs, splits=5)
        assert mean == pytest.approx(1.0, abs=1e-12)
        assert std == pytest.approx(0.0, abs=1e-12)

    def test_balanced_one_hot_single_split(self):
        k = 5
        p = np.tile(np.eye(k), (4, 1))
        probs = ClassProbMatrix(p, tuple(f"s{i}" for i in range(20)))
        mean, _ = inception_score(probs, splits=1)
        assert mean == pytest.approx(k, rel=1e-12)

    def test_collapsed_one_hot(self):
        p = np.zeros((12, 3))
        p[:, 1] = 1.0
        probs = ClassProbMatrix(p, tuple(f"s{i}" for i in range(12)))
        mean, _ = inception_score(probs, splits=3)
        assert mean == pytest.approx(1.0, abs=1e-12)

    def test_range_invariant(self):
        gen = np.random.default_rng(20)
        for _ in range(10):
            p = gen.dirichlet(np.ones(6), size=30)
            probs = ClassProbMatrix(p, tuple(f"s{i}" for i in range(30)))
            mean, _ = inception_score(probs, splits=3)
            assert 1.0 - 1e-9 <= mean <= 6.0 + 1e-9

    def test_too_many_splits(self):
        probs = ClassProbMatrix(np.full((3, 2), 0.5), ("a", "b", "c"))
        with pytest.raises(ValueError, match="splits"):
            inception_score(probs, splits=4)


class TestPerceptual:
    def test_gen_subset_of_real(self):
        real = random_fm(20, 3, 21)
        gen = FeatureMatrix(real.values[:5], tuple(f"g{i}" for i in range(5)), "t")
        assert perceptual_nn_distance(real, gen) == 0.0

    def test_collapsed_gen_intra_zero(self):
        gen = fm(np.ones((6, 2)))
        assert perceptual_intra_distance(gen) == 0.0

    def test_hand_distances(self):
        real = fm([[1.0]])
        gen = fm([[0.0], [2.0]])
        assert perceptual_nn_distance(real, gen) == 1.0
        assert perceptual_intra_distance(gen) == 2.0

    def test_intra_needs_two(self):
        with pytest.raises(ValueError, match="2"):
            perceptual_intra_distance(fm([[1.0]]))


class TestDreamsim:
    def test_self_similarity(self):
        x = random_fm(10, 4, 22)
        assert dreamsim_score(x, x) == pytest.approx(1.0, abs=1e-6)

    def test_orthogonal_rows(self):
        real = fm([[1.0, 0.0]])
        gen = fm([[0.0, 1.0]])
        assert dreamsim_score(real, gen) == pytest.approx(0.0, abs=1e-12)

    def test_scale_invariance(self):
        real = fm([[2.0, 1.0]])
        gen = fm([[1.0, 0.5]])
        assert dreamsim_score(real, gen) == pytest.approx(1.0, abs=1e-6)


class TestPrdc:
    def test_identical_distinct_points(self):
        x = fm([[0.0], [1.0], [3.0]])
        result = prdc(x, fm([[0.0], [1.0], [3.0]], prefix="g"), k=1)
        assert result.precision == result.recall == result.coverage == 1.0

    def test_far_separated(self):
        real = random_fm(15, 2, 23)
        gen = fm(random_fm(15, 2, 24).values + 100.0)
        result = prdc(real, gen, k=2)
        assert result == (0.0, 0.0, 0.0, 0.0)

    def test_matches_double_loop_oracle(self):
        gen_rng = np.random.default_rng(25)
        for _ in range(40):
            nr = int(gen_rng.integers(4, 12))
            ng = int(gen_rng.integers(4, 12))
            k = int(gen_rng.integers(1, min(nr, ng)))
            real = fm(gen_rng.normal(size=(nr, 2)))
            gen = fm(gen_rng.normal(size=(ng, 2)), prefix="g")
            got = prdc(real, gen, k)
            want = prdc_double_loop(real.values, gen.values, k)
            assert got.precision == pytest.approx(want[0], abs=1e-12)
            assert got.recall == pytest.approx(want[1], abs=1e-12)
            assert got.density == pytest.approx(want[2], abs=1e-12)
            assert got.coverage == pytest.approx(want[3], abs=1e-12)

    def test_k_too_large_rejected(self):
        real = fm([[0.0], [1.0], [3.0]])
        with pytest.raises(ValueError, match="k"):
            prdc(real, fm([[0.5]], prefix="g"), k=1)


class TestRealism:
    def test_coincident_sample_capped(self):
        real = fm([[0.0], [1.0], [2.0], [3.0]])
        gen = fm([[1.0]], prefix="g")
        result = realism(real, gen, k=1)
        assert result.per_sample[0] == 1e6

    def test_boundary_ratio_one(self):
        # kept reals {0,1,2} all have r_1 = 1; g=3 gives ratios {1/3, 1/2, 1}
        real = fm([[0.0], [1.0], [2.0], [10.0]])
        gen = fm([[3.0]], prefix="g")
        result = realism(real, gen, k=1)
        assert result.median == pytest.approx(1.0, abs=1e-12)

    def test_far_sample_tiny(self):
        real = fm([[0.0], [1.0], [2.0], [3.0]])
        gen = fm([[1e6]], prefix="g")
        assert realism(real, gen, k=1).median < 1e-5

    def test_k_bound(self):
        with pytest.raises(ValueError, match="k"):
            realism(fm([[0.0], [1.0]]), fm([[0.5]], prefix="g"), k=2)


class TestVendi:
    def test_identical_rows_one(self):
        x = fm(np.tile([0.3, 0.4], (12, 1)))
        assert vendi(x) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal_rows_n(self):
        x = fm(np.eye(16))
        assert vendi(x) == pytest.approx(16.0, abs=1e-6)

    def test_two_orthogonal_clusters(self):
        rows = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        assert vendi(fm(rows)) == pytest.approx(2.0, abs=1e-9)

    def test_bounds(self):
        gen = np.random.default_rng(26)
        for _ in range(10):
            n = int(gen.integers(2, 20))
            x = fm(gen.normal(size=(n, 5)))
            v = vendi(x)
            assert 1.0 - 1e-9 <= v <= n + 1e-9

    def test_zero_rows_handled(self):
        x = fm([[0.0, 0.0], [0.0, 1.0]])
        assert np.isfinite(vendi(x))


class TestFls:
    def test_analytic_standard_normal(self):
        gen = np.random.default_rng(27)
        real = fm(gen.normal(size=(100_000, 1)))
        sample = fm(gen.normal(size=(100_000, 1)), prefix="g")
        want = -0.5 * (1.0 + np.log(2 * np.pi))  # = -1.4189
        assert fls(real, sample) == pytest.approx(want, abs=0.02)

    def test_shift_costs_fifty_nats(self):
        gen = np.random.default_rng(28)
        real = fm(gen.normal(size=(50_000, 1)))
        near = fm(gen.normal(size=(5_000, 1)), prefix="g")
        far = fm(near.values + 10.0, prefix="f")
        assert fls(real, near) - fls(real, far) == pytest.approx(50.0, abs=1.0)

    def test_in_sample_finite(self):
        x = random_fm(30, 8, 29)
        assert np.isfinite(fls(x, x))

    def test_degenerate_real_finite(self):
        real = fm(np.ones((10, 2)))
        assert np.isfinite(fls(real, fm([[1.0, 1.0]], prefix="g")))


class TestWasserstein1d:
    def test_trivial_cases(self):
        assert wasserstein_1d([0.0, 1.0], [0.0, 1.0]) == 0.0
        assert wasserstein_1d([0.0], [3.0]) == 3.0
        assert wasserstein_1d([0.0, 2.0], [1.0, 3.0]) == 1.0

    def test_unequal_sizes_hand_integral(self):
        # Fy^-1 is 0 on (0,1/2], 1 on (1/2,1] -> integral of |0 - Fy^-1| = 1/2
        assert wasserstein_1d([0.0], [0.0, 1.0]) == pytest.approx(0.5, abs=1e-12)

    def test_equal_size_matches_assignment(self):
        gen = np.random.default_rng(30)
        for _ in range(50):
            n = int(gen.integers(1, 9))
            x = np.sort(gen.normal(size=n))
            y = np.sort(gen.normal(size=n))
            assert wasserstein_1d(x, y) == pytest.approx(assignment_w1(x, y), abs=1e-12)

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError, match="sorted"):
            wasserstein_1d([1.0, 0.0], [0.0, 1.0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            wasserstein_1d([], [1.0])


class TestAsw:
    def test_identical_sets_zero(self):
        x = random_fm(20, 4, 31)
        for projections in (1, 7, 64):
            assert asw(x, x, projections, RngStream(5)) == 0.0

    def test_point_masses_distance_two(self):
        a = fm([[0.0]])
        b = fm([[2.0]], prefix="g")
        assert asw(a, b, 16, RngStream(6)) == pytest.approx(2.0, abs=1e-9)

    def test_projections_unit_norm(self):
        ps = sample_projections(8, 32, RngStream(7))
        norms = np.linalg.norm(ps.directions, axis=1)
        assert np.abs(norms - 1.0).max() < 1e-9

    def test_non_negative(self):
        a = random_fm(15, 3, 32)
        b = random_fm(25, 3, 33, loc=0.3)
        assert asw(a, b, 32, RngStream(8)) >= 0.0


class TestAuthpct:
    def test_exact_copies_zero(self):
        real = fm([[0.0], [1.0], [2.5]])
        gen = FeatureMatrix(real.values[:2], ("g0", "g1"), "t")
        assert authpct(real, gen) == 0.0

    def test_far_gen_hundred(self):
        real = random_fm(10, 2, 34)
        gen = fm(random_fm(5, 2, 35).values + 500.0, prefix="g")
        assert authpct(real, gen) == 100.0

    def test_hand_case(self):
        real = fm([[0.0], [1.0]])
        gen = fm([[0.4]], prefix="g")
        assert authpct(real, gen) == 0.0

    def test_isometry_invariance(self):
        gen_rng = np.random.default_rng(36)
        real = gen_rng.normal(size=(20, 3))
        gen = gen_rng.normal(size=(15, 3))
        q, _ = np.linalg.qr(gen_rng.normal(size=(3, 3)))
        shift = gen_rng.normal(size=3)
        a = authpct(fm(real), fm(gen, prefix="g"))
        b = authpct(fm(real @ q.T + shift), fm(gen @ q.T + shift, prefix="g"))
        assert a == pytest.approx(b, abs=1e-9)


class TestCtScore:
    def blobs(self, seed, n, shift=0.0):
        gen = np.random.default_rng(seed)
        centers = np.array([[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]])
        idx = gen.integers(0, 3, size=n)
        return centers[idx] + gen.normal(0, 1.0, (n, 2)) + shift

    def test_copying_strongly_negative(self):
        train = self.blobs(40, 500)
        test = self.blobs(41, 500)
        gen_vals = train[np.random.default_rng(42).integers(0, 500, 500)]
        value = ct_score(fm(train), fm(test, prefix="te"),
                         fm(gen_vals, prefix="g"), cells=3, rng=RngStream(9))
        assert value < -3.0

    def test_null_calibration(self):
        hits = 0
        for seed in range(10):
            train = self.blobs(100 + seed, 400)
            test = self.blobs(200 + seed, 400)
            gen_vals = self.blobs(300 + seed, 400)
            value = ct_score(fm(train), fm(test, prefix="te"),
                             fm(gen_vals, prefix="g"), cells=3, rng=RngStream(seed))
            hits += abs(value) < 2.0
        assert hits >= 9

    def test_gen_equals_test_near_zero(self):
        train = self.blobs(50, 300)
        test = self.blobs(51, 300)
        value = ct_score(fm(train), fm(test, prefix="te"),
                         fm(test, prefix="g"), cells=3, rng=RngStream(10))
        assert abs(value) < 0.1

    def test_no_qualifying_cell(self):
        train = self.blobs(52, 50)
        with pytest.raises(MetricError, match="floor"):
            ct_score(fm(train), fm(self.blobs(53, 10), prefix="te"),
                     fm(self.blobs(54, 10), prefix="g"), cells=3, rng=RngStream(11))


class TestFdInf:
    def test_hand_least_squares(self):
        slope, intercept = extrapolate_intercept([0.01, 0.02], [2.1, 2.2])
        assert slope == pytest.approx(10.0, abs=1e-9)
        assert intercept == pytest.approx(2.0, abs=1e-9)

    def test_matched_distribution_small_intercept(self):
        real = random_fm(2000, 8, 60)
        gen = random_fm(2000, 8, 61)
        value = fd_inf(real, gen, rng=RngStream(12))
        assert 0.0 <= value <= 0.05

    def test_single_size_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            fd_inf(random_fm(50, 2, 62), random_fm(50, 2, 63),
                   sizes=[20], rng=RngStream(13))


class TestManifoldIndex:
    def test_radii_exclude_self(self):
        x = fm([[0.0], [0.0], [5.0]])
        idx = manifold_index(x, k=1)
        assert np.array_equal(idx.radii, [0.0, 0.0, 5.0])


class TestMetricReport:
    def entry(self, name, value=1.0):
        return MetricEntry(name, value, "lower-better")

    def test_unique_names(self):
        with pytest.raises(ValueError, match="unique"):
            MetricReport("r", "g", (self.entry("fid"), self.entry("fid")))

    def test_json_round_trip(self, tmp_path):
        report = MetricReport("r", "g", (
            MetricEntry("fid", 1.5, "lower-better"),
            MetricEntry("kid", 0.1, "lower-better", std=0.01, flags=("x",)),
        ))
        report.to_json(tmp_path / "r.json")
        back = MetricReport.from_json(tmp_path / "r.json")
        assert back == report

    def test_csv_has_row_per_metric(self, tmp_path):
        report = MetricReport("r", "g", (self.entry("fid"), self.entry("asw")))
        report.to_csv(tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().strip().splitlines()
        assert len(lines) == 3


class TestEvaluateAll:
    def inputs(self, n=80, d=6):
        real = random_fm(n, d, 70)
        gen = random_fm(n, d, 71, loc=0.2, prefix="g")
        return real, gen

    def test_identity_configuration(self):
        real, _ = self.inputs()
        gen = FeatureMatrix(real.values, tuple(f"g{i}" for i in range(real.n)), "t")
        config = MetricConfig(enabled=("fid", "precision", "recall", "authpct"))
        report = evaluate_all(real, gen, config=config, rng=RngStream(20))
        assert report.value("fid") < 1e-6
        assert report.value("precision") == 1.0
        assert report.value("recall") == 1.0
        assert report.value("authpct") == 0.0
        assert "self-copy" in report.entry("authpct").flags

    def test_disabling_sfid_removes_one_entry(self):
        real, gen = self.inputs()
        spatial = random_fm(80, 12, 72, prefix="sp")
        gen_spatial = random_fm(80, 12, 73, prefix="gsp")
        train = random_fm(80, 6, 74, prefix="tr")
        full = evaluate_all(real, gen, rng=RngStream(21), real_spatial=spatial,
                            gen_spatial=gen_spatial, train=train,
                            config=MetricConfig(ct_min_cell=5, ct_cells=2))
        trimmed = MetricConfig(enabled=tuple(m for m in full.names() if m != "sfid"),
                               ct_min_cell=5, ct_cells=2)
        reduced = evaluate_all(real, gen, rng=RngStream(21), train=train,
                               config=trimmed)
        assert set(full.names()) - set(reduced.names()) == {"sfid"}

    def test_missing_probs_names_inception_score(self):
        real, gen = self.inputs()
        config = MetricConfig(enabled=("inception_score",), probs_source="external")
        with pytest.raises(MissingInputError, match="inception_score"):
            evaluate_all(real, gen, config=config, rng=RngStream(22))

    def test_missing_spatial_names_sfid(self):
        real, gen = self.inputs()
        with pytest.raises(MissingInputError, match="sfid"):
            evaluate_all(real, gen, config=MetricConfig(enabled=("sfid",)),
                         rng=RngStream(23))

    def test_missing_train_names_ct(self):
        real, gen = self.inputs()
        with pytest.raises(MissingInputError, match="ct"):
            evaluate_all(real, gen, config=MetricConfig(enabled=("ct",)),
                         rng=RngStream(24))

    def test_directions_follow_catalogue(self):
        real, gen = self.inputs()
        report = evaluate_all(real, gen, rng=RngStream(25),
                              config=MetricConfig(enabled=(
                                  "fid", "kid", "vendi", "authpct", "recall")))
        assert report.entry("fid").direction == "lower-better"
        assert report.entry("kid").std is not None
        assert report.entry("vendi").direction == "higher-better"

    def test_permutation_invariance(self):
        real, gen = self.inputs(n=60)
        perm_r = np.random.default_rng(77).permutation(60)
        perm_g = np.random.default_rng(78).permutation(60)
        real_p = FeatureMatrix(real.values[perm_r],
                               tuple(real.ids[i] for i in perm_r), "t")
        gen_p = FeatureMatrix(gen.values[perm_g],
                              tuple(gen.ids[i] for i in perm_g), "t")
        config = MetricConfig(enabled=(
            "fid", "kid", "mmd_rbf", "asw", "vendi", "precision", "recall",
            "density", "coverage", "authpct", "realism", "dreamsim",
            "perceptual_nn", "perceptual_intra", "fls", "fd_inf"))
        a = evaluate_all(real, gen, config=config, rng=RngStream(26))
        b = evaluate_all(real_p, gen_p, config=config, rng=RngStream(26))
        for name in a.names():
            assert a.value(name) == pytest.approx(b.value(name), abs=1e-9), name
