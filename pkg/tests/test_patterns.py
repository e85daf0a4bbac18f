import numpy as np
import pytest

from zeroport import fundsep, patterns
from zeroport.patterns import (
    AgentSpec,
    ClusterMap,
    MatchConfig,
    NoMatchError,
    PatternAgents,
    agent_grid,
    anti_bcrp_controls,
    generate_agent_controls,
    gyorfi_match_count,
    make_partitions,
    match,
    sample_moments,
    tuple_distance,
)
from conftest import brute_match_times, brute_partition_matches


def random_history(rng, t=None, m=None):
    t = t if t is not None else int(rng.integers(8, 50))
    m = m if m is not None else int(rng.integers(1, 4))
    return np.exp(rng.normal(0.0, 0.03, size=(t, m)))


class TestPartitions:
    def test_trivial_single_mask(self):
        p = make_partitions(5, "trivial", 3)
        np.testing.assert_array_equal(p.masks, [[True] * 5])

    def test_overlapping_literature_example(self):
        p = make_partitions(3, "overlapping", 3)
        expected = np.array([[0, 0, 1], [0, 1, 1], [1, 1, 1]], dtype=bool)
        np.testing.assert_array_equal(p.masks, expected)

    def test_overlapping_all_contain_last_period(self):
        p = make_partitions(11, "overlapping", 4)
        assert p.masks[:, -1].all()
        spans = p.masks.sum(axis=1)
        assert np.all(np.diff(spans) > 0)
        assert spans[-1] == 11

    def test_exclusive_even_split(self):
        p = make_partitions(4, "exclusive", 2)
        expected = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=bool)
        np.testing.assert_array_equal(p.masks, expected)

    def test_exclusive_covers_everything_disjointly(self):
        p = make_partitions(10, "exclusive", 3)
        assert p.masks.sum(axis=0).tolist() == [1] * 10

    def test_exclusive_too_many_blocks(self):
        with pytest.raises(ValueError):
            make_partitions(3, "exclusive", 4)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_partitions(3, "sideways", 1)


class TestGyorfiCount:
    def test_published_schedule_point(self):
        # ell=L=10 at t=10: p = 0.52, floor -> 5
        assert gyorfi_match_count(10, 10, 10) == 5

    def test_first_level_is_two_percent(self):
        assert gyorfi_match_count(1, 10, 100) == 2

    def test_single_level_degenerate(self):
        assert gyorfi_match_count(1, 1, 100) == 2

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            gyorfi_match_count(11, 10, 50)


class TestTupleDistance:
    def test_identical_tuples(self):
        q = np.array([[1.0, 1.1], [0.9, 1.0]])
        np.testing.assert_array_equal(tuple_distance(q, q), [0.0, 0.0])

    def test_single_row_broadcasts_euclidean(self):
        d = tuple_distance(np.array([[1.0, 1.0]]), np.array([[1.3, 1.4]]))
        np.testing.assert_allclose(d, [0.5, 0.5], atol=1e-15)

    def test_window_sums_absolute_differences(self):
        q = np.array([[1.0], [1.0]])
        c = np.array([[1.1], [0.8]])
        np.testing.assert_allclose(tuple_distance(q, c), [0.3], atol=1e-15)

    def test_euclidean_metric_column_norm(self):
        q = np.zeros((2, 1))
        c = np.array([[3.0], [4.0]])
        np.testing.assert_allclose(tuple_distance(q, c, metric="euclidean"), [5.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            tuple_distance(np.ones((2, 2)), np.ones((3, 2)))


class TestMatch:
    def test_insufficient_history(self):
        with pytest.raises(NoMatchError):
            match(np.ones((2, 2)), AgentSpec(k=3, ell=1))

    def test_constant_history_earliest_ties(self):
        x = np.ones((12, 2))
        res = match(x, AgentSpec(k=2, ell=3))
        np.testing.assert_array_equal(res.times, [1, 2, 3])
        assert res.agent_tuple.shape == (3, 2)
        np.testing.assert_array_equal(res.agent_tuple, np.ones((3, 2)))

    def test_brute_force_twenty_period_fixture(self, rng):
        x = random_history(rng, t=20, m=2)
        for k in range(1, 4):
            for ell in range(1, 5):
                res = match(x, AgentSpec(k=k, ell=ell))
                expected = brute_match_times(x, k, ell)
                np.testing.assert_array_equal(res.times, expected)

    def test_gyorfi_rule_count_and_times(self, rng):
        x = random_history(rng, t=40, m=2)
        res = match(x, AgentSpec(k=2, ell=10), rule="gyorfi_nn", levels=10)
        expected = brute_match_times(x, 2, 10, rule="gyorfi_nn", levels=10)
        assert len(res.times) == gyorfi_match_count(10, 10, 40)
        np.testing.assert_array_equal(res.times, expected)

    def test_lookahead_bound_respected(self, rng):
        x = random_history(rng, t=30, m=2)
        for tau in (1, 2, 3):
            res = match(x, AgentSpec(k=2, ell=30, tau=tau))
            assert res.times.max() + tau <= 29

    def test_agent_tuple_rows_are_outcomes(self, rng):
        x = random_history(rng, t=25, m=3)
        res = match(x, AgentSpec(k=2, ell=4, tau=2))
        np.testing.assert_array_equal(res.agent_tuple, x[res.times + 2])

    def test_multi_partition_best_per_partition(self, rng):
        x = random_history(rng, t=30, m=2)
        for kind in ("overlapping", "exclusive"):
            part = make_partitions(30, kind, 3)
            res = match(x, AgentSpec(k=2, ell=3), partition=part)
            expected = brute_partition_matches(x, 2, part.masks)
            np.testing.assert_array_equal(res.times, expected)

    def test_match_count_clamps_to_candidates(self, rng):
        x = random_history(rng, t=6, m=2)
        res = match(x, AgentSpec(k=2, ell=50))
        # candidates: ends 1..4 -> 4 of them
        assert len(res.times) == 4


class TestGrid:
    def test_fifty_agents_default(self):
        assert len(agent_grid(5, 10)) == 50

    def test_three_clusters_scale_to_150(self):
        assert len(agent_grid(5, 10, n_clusters=3)) == 150

    def test_unique_combinations(self):
        grid = agent_grid(3, 4, n_clusters=2, horizons=(1, 2))
        assert len(grid) == 48
        assert len(set(grid)) == 48

    def test_cluster_map_from_tickers(self):
        cmap = ClusterMap.from_tickers({"FIN": ["B", "C"], "RES": ["A"]}, ["A", "B", "C"])
        assert cmap.members == ((1, 2), (0,))
        with pytest.raises(ValueError):
            ClusterMap.from_tickers({"FIN": ["Z"]}, ["A"])


class TestSampleMoments:
    def test_against_numpy(self, rng):
        y = np.exp(rng.normal(0, 0.05, size=(12, 3)))
        mu, cov = sample_moments(y)
        np.testing.assert_allclose(mu, np.mean(y - 1.0, axis=0), atol=1e-14)
        np.testing.assert_allclose(cov, np.cov((y - 1.0).T, ddof=1), atol=1e-14)

    def test_single_row_zero_covariance(self):
        mu, cov = sample_moments(np.array([[1.1, 0.9]]))
        np.testing.assert_allclose(mu, [0.1, -0.1])
        np.testing.assert_array_equal(cov, np.zeros((2, 2)))


class TestGenerateControls:
    def test_no_history_all_fallback(self, rng):
        specs = agent_grid(2, 2)
        h_abs = generate_agent_controls(np.ones((1, 3)), specs, "absolute")
        np.testing.assert_allclose(h_abs, np.full((4, 3), 1 / 3))
        h_act = generate_agent_controls(np.ones((1, 3)), specs, "active")
        np.testing.assert_array_equal(h_act, np.zeros((4, 3)))

    def test_single_match_ridge_path_finite(self, rng):
        # ell=1 leaves a single outcome row: zero covariance, ridge kicks in.
        x = random_history(rng, t=8, m=2)
        h = generate_agent_controls(x, [AgentSpec(k=1, ell=1)], "active")
        assert np.all(np.isfinite(h))
        assert abs(np.abs(h).sum() - 1.0) < 1e-12 or np.all(h == 0)

    def test_drift_sign_check_active(self, rng):
        # Asset 0 drifts up, asset 1 down; late-history active controls
        # should be long the winner and short the loser.  The gyorfi rule
        # keeps every matched sample large enough to average out the noise.
        t = 300
        up = np.exp(rng.normal(0.006, 0.002, size=t))
        down = np.exp(rng.normal(-0.006, 0.002, size=t))
        x = np.column_stack([up, down])
        cfg = MatchConfig(rule="gyorfi_nn")
        h = generate_agent_controls(x, agent_grid(2, 10), "active", config=cfg)
        live = np.abs(h).sum(axis=1) > 0
        assert live.any()
        assert np.all(h[live, 0] > 0)
        assert np.all(h[live, 1] < 0)

    def test_cluster_locality(self, rng):
        x = random_history(rng, t=40, m=4)
        cmap = ClusterMap(members=((0, 1), (2, 3)), names=("L", "R"))
        specs = agent_grid(2, 2, n_clusters=2)
        for mode in ("absolute", "active"):
            h = generate_agent_controls(x, specs, mode, clusters=cmap)
            for i, spec in enumerate(specs):
                outside = [m for m in range(4) if m not in cmap.members[spec.cluster]]
                np.testing.assert_array_equal(h[i, outside], 0.0)

    def test_mode_normalization_rows(self, rng):
        x = random_history(rng, t=50, m=3)
        specs = agent_grid(3, 4)
        h_abs = generate_agent_controls(x, specs, "absolute")
        assert np.all(h_abs >= 0)
        np.testing.assert_allclose(h_abs.sum(axis=1), 1.0, atol=1e-12)
        h_act = generate_agent_controls(x, specs, "active")
        np.testing.assert_allclose(h_act.sum(axis=1), 0.0, atol=1e-12)
        lev = np.abs(h_act).sum(axis=1)
        assert np.all((lev < 1e-12) | (np.abs(lev - 1.0) < 1e-12))

    def test_no_lookahead_truncation_bit_identity(self, rng):
        x = random_history(rng, t=60, m=2)
        specs = agent_grid(3, 3)
        engine = PatternAgents(specs, 2)
        for t in (10, 25, 59):
            full_view = engine.controls(x[:t], "absolute")
            fresh = PatternAgents(specs, 2).controls(x[:t].copy(), "absolute")
            np.testing.assert_array_equal(full_view, fresh)

    def test_engine_agrees_with_per_agent_composition(self, rng):
        # The batched engine must reproduce match() + sample_moments +
        # fundsep.agent_controls applied agent by agent.
        x = random_history(rng, t=45, m=3)
        specs = agent_grid(3, 4)
        engine = PatternAgents(specs, 3)
        for mode in ("absolute", "active"):
            h = engine.controls(x, mode)
            for i, spec in enumerate(specs):
                res = match(x, spec, rule="trivial", levels=4)
                mu, cov = sample_moments(res.agent_tuple)
                expected = fundsep.agent_controls(mu, cov, mode)
                np.testing.assert_allclose(h[i], expected, atol=1e-12)

    def test_gyorfi_engine_agrees_with_match(self, rng):
        x = random_history(rng, t=50, m=2)
        specs = agent_grid(2, 10)
        cfg = MatchConfig(rule="gyorfi_nn")
        engine = PatternAgents(specs, 2, config=cfg)
        h = engine.controls(x, "absolute")
        for i, spec in enumerate(specs):
            res = match(x, spec, rule="gyorfi_nn", levels=10)
            mu, cov = sample_moments(res.agent_tuple)
            np.testing.assert_allclose(h[i], fundsep.agent_controls(mu, cov, "absolute"),
                                       atol=1e-12)

    def test_independent_columns_variant(self, rng):
        x = random_history(rng, t=40, m=3)
        cfg = MatchConfig(independent_columns=True)
        h = generate_agent_controls(x, agent_grid(2, 3), "absolute", config=cfg)
        assert h.shape == (6, 3)
        np.testing.assert_allclose(h.sum(axis=1), 1.0, atol=1e-12)

    def test_euclidean_metric_variant(self, rng):
        x = random_history(rng, t=30, m=2)
        cfg = MatchConfig(metric="euclidean")
        engine = PatternAgents(agent_grid(3, 3), 2, config=cfg)
        h = engine.controls(x, "absolute")
        for i, spec in enumerate(engine.specs):
            expected = brute_match_times(x, spec.k, spec.ell, metric="euclidean")
            res = match(x, spec, levels=3, metric="euclidean")
            np.testing.assert_array_equal(res.times, expected)
        assert np.all(np.isfinite(h))


class TestAntiBcrp:
    def test_leans_against_recent_winners(self):
        window = np.array([[1.05, 0.95], [1.04, 0.96], [1.06, 0.94]])
        h = anti_bcrp_controls(window, "active")
        assert h[0] < 0 < h[1]
        assert abs(h.sum()) < 1e-12
        assert abs(np.abs(h).sum() - 1.0) < 1e-12

    def test_constant_window_zero_active(self):
        h = anti_bcrp_controls(np.full((4, 3), 1.01), "active")
        np.testing.assert_array_equal(h, np.zeros(3))

    def test_single_row_finite(self):
        h = anti_bcrp_controls(np.array([[1.02, 0.99]]), "active")
        assert np.all(np.isfinite(h))

    def test_sign_flip_of_fund_controls(self, rng):
        window = np.exp(rng.normal(0, 0.02, size=(10, 3)))
        mu, cov = sample_moments(window)
        expected = fundsep.agent_controls(-mu, cov, "active")
        np.testing.assert_allclose(anti_bcrp_controls(window, "active"), expected,
                                   atol=1e-14)

    def test_grid_generator_shapes(self, rng):
        x = random_history(rng, t=12, m=2)
        specs = agent_grid(3, 2)
        h = patterns.generate_anti_bcrp_controls(x, specs, "absolute")
        assert h.shape == (6, 2)
        np.testing.assert_allclose(h.sum(axis=1), 1.0, atol=1e-12)
