from __future__ import annotations

import math

import numpy as np
import pytest

from ampcg import (
    ChainGraph,
    SearchConfig,
    faithful_parameters,
    greedy_search,
    identify_in_class,
    implied_distribution,
    markov_equivalent,
    random_parameters,
    rescale_equal_variances,
    sample,
    skeleton_recovery,
    two_phase,
)


class TestIdentifyInClass:
    def test_two_node_dispersion_table(self):
        cov = np.array([[1.0, 1.0], [1.0, 2.0]])
        truth = ChainGraph(2, directed={(0, 1)})
        result = identify_in_class(truth, cov)
        assert result.chosen == truth
        assert result.class_size == 3
        by_graph = {row.graph: row.dispersion for row in result.table}
        assert by_graph[truth] < 1e-9
        assert abs(by_graph[ChainGraph(2, directed={(1, 0)})] - math.log(4.0)) < 1e-9
        assert abs(by_graph[ChainGraph(2, undirected={(0, 1)})] - math.log(2.0)) < 1e-9
        assert abs(result.margin - math.log(2.0)) < 1e-9

    def test_singleton_class_margin_infinite(self):
        cov = np.diag([1.0, 2.0])
        result = identify_in_class(ChainGraph(2), cov)
        assert result.chosen == ChainGraph(2)
        assert result.class_size == 1 and result.margin == math.inf

    def test_six_node_population_recovers_truth(self, six_node_graph):
        params = rescale_equal_variances(random_parameters(six_node_graph, seed=31), 1.0)
        cov = implied_distribution(params).cov
        result = identify_in_class(six_node_graph, cov)
        assert result.chosen == six_node_graph
        assert result.margin > 1e-6

    def test_every_wrong_member_shows_variance_spread(self, six_node_graph):
        # equal-variance models of two distinct Markov-equivalent graphs
        # cannot induce the same distribution: the wrong member's exact fit
        # is forced into unequal error variances
        params = rescale_equal_variances(random_parameters(six_node_graph, seed=33), 1.0)
        cov = implied_distribution(params).cov
        result = identify_in_class(six_node_graph, cov)
        for row in result.table:
            if row.graph == six_node_graph:
                assert row.dispersion < 1e-8
            else:
                assert row.dispersion > 1e-6

    def test_dataset_path_uses_score(self):
        truth = ChainGraph(2, directed={(0, 1)})
        params = rescale_equal_variances(random_parameters(truth, seed=3), 1.0)
        data = sample(implied_distribution(params), 20_000, seed=4)
        result = identify_in_class(truth, data)
        assert result.chosen == truth
        assert all(row.score is not None for row in result.table)
        assert result.margin > 0


class TestGreedySearch:
    def test_independent_data_returns_empty_graph(self):
        cov = np.diag([1.0, 1.3, 0.8])
        assert greedy_search(cov, SearchConfig(restarts=2)) == ChainGraph(3)

    def test_two_node_exact(self):
        truth = ChainGraph(2, directed={(0, 1)})
        params = rescale_equal_variances(random_parameters(truth, seed=5), 1.0)
        cov = implied_distribution(params).cov
        assert greedy_search(cov, SearchConfig(restarts=2)) == truth

    def test_three_node_chain_exact(self):
        truth = ChainGraph(3, directed={(0, 1), (1, 2)})
        params = rescale_equal_variances(random_parameters(truth, seed=6), 1.0)
        cov = implied_distribution(params).cov
        assert greedy_search(cov, SearchConfig(restarts=3)) == truth

    def test_deterministic_given_seed(self):
        truth = ChainGraph(3, directed={(0, 1)}, undirected={(1, 2)})
        params = rescale_equal_variances(random_parameters(truth, seed=7), 1.0)
        cov = implied_distribution(params).cov
        cfg = SearchConfig(restarts=3, seed=11)
        assert greedy_search(cov, cfg) == greedy_search(cov, cfg)

    def test_operator_subset_respected(self):
        cov = np.array([[1.0, 0.6], [0.6, 1.0]])
        cfg = SearchConfig(restarts=1, operators=("add_undir", "del_undir"))
        result = greedy_search(cov, cfg)
        assert not result.directed

    def test_empty_operator_set_rejected(self):
        with pytest.raises(ValueError):
            SearchConfig(operators=())


class TestSkeletonRecovery:
    def test_six_node_population(self, six_node_graph):
        params, _ = faithful_parameters(six_node_graph, seed=41)
        cov = implied_distribution(params).cov
        result = skeleton_recovery(cov)
        assert result.consistent
        assert markov_equivalent(result.graph, six_node_graph)

    def test_independent_population_gives_empty(self):
        result = skeleton_recovery(np.diag([1.0, 2.0, 0.7]))
        assert result.consistent and result.graph == ChainGraph(3)

    def test_collider_recovered(self):
        truth = ChainGraph(3, directed={(0, 1), (2, 1)})
        params, _ = faithful_parameters(truth, seed=42)
        cov = implied_distribution(params).cov
        result = skeleton_recovery(cov)
        assert result.consistent
        assert markov_equivalent(result.graph, truth)

    def test_finite_sample_flag_is_best_effort(self):
        truth = ChainGraph(3, directed={(0, 1), (2, 1)})
        params, _ = faithful_parameters(truth, seed=43)
        data = sample(implied_distribution(params), 2000, seed=44)
        result = skeleton_recovery(data, alpha_tol=0.05)
        assert result.graph.p == 3  # flag may go either way; output must exist


class TestTwoPhase:
    def test_population_composition_recovers_truth(self, six_node_graph):
        params, _ = faithful_parameters(six_node_graph, seed=51, sigma2=1.0)
        cov = implied_distribution(params).cov
        result = two_phase(cov)
        assert result.chosen == six_node_graph
