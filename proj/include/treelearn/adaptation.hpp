#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "treelearn/learning.hpp"

namespace treelearn {

struct IterationRecord;

struct AdaptConfig {
    double theta_star = 0.8;
    ProposalParams proposal;
    std::size_t tree_trials = 100;
    double goal = 1e-14;  // validation risk, relative to that of zero, that ends the run
    double overfit = 10.0;
    std::size_t max_iterations = 50;
    double validation_fraction = 0.2;  // 0 selects on corrected LOO instead
    double machine_eps = std::numeric_limits<double>::epsilon();
    bool tree_adaptation = true;
    AlsConfig als;
    std::size_t correction_sweeps = 5;
    std::size_t max_core_entries = 10'000'000;
    std::size_t degree = 5;  // polynomial degree of every leaf basis
    std::function<void(const IterationRecord&)> on_record;  // progress hook

    void check() const;
};

struct IterationRecord {
    std::size_t iteration = 0;  // 1-based, sequential
    DimensionTree tree;
    RankMap ranks;
    double empirical = 0.0;
    std::optional<double> validation;
    double corrected_loo = 0.0;
    std::size_t complexity = 0;
    bool tree_accepted = false;  // fit obtained on a newly accepted tree
};

struct CandidateNodeSet {
    std::vector<NodeId> eligible;  // the candidate nodes
    std::vector<NodeId> selected;  // nodes whose rank grows
    std::vector<double> score;     // per slot: smallest singular value of the enriched fit
    double theta = 0.0;
};

struct RankSelection {
    CandidateNodeSet nodes;
    RankMap next_ranks;
    TreeTensorNetwork enriched;
    bool saturated = false;  // no admissible increase exists
};

// Enriches the current fit by a rank-one correction, refits it and picks the
// nodes whose rank grows by one.
RankSelection select_rank_increase(const TreeTensorNetwork& current, const Sample& train,
                                   const AdaptConfig& config, Rng& rng);

struct AdaptResult {
    TreeTensorNetwork net;
    std::vector<IterationRecord> records;
    std::size_t best = 0;  // index into records
};

AdaptResult rank_adaptive_fit(const DimensionTree& tree, const TrainingData& data, const AdaptConfig& config,
                              Rng& rng);

struct TreeSearchResult {
    TreeTensorNetwork net;
    std::vector<PermutationMove> accepted;  // ordered moves from the input tree
    std::size_t infeasible = 0;             // proposals dropped for the size cap
    bool improved = false;
};

// Stochastic search for a tree with lower storage complexity at relative
// precision epsilon.
TreeSearchResult tree_optimize(const TreeTensorNetwork& v, double epsilon, std::size_t trials, Rng& rng,
                               const ProposalParams& params = {}, std::size_t max_core_entries = 10'000'000);

AdaptResult adaptive_fit(const TrainingData& data, const AdaptConfig& config, Rng& rng,
                         const DimensionTree& initial_tree);

// Validation rows: a seeded random subset of the given fraction.
std::vector<std::size_t> draw_validation(std::size_t n, double fraction, Rng& rng);

}  // namespace treelearn
