#include "treelearn/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace treelearn {

void AdaptConfig::check() const {
    if (!(theta_star >= 0.0 && theta_star <= 1.0)) throw std::invalid_argument("theta_star must lie in [0,1]");
    if (!(overfit > 1.0)) throw std::invalid_argument("overfit factor must exceed 1");
    if (!(proposal.gamma1 > 0 && proposal.gamma2 > 0 && proposal.gamma3 > 0))
        throw std::invalid_argument("proposal exponents must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw std::invalid_argument("validation fraction must lie in [0,1)");
    if (!(goal >= 0.0)) throw std::invalid_argument("goal must be nonnegative");
    if (max_iterations == 0) throw std::invalid_argument("max_iterations must be positive");
}

std::vector<std::size_t> draw_validation(std::size_t n, double fraction, Rng& rng) {
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (k >= n) throw std::invalid_argument("validation set would leave no training data");
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(k);
    std::sort(rows.begin(), rows.end());
    return rows;
}

RankSelection select_rank_increase(const TreeTensorNetwork& current, const Sample& train,
                                   const AdaptConfig& config, Rng& rng) {
    const auto& tree = current.tree();
    const auto ranks = current.ranks();
    const auto leaf_dims = current.leaf_dims();

    // Rank-one correction fitted to the residuals from a fresh random start.
    Sample residual{train.x, train.y - evaluate(current, train.x)};
    AlsConfig corr = config.als;
    corr.max_sweeps = config.correction_sweeps;
    const auto w0 = TreeTensorNetwork::random(tree, current.bases(), RankMap(tree.size(), 1), rng);
    const auto w = als_fit(w0, residual, corr).net;

    auto start = add(current, w);
    orthogonalize_in_place(start);  // drops ranks above the leaf basis size
    RankSelection out;
    out.enriched = als_fit(std::move(start), train, config.als).net;

    const auto spectrum = singular_spectrum(out.enriched);
    const double unorm = spectrum[tree.root()][0];
    auto& nodes = out.nodes;
    nodes.score.assign(tree.size(), 0.0);
    for (NodeId a = 0; a < tree.size(); ++a) {
        if (tree.is_root(a)) continue;
        // Error of truncating the enriched fit back to the current rank.
        const auto& s = spectrum[a];
        const auto r = static_cast<Eigen::Index>(ranks[a]);
        const double eta = r < s.size() ? s.tail(s.size() - r).norm() : 0.0;
        nodes.score[a] = eta;
        if (tree.is_leaf(a) && ranks[a] >= leaf_dims[tree.dims(a)[0]]) continue;
        if (eta <= config.machine_eps * unorm) continue;
        nodes.eligible.push_back(a);
    }
    if (nodes.eligible.empty()) {
        out.saturated = true;
        out.next_ranks = ranks;
        return out;
    }

    double eta_max = 0.0;
    for (auto a : nodes.eligible) eta_max = std::max(eta_max, nodes.score[a]);
    // Every threshold between consecutive ratios selects the same set, so the
    // distinct ratios below theta_star (then zero) cover [0, theta_star] exactly.
    std::vector<double> thetas{config.theta_star};
    std::vector<double> ratios;
    for (auto a : nodes.eligible) {
        const double q = nodes.score[a] / eta_max;
        if (q < config.theta_star) ratios.push_back(q);
    }
    std::sort(ratios.begin(), ratios.end(), std::greater<>());
    ratios.erase(std::unique(ratios.begin(), ratios.end()), ratios.end());
    thetas.insert(thetas.end(), ratios.begin(), ratios.end());
    thetas.push_back(0.0);

    for (double theta : thetas) {
        RankMap next = ranks;
        std::vector<NodeId> chosen;
        for (auto a : nodes.eligible)
            if (nodes.score[a] / eta_max >= theta) {
                chosen.push_back(a);
                ++next[a];
            }
        if (is_admissible(tree, next, leaf_dims).admissible) {
            nodes.theta = theta;
            nodes.selected = std::move(chosen);
            out.next_ranks = std::move(next);
            return out;
        }
    }
    out.saturated = true;
    out.next_ranks = ranks;
    return out;
}

TreeSearchResult tree_optimize(const TreeTensorNetwork& v, double epsilon, std::size_t trials, Rng& rng,
                               const ProposalParams& params, std::size_t max_core_entries) {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("tree search precision must lie in [0,1)");
    TreeSearchResult res;
    res.net = v;
    std::size_t best = v.complexity();
    const std::size_t d = v.tree().dimension();
    if (d < 3) return res;  // every pair of disjoint nodes is a sibling pair
    bool newtree = false;
    std::size_t m = 0;
    TreeTensorNetwork base = v;

    for (std::size_t k = 1; k <= trials; ++k) {
        const std::size_t m_old = m;
        m = draw_move_count(rng, params, d);
        const double precision = epsilon / static_cast<double>(m + res.accepted.size());
        try {
            if (m > m_old || newtree) {
                base = v;
                for (const auto& s : res.accepted)
                    permute_representation_in_place(base, s, precision, max_core_entries);
            }
            TreeTensorNetwork w = base;
            std::vector<PermutationMove> moves;
            for (std::size_t i = 0; i < m; ++i) {
                const auto ranks = w.ranks();
                PermutationMove move;
                std::size_t tries = 0;
                for (;;) {
                    move = draw_move(w.tree(), ranks, rng, params);
                    if (move_cost(w.tree(), ranks, move) <= static_cast<double>(max_core_entries)) break;
                    ++res.infeasible;
                    if (++tries > params.max_retries) throw InfeasibleMove("no feasible move within the retry budget");
                }
                permute_representation_in_place(w, move, precision, max_core_entries);
                moves.push_back(move);
            }
            if (w.complexity() < best) {
                newtree = true;
                best = w.complexity();
                res.net = std::move(w);
                res.accepted.insert(res.accepted.end(), moves.begin(), moves.end());
                res.improved = true;
            } else {
                newtree = false;
            }
        } catch (const InfeasibleMove&) {
            ++res.infeasible;
            newtree = false;
            m = 0;  // force a fresh replay next round
        }
    }
    return res;
}

namespace {

struct Run {
    const AdaptConfig& config;
    Sample train, held;
    bool use_validation;
    double reference = 0.0;  // risk of the zero function
    std::vector<IterationRecord> records;
    std::vector<TreeTensorNetwork> nets;

    double score(const IterationRecord& r) const { return use_validation ? *r.validation : r.corrected_loo; }

    void record(const AlsResult& fit, bool accepted) {
        IterationRecord r;
        r.iteration = records.size() + 1;
        r.tree = fit.net.tree();
        r.ranks = fit.net.ranks();
        r.empirical = fit.risk.empirical;
        r.corrected_loo = fit.risk.corrected_loo;
        if (use_validation) r.validation = risks(fit.net, held).empirical;
        r.complexity = fit.net.complexity();
        r.tree_accepted = accepted;
        records.push_back(std::move(r));
        nets.push_back(fit.net);
        if (config.on_record) config.on_record(records.back());
    }

    bool should_stop() const {
        if (records.size() >= config.max_iterations) return true;
        const double cur = score(records.back());
        if (cur <= config.goal * reference) return true;
        if (records.size() > 1) {
            double prev = score(records.front());
            for (std::size_t i = 1; i + 1 < records.size(); ++i) prev = std::min(prev, score(records[i]));
            if (cur >= config.overfit * prev) return true;
        }
        return false;
    }
};

// Precision for the tree search: relative cross-validation error of the fit.
double search_precision(const AlsResult& fit, const Sample& train) {
    const double ref = train.y.squaredNorm() / static_cast<double>(train.size());
    if (!(ref > 0.0) || !std::isfinite(fit.risk.corrected_loo)) return 0.0;
    return std::clamp(std::sqrt(fit.risk.corrected_loo / ref), 0.0, 0.99);
}

}  // namespace

AdaptResult adaptive_fit(const TrainingData& data, const AdaptConfig& config, Rng& rng,
                         const DimensionTree& initial_tree) {
    config.check();
    data.check();
    if (static_cast<std::size_t>(data.inputs.cols()) != initial_tree.dimension())
        throw std::invalid_argument("inputs do not match the tree dimension");
    Run run{config, data.training(), data.held_out(), !data.validation.empty(), 0.0, {}, {}};
    const Sample& ref_sample = run.use_validation ? run.held : run.train;
    run.reference = ref_sample.y.squaredNorm() / static_cast<double>(ref_sample.size());

    const std::vector<FeatureBasis> bases(initial_tree.dimension(), FeatureBasis{BasisFamily::legendre, config.degree});
    auto fit = als_fit(TreeTensorNetwork::random(initial_tree, bases, RankMap(initial_tree.size(), 1), rng), run.train,
                       config.als);
    run.record(fit, false);

    while (!run.should_stop()) {
        const auto sel = select_rank_increase(fit.net, run.train, config, rng);
        if (sel.saturated) break;
        fit = als_fit(truncate(sel.enriched, sel.next_ranks), run.train, config.als);
        run.record(fit, false);
        if (!config.tree_adaptation || run.should_stop()) continue;

        const auto search = tree_optimize(fit.net, search_precision(fit, run.train), config.tree_trials, rng,
                                          config.proposal, config.max_core_entries);
        if (search.improved && search.net.complexity() < fit.net.complexity()) {
            fit = als_fit(search.net, run.train, config.als);
            run.record(fit, true);
        }
    }

    AdaptResult out;
    out.best = 0;
    for (std::size_t i = 1; i < run.records.size(); ++i)
        if (run.score(run.records[i]) < run.score(run.records[out.best])) out.best = i;
    out.net = run.nets[out.best];
    out.records = std::move(run.records);
    return out;
}

AdaptResult rank_adaptive_fit(const DimensionTree& tree, const TrainingData& data, const AdaptConfig& config,
                              Rng& rng) {
    AdaptConfig c = config;
    c.tree_adaptation = false;
    return adaptive_fit(data, c, rng, tree);
}

}  // namespace treelearn
