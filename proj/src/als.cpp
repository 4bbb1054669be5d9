#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "treelearn/learning.hpp"

namespace treelearn {

void TrainingData::check() const {
    if (outputs.size() == 0) throw std::invalid_argument("training data is empty");
    if (inputs.rows() != outputs.size()) throw std::invalid_argument("inputs and outputs differ in length");
    for (std::size_t i = 0; i < validation.size(); ++i) {
        if (validation[i] >= static_cast<std::size_t>(outputs.size())) throw std::invalid_argument("validation index out of range");
        if (i && validation[i] <= validation[i - 1]) throw std::invalid_argument("validation indices must be sorted and unique");
    }
}

Sample subsample(const Sample& s, const std::vector<std::size_t>& rows) {
    Sample out;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), s.x.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.x.row(static_cast<Eigen::Index>(k)) = s.x.row(static_cast<Eigen::Index>(rows[k]));
        out.y[static_cast<Eigen::Index>(k)] = s.y[static_cast<Eigen::Index>(rows[k])];
    }
    return out;
}

Sample TrainingData::training() const {
    check();
    std::vector<std::size_t> rows;
    std::size_t v = 0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(outputs.size()); ++i) {
        if (v < validation.size() && validation[v] == i) {
            ++v;
            continue;
        }
        rows.push_back(i);
    }
    return subsample({inputs, outputs}, rows);
}

Sample TrainingData::held_out() const {
    check();
    return subsample({inputs, outputs}, validation);
}

namespace {

using kernels::Exec;

// Upward values reused across node updates; a node is recomputed only when its
// core or a descendant's core changed since the last refresh.
class UpwardCache {
public:
    UpwardCache(const TreeTensorNetwork& net, const Matrix& xs, Exec exec)
        : exec_(exec), basis_(kernels::basis_matrices(net, xs, exec)), up_(net.tree().size()),
          seen_(net.tree().size()) {}

    void refresh(const TreeTensorNetwork& net) {
        const auto& tree = net.tree();
        std::vector<char> dirty(tree.size(), 0);
        for (auto a : tree.by_decreasing_level()) {
            bool changed = !(seen_[a] == net.core(a));
            for (auto c : tree.children(a)) changed = changed || dirty[c];
            if (!changed) continue;
            dirty[a] = 1;
            seen_[a] = net.core(a);
            const Matrix cmat = net.core(a).last_mode_view();
            if (tree.is_leaf(a)) {
                up_[a] = kernels::block_product(basis_[tree.dims(a)[0]], cmat, exec_);
            } else {
                std::vector<const RowMatrix*> f;
                for (auto c : tree.children(a)) f.push_back(&up_[c]);
                up_[a] = kernels::block_product(kernels::rowwise_kron(f, exec_), cmat, exec_);
            }
        }
    }

    const std::vector<RowMatrix>& up() const { return up_; }
    const RowMatrix& basis(std::size_t dim) const { return basis_[dim]; }

private:
    Exec exec_;
    std::vector<RowMatrix> basis_;
    std::vector<RowMatrix> up_;
    std::vector<FullTensor> seen_;
};

RowMatrix down_values(const TreeTensorNetwork& net, NodeId alpha, const std::vector<RowMatrix>& up,
                      Eigen::Index n, Exec exec) {
    const auto& tree = net.tree();
    auto path = tree.ascendants(alpha);
    std::reverse(path.begin(), path.end());
    path.push_back(alpha);
    RowMatrix w = RowMatrix::Ones(n, 1);
    for (std::size_t i = 1; i < path.size(); ++i) w = kernels::child_down_values(net, path[i], up, w, exec);
    return w;
}

Matrix design(const TreeTensorNetwork& net, NodeId alpha, const UpwardCache& cache, Eigen::Index n, Exec exec) {
    const auto& tree = net.tree();
    const RowMatrix w = down_values(net, alpha, cache.up(), n, exec);
    std::vector<const RowMatrix*> f;
    if (tree.is_leaf(alpha)) {
        f.push_back(&cache.basis(tree.dims(alpha)[0]));
    } else {
        for (auto c : tree.children(alpha)) f.push_back(&cache.up()[c]);
    }
    f.push_back(&w);
    return kernels::rowwise_kron(f, exec);
}

}  // namespace

Matrix node_design_matrix(const TreeTensorNetwork& net0, NodeId alpha, const Matrix& xs, Exec exec) {
    TreeTensorNetwork net = net0;
    alpha_orthogonalize_in_place(net, alpha);
    UpwardCache cache(net, xs, exec);
    cache.refresh(net);
    return design(net, alpha, cache, xs.rows(), exec);
}

AlsResult als_fit(TreeTensorNetwork net, const Sample& train, const AlsConfig& config) {
    net.check();
    if (train.size() == 0 || static_cast<std::size_t>(train.x.rows()) != train.size())
        throw std::invalid_argument("als_fit needs a nonempty sample");
    const auto& tree = net.tree();
    const auto n = static_cast<Eigen::Index>(train.size());
    UpwardCache cache(net, train.x, config.exec);
    const auto order = tree.by_decreasing_level();

    AlsResult res;
    PatternFit last;
    Matrix last_design;
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t sweep = 0; sweep < config.max_sweeps; ++sweep) {
        for (auto a : order) {
            if (alpha_orthogonalize_in_place(net, a)) ++res.flagged_solves;
            cache.refresh(net);
            Matrix A = design(net, a, cache, n, config.exec);
            if (tree.is_leaf(a) && config.leaf_patterns) {
                const auto& b = net.bases()[tree.dims(a)[0]];
                last = solve_with_pattern_selection(A, train.y, leaf_patterns(b.degree, net.rank(a)));
            } else {
                last = solve_normal_equations(A, train.y);
            }
            if (!std::isfinite(last.empirical) || !last.coefficients.allFinite())
                throw std::runtime_error("non-finite risk in node update at " + format_subset(tree.dims(a)));
            if (last.flagged) ++res.flagged_solves;
            FullTensor c(net.core(a).shape(),
                         std::vector<double>(last.coefficients.data(), last.coefficients.data() + last.coefficients.size()));
            net.set_core(a, std::move(c));
            res.node_risks.push_back(last.empirical);
            if (std::isnan(last.loo)) last_design = std::move(A);
        }
        res.sweeps = sweep + 1;
        const double risk = last.empirical;
        if (risk == 0.0 || previous - risk < config.stagnation_tol * previous) break;
        previous = risk;
    }
    if (std::isnan(last.loo)) {
        // The fast solve skips leverages; estimate once for the final update.
        last.loo = loo_risk(last_design, train.y, last.coefficients);
        last.corrected_loo = corrected_loo_risk(last_design, train.y, last.coefficients);
    }
    res.risk.empirical = last.empirical;
    res.risk.loo = last.loo;
    res.risk.corrected_loo = last.corrected_loo;
    res.net = std::move(net);
    return res;
}

}  // namespace treelearn
