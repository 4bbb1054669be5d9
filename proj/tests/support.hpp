#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "treelearn/tree_network.hpp"

namespace treelearn::testing {

// Random binary tree built by merging random pairs of clusters.
inline DimensionTree random_binary_tree(std::size_t d, Rng& rng) {
    std::vector<Subset> clusters, all;
    for (std::size_t k = 0; k < d; ++k) {
        clusters.push_back({k});
        all.push_back({k});
    }
    while (clusters.size() > 1) {
        std::uniform_int_distribution<std::size_t> pick(0, clusters.size() - 1);
        const auto i = pick(rng);
        auto j = pick(rng);
        while (j == i) j = pick(rng);
        Subset merged = clusters[i];
        merged.insert(merged.end(), clusters[j].begin(), clusters[j].end());
        std::sort(merged.begin(), merged.end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(std::max(i, j)));
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(std::min(i, j)));
        clusters.push_back(merged);
        all.push_back(merged);
    }
    return DimensionTree::from_subsets(d, all);
}

// Random ranks in [1, max_rank], lowered until admissible.
inline RankMap random_admissible_ranks(const DimensionTree& tree, const std::vector<FeatureBasis>& bases,
                                       std::size_t max_rank, Rng& rng) {
    std::uniform_int_distribution<std::size_t> draw(1, max_rank);
    RankMap r(tree.size());
    for (auto& x : r) x = draw(rng);
    r[tree.root()] = 1;
    for (bool changed = true; changed;) {
        changed = false;
        for (NodeId a = 0; a < tree.size(); ++a) {
            std::size_t bound = tree.is_leaf(a) ? bases[tree.dims(a)[0]].size() : 1;
            for (auto c : tree.children(a)) bound *= r[c];
            if (!tree.is_root(a)) {
                std::size_t up = r[tree.parent(a)];
                for (auto s : tree.siblings(a)) up *= r[s];
                bound = std::min(bound, up);
            }
            if (r[a] > bound) {
                r[a] = bound;
                changed = true;
            }
        }
    }
    return r;
}

inline std::vector<FeatureBasis> random_bases(std::size_t d, std::size_t max_degree, Rng& rng) {
    std::uniform_int_distribution<std::size_t> draw(1, max_degree);
    std::vector<FeatureBasis> b(d);
    for (auto& x : b) x.degree = draw(rng);
    return b;
}

inline Matrix uniform_points(std::size_t n, std::size_t d, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = u(rng);
    return x;
}

inline double relative_gap(const Vector& a, const Vector& b) {
    const double ref = std::max(b.norm(), 1e-300);
    return (a - b).norm() / ref;
}

}  // namespace treelearn::testing
