#include "treelearn/tree_network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "treelearn/kernels.hpp"

namespace treelearn {

std::string orth_state_name(OrthState s) {
    switch (s) {
    case OrthState::none: return "none";
    case OrthState::all: return "all";
    case OrthState::node: return "node";
    }
    return "none";
}

TreeTensorNetwork::TreeTensorNetwork(DimensionTree tree, std::vector<FeatureBasis> bases,
                                     std::vector<FullTensor> cores)
    : tree_(std::move(tree)), bases_(std::move(bases)), cores_(std::move(cores)) {
    orthonormal_.assign(cores_.size(), 0);
    check();
}

namespace {

std::vector<std::size_t> core_shape(const DimensionTree& tree, const std::vector<FeatureBasis>& bases,
                                    const RankMap& ranks, NodeId a) {
    if (tree.is_leaf(a)) return {bases.at(tree.dims(a)[0]).size(), ranks.at(a)};
    std::vector<std::size_t> shape;
    for (auto c : tree.children(a)) shape.push_back(ranks.at(c));
    shape.push_back(ranks.at(a));
    return shape;
}

void check_ranks(const DimensionTree& tree, const RankMap& ranks) {
    if (ranks.size() != tree.size()) throw std::invalid_argument("rank map does not cover every node");
    if (ranks[tree.root()] != 1) throw std::invalid_argument("root rank must be 1");
    for (auto r : ranks)
        if (r == 0) throw std::invalid_argument("ranks must be positive");
}

}  // namespace

TreeTensorNetwork TreeTensorNetwork::random(const DimensionTree& tree, const std::vector<FeatureBasis>& bases,
                                            const RankMap& ranks, Rng& rng) {
    check_ranks(tree, ranks);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<FullTensor> cores;
    for (NodeId a = 0; a < tree.size(); ++a) {
        FullTensor c(core_shape(tree, bases, ranks, a));
        for (auto& v : c.data()) v = normal(rng);
        cores.push_back(std::move(c));
    }
    return {tree, bases, std::move(cores)};
}

TreeTensorNetwork TreeTensorNetwork::zeros(const DimensionTree& tree, const std::vector<FeatureBasis>& bases,
                                           const RankMap& ranks) {
    check_ranks(tree, ranks);
    std::vector<FullTensor> cores;
    for (NodeId a = 0; a < tree.size(); ++a) cores.emplace_back(core_shape(tree, bases, ranks, a));
    return {tree, bases, std::move(cores)};
}

TreeTensorNetwork TreeTensorNetwork::constant(const DimensionTree& tree, const std::vector<FeatureBasis>& bases,
                                              double value) {
    auto net = zeros(tree, bases, RankMap(tree.size(), 1));
    for (NodeId a = 0; a < tree.size(); ++a) net.cores_[a][0] = tree.is_root(a) ? value : 1.0;
    for (NodeId a = 0; a < tree.size(); ++a) net.orthonormal_[a] = tree.is_root(a) ? 0 : 1;
    net.state_ = OrthState::all;
    return net;
}

void TreeTensorNetwork::set_core(NodeId a, FullTensor c) {
    cores_.at(a) = std::move(c);
    orthonormal_[a] = 0;
    state_ = OrthState::none;
    center_ = no_node;
}

void TreeTensorNetwork::reset(DimensionTree tree, std::vector<FullTensor> cores) {
    tree_ = std::move(tree);
    cores_ = std::move(cores);
    orthonormal_.assign(cores_.size(), 0);
    state_ = OrthState::none;
    center_ = no_node;
    check();
}

void TreeTensorNetwork::set_orth_state(OrthState s, NodeId center) {
    state_ = s;
    center_ = s == OrthState::node ? center : no_node;
}

RankMap TreeTensorNetwork::ranks() const {
    RankMap r(cores_.size());
    for (NodeId a = 0; a < cores_.size(); ++a) r[a] = rank(a);
    return r;
}

std::vector<std::size_t> TreeTensorNetwork::leaf_dims() const {
    std::vector<std::size_t> n;
    for (const auto& b : bases_) n.push_back(b.size());
    return n;
}

std::size_t TreeTensorNetwork::complexity() const {
    return storage_complexity(tree_, ranks(), leaf_dims());
}

void TreeTensorNetwork::check() const {
    if (bases_.size() != tree_.dimension()) throw std::logic_error("one basis per dimension required");
    if (cores_.size() != tree_.size()) throw std::logic_error("one core per tree node required");
    for (NodeId a = 0; a < tree_.size(); ++a) {
        const auto& shape = cores_[a].shape();
        const auto where = format_subset(tree_.dims(a));
        if (tree_.is_leaf(a)) {
            if (shape.size() != 2 || shape[0] != bases_[tree_.dims(a)[0]].size())
                throw std::logic_error("leaf core " + where + " must have shape (N, r)");
            continue;
        }
        const auto& ch = tree_.children(a);
        if (shape.size() != ch.size() + 1) throw std::logic_error("core order mismatch at " + where);
        for (std::size_t j = 0; j < ch.size(); ++j)
            if (shape[j] != rank(ch[j])) throw std::logic_error("core extent mismatch at " + where);
    }
    if (rank(tree_.root()) != 1) throw std::logic_error("root rank must be 1");
}

Vector evaluate(const TreeTensorNetwork& net, const Matrix& xs) {
    return kernels::evaluate_batch(net, xs, kernels::Exec::parallel);
}

FullTensor assemble_full(const TreeTensorNetwork& net, std::size_t max_entries) {
    const auto& tree = net.tree();
    const auto n = net.leaf_dims();
    if (shape_product(n) > max_entries) throw std::length_error("full tensor exceeds the size guard");
    // Each node's tensor has modes (dims of the node in increasing order..., r).
    std::vector<FullTensor> part(tree.size());
    for (auto a : tree.by_decreasing_level()) {
        if (tree.is_leaf(a)) {
            part[a] = net.core(a);
            continue;
        }
        // Contract the children one at a time into the core's slots.
        FullTensor t = net.core(a);
        std::vector<std::size_t> labels;  // dimension index, or d + slot for pending child modes
        const std::size_t d = tree.dimension();
        const auto& ch = tree.children(a);
        for (std::size_t j = 0; j < ch.size(); ++j) labels.push_back(d + j);
        labels.push_back(2 * d + 1);
        for (std::size_t j = 0; j < ch.size(); ++j) {
            const auto pos = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), d + j) - labels.begin());
            const std::size_t rows[] = {pos};
            const Matrix m = matricize(t, rows);
            const auto& c = part[ch[j]];
            const Matrix cm = c.last_mode_view();
            RowMatrix prod = cm * m;
            std::vector<std::size_t> shape(c.shape().begin(), c.shape().end() - 1);
            std::vector<std::size_t> new_labels(tree.dims(ch[j]).begin(), tree.dims(ch[j]).end());
            for (std::size_t k = 0; k < labels.size(); ++k)
                if (k != pos) {
                    shape.push_back(t.extent(k));
                    new_labels.push_back(labels[k]);
                }
            t = FullTensor(shape, std::vector<double>(prod.data(), prod.data() + prod.size()));
            labels = std::move(new_labels);
        }
        std::vector<std::size_t> perm(labels.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) { return labels[x] < labels[y]; });
        part[a] = permute_modes(t, perm);
    }
    auto full = part[tree.root()];
    auto shape = full.shape();
    shape.pop_back();
    return FullTensor(shape, std::move(full.data()));
}

void orthogonalize_in_place(TreeTensorNetwork& net) {
    const auto& tree = net.tree();
    for (auto a : tree.by_decreasing_level()) {
        if (tree.is_root(a) || net.orthonormal(a)) continue;
        const NodeId p = tree.parent(a);
        const auto& c = net.core(a);
        const Matrix m = c.last_mode_view();
        const Eigen::Index k = std::min(m.rows(), m.cols());
        Eigen::HouseholderQR<Matrix> qr(m);
        Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), k);
        Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        for (Eigen::Index i = 0; i < k; ++i)
            if (r(i, i) < 0) {
                r.row(i) *= -1.0;
                q.col(i) *= -1.0;
            }
        auto shape = c.shape();
        shape.back() = static_cast<std::size_t>(k);
        RowMatrix qr_rows = q;
        FullTensor qc(shape, std::vector<double>(qr_rows.data(), qr_rows.data() + qr_rows.size()));
        FullTensor pc = mode_multiply(net.core(p), tree.child_position(a), r);
        net.set_core(a, std::move(qc));
        net.set_core(p, std::move(pc));
        net.mark_orthonormal(a, true);
    }
    net.set_orth_state(OrthState::all);
}

TreeTensorNetwork orthogonalize(TreeTensorNetwork net) {
    orthogonalize_in_place(net);
    return net;
}

namespace {

// Factor of the Gram matrix of w^beta from the parent's factor.
NodeFactor child_factor(const TreeTensorNetwork& net, NodeId beta, const Matrix& parent_l) {
    const auto& tree = net.tree();
    const NodeId gamma = tree.parent(beta);
    const FullTensor b = mode_multiply(net.core(gamma), net.core(gamma).order() - 1, parent_l.transpose());
    const std::size_t rows[] = {tree.child_position(beta)};
    const Matrix m = matricize(b, rows);
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeFullU);
    NodeFactor f;
    f.basis = svd.matrixU();
    f.singular_values = Vector::Zero(m.rows());
    f.singular_values.head(svd.singularValues().size()) = svd.singularValues();
    return f;
}

Matrix factor_matrix(const NodeFactor& f) { return f.basis * f.singular_values.asDiagonal(); }

}  // namespace

std::vector<NodeFactor> node_factors(const TreeTensorNetwork& net) {
    const auto& tree = net.tree();
    std::vector<NodeFactor> out(tree.size());
    std::vector<Matrix> l(tree.size());
    out[tree.root()] = {Matrix::Identity(1, 1), Vector::Ones(1)};
    l[tree.root()] = Matrix::Identity(1, 1);
    auto order = tree.by_decreasing_level();
    std::reverse(order.begin(), order.end());
    for (auto a : order) {
        if (tree.is_root(a)) continue;
        out[a] = child_factor(net, a, l[tree.parent(a)]);
        l[a] = factor_matrix(out[a]);
    }
    return out;
}

bool alpha_orthogonalize_in_place(TreeTensorNetwork& net, NodeId alpha) {
    const auto& tree = net.tree();
    orthogonalize_in_place(net);
    if (tree.is_root(alpha)) return false;
    auto path = tree.ascendants(alpha);
    std::reverse(path.begin(), path.end());
    path.push_back(alpha);
    Matrix l = Matrix::Identity(1, 1);
    NodeFactor f;
    for (std::size_t i = 1; i < path.size(); ++i) {
        f = child_factor(net, path[i], l);
        l = factor_matrix(f);
    }
    bool regularized = false;
    Vector s = f.singular_values;
    const double smax = s.size() ? s.maxCoeff() : 0.0;
    if (smax == 0.0) {
        s.setOnes();
        regularized = true;
    } else {
        const double floor = std::sqrt(1e-14) * smax;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s[i] < floor) {
                s[i] = floor;
                regularized = true;
            }
    }
    const Matrix lt = s.asDiagonal() * f.basis.transpose();
    const Matrix linv = s.cwiseInverse().asDiagonal() * f.basis.transpose();
    const NodeId p = tree.parent(alpha);
    FullTensor ca = mode_multiply(net.core(alpha), net.core(alpha).order() - 1, lt);
    FullTensor cp = mode_multiply(net.core(p), tree.child_position(alpha), linv);
    net.set_core(alpha, std::move(ca));
    net.set_core(p, std::move(cp));
    net.set_orth_state(OrthState::node, alpha);
    return regularized;
}

TreeTensorNetwork alpha_orthogonalize(TreeTensorNetwork net, NodeId alpha) {
    alpha_orthogonalize_in_place(net, alpha);
    return net;
}

SingularSpectrum singular_spectrum(const TreeTensorNetwork& net) {
    const auto v = orthogonalize(net);
    const auto f = node_factors(v);
    SingularSpectrum s(f.size());
    for (NodeId a = 0; a < f.size(); ++a) s[a] = f[a].singular_values;
    s[v.tree().root()] = Vector::Constant(1, v.core(v.tree().root()).norm());
    return s;
}

namespace {

TreeTensorNetwork project(TreeTensorNetwork v, const std::vector<NodeFactor>& f, const RankMap& m) {
    const auto& tree = v.tree();
    std::vector<FullTensor> cores = v.cores();
    for (NodeId a = 0; a < tree.size(); ++a) {
        if (tree.is_root(a)) continue;
        const Matrix pt = f[a].basis.leftCols(static_cast<Eigen::Index>(m[a])).transpose();
        cores[a] = mode_multiply(cores[a], cores[a].order() - 1, pt);
        const NodeId p = tree.parent(a);
        cores[p] = mode_multiply(cores[p], tree.child_position(a), pt);
    }
    v.reset(tree, std::move(cores));
    orthogonalize_in_place(v);
    return v;
}

}  // namespace

TreeTensorNetwork truncate(const TreeTensorNetwork& net, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("truncation precision must lie in [0,1)");
    auto v = orthogonalize(net);
    const auto f = node_factors(v);
    const auto& tree = v.tree();
    const double eps = epsilon / std::sqrt(static_cast<double>(tree.size() - 1));
    RankMap m(tree.size(), 1);
    for (NodeId a = 0; a < tree.size(); ++a)
        if (!tree.is_root(a)) m[a] = tail_rank(f[a].singular_values, eps);
    return project(std::move(v), f, m);
}

TreeTensorNetwork truncate(const TreeTensorNetwork& net, const RankMap& target) {
    const auto adm = is_admissible(net.tree(), target, net.leaf_dims());
    if (!adm.admissible) throw std::invalid_argument("inadmissible target ranks: " + adm.violation);
    auto v = orthogonalize(net);
    const auto f = node_factors(v);
    const auto current = v.ranks();
    RankMap m(target.size());
    for (NodeId a = 0; a < target.size(); ++a) m[a] = std::min(target[a], current[a]);
    return project(std::move(v), f, m);
}

TreeTensorNetwork add(const TreeTensorNetwork& a, const TreeTensorNetwork& b) {
    if (!(a.tree() == b.tree())) throw std::invalid_argument("add: networks live on different trees");
    if (a.bases() != b.bases()) throw std::invalid_argument("add: networks use different bases");
    const auto& tree = a.tree();
    std::vector<FullTensor> cores;
    for (NodeId n = 0; n < tree.size(); ++n) {
        const auto& ca = a.core(n);
        const auto& cb = b.core(n);
        const bool root = tree.is_root(n);
        const bool leaf = tree.is_leaf(n);
        auto shape = ca.shape();
        for (std::size_t k = 0; k < shape.size(); ++k) {
            const bool summed = (k + 1 == shape.size() && root) || (k == 0 && leaf);
            if (!summed) shape[k] += cb.extent(k);
        }
        FullTensor c(shape);
        auto place = [&](const FullTensor& src, bool second) {
            const auto strides = c.strides();
            std::vector<std::size_t> idx(src.order(), 0);
            for (std::size_t off = 0; off < src.size(); ++off) {
                std::size_t dst = 0;
                for (std::size_t k = 0; k < idx.size(); ++k) {
                    const bool summed = (k + 1 == idx.size() && root) || (k == 0 && leaf);
                    const std::size_t shift = (second && !summed) ? ca.extent(k) : 0;
                    dst += (idx[k] + shift) * strides[k];
                }
                c[dst] += src[off];
                for (std::size_t k = idx.size(); k-- > 0;) {
                    if (++idx[k] < src.extent(k)) break;
                    idx[k] = 0;
                }
            }
        };
        place(ca, false);
        place(cb, true);
        cores.push_back(std::move(c));
    }
    return {tree, a.bases(), std::move(cores)};
}

TreeTensorNetwork scale(TreeTensorNetwork net, double c) {
    const NodeId r = net.tree().root();
    FullTensor core = net.core(r);
    for (auto& v : core.data()) v *= c;
    const auto state = net.orth_state();
    const auto center = net.orth_node();
    net.set_core(r, std::move(core));
    if (state == OrthState::all) net.set_orth_state(state, center);
    return net;
}

double norm(const TreeTensorNetwork& net) {
    const auto v = orthogonalize(net);
    return v.core(v.tree().root()).norm();
}

void permute_representation_in_place(TreeTensorNetwork& net, PermutationMove move, double epsilon,
                                     std::size_t max_entries) {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("permutation precision must lie in [0,1)");
    const DimensionTree tree = net.tree();
    const auto g = move_geometry(tree, move);
    const DimensionTree new_tree = permute_topology(tree, move);

    if (g.noop) {
        // Same partition; only the parent's child order changes.
        const NodeId p = tree.parent(move.nu);
        std::vector<std::size_t> perm(net.core(p).order());
        std::iota(perm.begin(), perm.end(), 0);
        std::swap(perm[tree.child_position(move.nu)], perm[tree.child_position(move.mu)]);
        std::vector<FullTensor> cores = net.cores();
        cores[p] = permute_modes(cores[p], perm);
        std::vector<char> flags(tree.size());
        for (NodeId a = 0; a < tree.size(); ++a) flags[a] = net.orthonormal(a);
        const auto state = net.orth_state();
        const auto center = net.orth_node();
        net.reset(new_tree, std::move(cores));
        for (NodeId a = 0; a < tree.size(); ++a) net.mark_orthonormal(a, flags[a] != 0);
        net.set_orth_state(state, center);
        return;
    }

    if (move_cost(tree, net.ranks(), move) > static_cast<double>(max_entries))
        throw InfeasibleMove("merged tensor for the move exceeds the size cap");

    if (tree.is_root(g.gamma))
        orthogonalize_in_place(net);
    else
        alpha_orthogonalize_in_place(net, g.gamma);

    // Merge the affected cores into the core of gamma, by increasing level.
    FullTensor t = net.core(g.gamma);
    std::vector<NodeId> labels = tree.children(g.gamma);
    labels.push_back(g.gamma);
    for (auto it = g.affected.rbegin(); it != g.affected.rend(); ++it) {
        const NodeId a = *it;
        const auto pos = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), a) - labels.begin());
        const std::size_t rows[] = {pos};
        const Matrix m = matricize(t, rows);
        const Matrix ca = net.core(a).last_mode_view();
        const RowMatrix prod = ca * m;
        std::vector<std::size_t> shape;
        std::vector<NodeId> new_labels;
        for (auto c : tree.children(a)) {
            shape.push_back(net.rank(c));
            new_labels.push_back(c);
        }
        for (std::size_t k = 0; k < labels.size(); ++k)
            if (k != pos) {
                shape.push_back(t.extent(k));
                new_labels.push_back(labels[k]);
            }
        t = FullTensor(shape, std::vector<double>(prod.data(), prod.data() + prod.size()));
        labels = std::move(new_labels);
    }

    // Split again along the permuted tree, by decreasing level.
    std::vector<NodeId> affected = g.affected;
    std::stable_sort(affected.begin(), affected.end(),
                     [&](NodeId x, NodeId y) { return new_tree.level(x) > new_tree.level(y); });
    const double eps = epsilon / std::sqrt(static_cast<double>(affected.size()));
    std::vector<FullTensor> cores = net.cores();
    for (auto a : affected) {
        std::vector<std::size_t> rows;
        std::vector<std::size_t> child_shape;
        for (auto c : new_tree.children(a)) {
            const auto pos = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), c) - labels.begin());
            rows.push_back(pos);
            child_shape.push_back(t.extent(pos));
        }
        const Matrix m = matricize(t, rows);
        const auto svd = truncated_svd(m, std::nullopt, eps);
        const auto k = static_cast<Eigen::Index>(svd.retained_rank);
        const RowMatrix u = svd.left;
        child_shape.push_back(svd.retained_rank);
        cores[a] = FullTensor(child_shape, std::vector<double>(u.data(), u.data() + u.size()));
        const RowMatrix rest = svd.singular_values.head(k).asDiagonal() * svd.right.transpose();
        std::vector<std::size_t> shape{svd.retained_rank};
        std::vector<NodeId> new_labels{a};
        for (std::size_t j = 0; j < labels.size(); ++j)
            if (std::find(rows.begin(), rows.end(), j) == rows.end()) {
                shape.push_back(t.extent(j));
                new_labels.push_back(labels[j]);
            }
        t = FullTensor(shape, std::vector<double>(rest.data(), rest.data() + rest.size()));
        labels = std::move(new_labels);
    }

    std::vector<std::size_t> perm;
    for (auto c : new_tree.children(g.gamma))
        perm.push_back(static_cast<std::size_t>(std::find(labels.begin(), labels.end(), c) - labels.begin()));
    perm.push_back(static_cast<std::size_t>(std::find(labels.begin(), labels.end(), g.gamma) - labels.begin()));
    cores[g.gamma] = permute_modes(t, perm);

    std::vector<char> flags(tree.size());
    for (NodeId a = 0; a < tree.size(); ++a) flags[a] = net.orthonormal(a);
    for (auto a : affected) flags[a] = 1;
    flags[g.gamma] = 0;
    net.reset(new_tree, std::move(cores));
    for (NodeId a = 0; a < tree.size(); ++a) net.mark_orthonormal(a, flags[a] != 0);
    if (new_tree.is_root(g.gamma))
        net.set_orth_state(OrthState::all);
    else
        net.set_orth_state(OrthState::node, g.gamma);

    // An untouched node can now carry more rank than its new neighbourhood
    // supports; those directions are null and would leave singular designs.
    const auto ranks = net.ranks();
    const auto hull = admissible_hull(new_tree, ranks, net.leaf_dims());
    if (hull != ranks) net = truncate(net, hull);
}

TreeTensorNetwork permute_representation(TreeTensorNetwork net, PermutationMove move, double epsilon,
                                         std::size_t max_entries) {
    permute_representation_in_place(net, move, epsilon, max_entries);
    return net;
}

}  // namespace treelearn
