#include "treelearn/dimension_tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace treelearn {

std::string format_subset(const Subset& s) {
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(s[i] + 1);
    }
    return out + "}";
}

const DimensionTree::Node& DimensionTree::node(NodeId a) const {
    if (a >= nodes_.size()) throw std::out_of_range("unknown tree node " + std::to_string(a));
    return nodes_[a];
}

void DimensionTree::refresh() {
    std::size_t d = 0;
    for (const auto& n : nodes_)
        if (n.children.empty()) ++d;
    leaf_of_.assign(d, no_node);
    std::function<void(NodeId, std::size_t)> visit = [&](NodeId a, std::size_t level) {
        auto& n = nodes_[a];
        n.level = level;
        if (n.children.empty()) {
            if (n.dims.size() != 1 || n.dims[0] >= d)
                throw std::logic_error("leaf must carry a single dimension below d");
            if (leaf_of_[n.dims[0]] != no_node) throw std::logic_error("dimension assigned to two leaves");
            leaf_of_[n.dims[0]] = a;
            return;
        }
        Subset all;
        for (auto c : n.children) {
            if (nodes_[c].parent != a) throw std::logic_error("inconsistent parent link");
            visit(c, level + 1);
            all.insert(all.end(), nodes_[c].dims.begin(), nodes_[c].dims.end());
        }
        std::sort(all.begin(), all.end());
        n.dims = std::move(all);
    };
    visit(root_, 0);
}

DimensionTree DimensionTree::build(TreeKind kind, std::size_t d, std::span<const std::size_t> leaf_order) {
    if (d < 2) throw std::invalid_argument("dimension tree needs d >= 2");
    std::vector<std::size_t> order(d);
    if (leaf_order.empty()) {
        std::iota(order.begin(), order.end(), 0);
    } else {
        if (leaf_order.size() != d) throw std::invalid_argument("leaf_order must have d entries");
        order.assign(leaf_order.begin(), leaf_order.end());
        auto sorted = order;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < d; ++i)
            if (sorted[i] != i) throw std::invalid_argument("leaf_order is not a permutation");
    }

    DimensionTree t;
    auto add = [&](NodeId parent) {
        t.nodes_.push_back({});
        t.nodes_.back().parent = parent;
        if (parent != no_node) t.nodes_[parent].children.push_back(t.nodes_.size() - 1);
        return t.nodes_.size() - 1;
    };
    t.root_ = add(no_node);
    // Breadth-first slot numbering: each queue entry owns a range of leaf_order.
    struct Pending { NodeId id; std::size_t lo, hi; };
    std::vector<Pending> queue{{t.root_, 0, d}};
    for (std::size_t q = 0; q < queue.size(); ++q) {
        const auto [id, lo, hi] = queue[q];
        const std::size_t len = hi - lo;
        if (len == 1) {
            t.nodes_[id].dims = {order[lo]};
            continue;
        }
        switch (kind) {
        case TreeKind::balanced: {
            const std::size_t mid = lo + (len + 1) / 2;
            queue.push_back({add(id), lo, mid});
            queue.push_back({add(id), mid, hi});
            break;
        }
        case TreeKind::linear:
            queue.push_back({add(id), lo, hi - 1});
            queue.push_back({add(id), hi - 1, hi});
            break;
        case TreeKind::trivial:
            if (id != t.root_) throw std::logic_error("trivial tree has one level");
            for (std::size_t i = lo; i < hi; ++i) queue.push_back({add(id), i, i + 1});
            break;
        }
    }
    t.refresh();
    return t;
}

DimensionTree DimensionTree::from_subsets(std::size_t d, const std::vector<Subset>& input) {
    if (d < 2) throw std::invalid_argument("dimension tree needs d >= 2");
    std::vector<Subset> subsets = input;
    for (auto& s : subsets) {
        std::sort(s.begin(), s.end());
        if (s.empty() || s.back() >= d) throw std::invalid_argument("subset out of range");
        if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw std::invalid_argument("subset has duplicates");
    }
    DimensionTree t;
    t.nodes_.resize(subsets.size());
    t.root_ = no_node;
    for (std::size_t i = 0; i < subsets.size(); ++i) {
        t.nodes_[i].dims = subsets[i];
        if (subsets[i].size() == d) {
            if (t.root_ != no_node) throw std::invalid_argument("duplicate root subset");
            t.root_ = i;
        }
    }
    if (t.root_ == no_node) throw std::invalid_argument("no root subset");
    for (std::size_t i = 0; i < subsets.size(); ++i) {
        if (i == t.root_) continue;
        NodeId best = no_node;
        for (std::size_t j = 0; j < subsets.size(); ++j) {
            if (j == i || subsets[j].size() <= subsets[i].size()) continue;
            if (!std::includes(subsets[j].begin(), subsets[j].end(), subsets[i].begin(), subsets[i].end()))
                continue;
            if (best == no_node || subsets[j].size() < subsets[best].size()) best = j;
        }
        if (best == no_node) throw std::invalid_argument("subset " + format_subset(subsets[i]) + " has no parent");
        t.nodes_[i].parent = best;
    }
    for (std::size_t i = 0; i < subsets.size(); ++i)
        if (t.nodes_[i].parent != no_node) t.nodes_[t.nodes_[i].parent].children.push_back(i);
    t.refresh();
    for (std::size_t i = 0; i < subsets.size(); ++i)
        if (t.nodes_[i].dims != subsets[i])
            throw std::invalid_argument("children of " + format_subset(subsets[i]) + " do not partition it");
    t.validate();
    return t;
}

std::size_t DimensionTree::child_position(NodeId a) const {
    const auto p = parent(a);
    if (p == no_node) throw std::invalid_argument("root has no parent slot");
    const auto& ch = nodes_[p].children;
    return static_cast<std::size_t>(std::find(ch.begin(), ch.end(), a) - ch.begin());
}

std::vector<NodeId> DimensionTree::ascendants(NodeId a) const {
    std::vector<NodeId> out;
    for (auto p = parent(a); p != no_node; p = nodes_[p].parent) out.push_back(p);
    return out;
}

std::vector<NodeId> DimensionTree::descendants(NodeId a) const {
    std::vector<NodeId> out;
    std::vector<NodeId> stack(children(a).rbegin(), children(a).rend());
    while (!stack.empty()) {
        auto b = stack.back();
        stack.pop_back();
        out.push_back(b);
        stack.insert(stack.end(), nodes_[b].children.rbegin(), nodes_[b].children.rend());
    }
    return out;
}

std::vector<NodeId> DimensionTree::siblings(NodeId a) const {
    std::vector<NodeId> out;
    if (parent(a) == no_node) return out;
    for (auto c : nodes_[parent(a)].children)
        if (c != a) out.push_back(c);
    return out;
}

bool DimensionTree::is_ascendant(NodeId anc, NodeId a) const {
    for (auto p = parent(a); p != no_node; p = nodes_[p].parent)
        if (p == anc) return true;
    return false;
}

std::vector<NodeId> DimensionTree::by_decreasing_level() const {
    std::vector<NodeId> out(nodes_.size());
    std::iota(out.begin(), out.end(), 0);
    std::stable_sort(out.begin(), out.end(),
                     [&](NodeId a, NodeId b) { return nodes_[a].level > nodes_[b].level; });
    return out;
}

std::vector<NodeId> DimensionTree::leaves() const {
    std::vector<NodeId> out;
    for (NodeId a = 0; a < nodes_.size(); ++a)
        if (nodes_[a].children.empty()) out.push_back(a);
    return out;
}

std::vector<NodeId> DimensionTree::interior_nodes() const {
    std::vector<NodeId> out;
    for (NodeId a = 0; a < nodes_.size(); ++a)
        if (!nodes_[a].children.empty()) out.push_back(a);
    return out;
}

std::optional<NodeId> DimensionTree::find(const Subset& subset) const {
    Subset s = subset;
    std::sort(s.begin(), s.end());
    for (NodeId a = 0; a < nodes_.size(); ++a)
        if (nodes_[a].dims == s) return a;
    return std::nullopt;
}

std::size_t DimensionTree::depth() const {
    std::size_t m = 0;
    for (const auto& n : nodes_) m = std::max(m, n.level);
    return m;
}

std::size_t DimensionTree::arity() const {
    std::size_t m = 0;
    for (const auto& n : nodes_) m = std::max(m, n.children.size());
    return m;
}

std::vector<Subset> DimensionTree::subsets() const {
    std::vector<Subset> out;
    for (const auto& n : nodes_) out.push_back(n.dims);
    std::sort(out.begin(), out.end());
    return out;
}

DimensionTree DimensionTree::canonical(std::vector<NodeId>* old_to_new) const {
    std::vector<NodeId> order(nodes_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return nodes_[a].dims < nodes_[b].dims; });
    std::vector<NodeId> map(nodes_.size());
    for (std::size_t k = 0; k < order.size(); ++k) map[order[k]] = k;
    DimensionTree t;
    t.nodes_.resize(nodes_.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& src = nodes_[order[k]];
        auto& dst = t.nodes_[k];
        dst.dims = src.dims;
        dst.level = src.level;
        dst.parent = src.parent == no_node ? no_node : map[src.parent];
        for (auto c : src.children) dst.children.push_back(map[c]);
        std::sort(dst.children.begin(), dst.children.end());
    }
    t.root_ = map[root_];
    t.leaf_of_.resize(leaf_of_.size());
    for (std::size_t i = 0; i < leaf_of_.size(); ++i) t.leaf_of_[i] = map[leaf_of_[i]];
    if (old_to_new) *old_to_new = std::move(map);
    return t;
}

void DimensionTree::validate() const {
    const std::size_t d = leaf_of_.size();
    if (nodes_.empty() || root_ >= nodes_.size()) throw std::logic_error("tree has no root");
    if (nodes_[root_].dims.size() != d || nodes_[root_].level != 0 || nodes_[root_].parent != no_node)
        throw std::logic_error("root must carry all dimensions at level 0");
    std::size_t reached = 0;
    for (NodeId a = 0; a < nodes_.size(); ++a) {
        const auto& n = nodes_[a];
        if (a != root_) {
            if (n.parent == no_node) throw std::logic_error("detached node " + format_subset(n.dims));
            if (n.level != nodes_[n.parent].level + 1) throw std::logic_error("level mismatch");
        }
        if (n.children.empty()) {
            if (n.dims.size() != 1) throw std::logic_error("leaf with several dimensions");
            continue;
        }
        if (n.dims.size() == 1) throw std::logic_error("singleton with children");
        if (n.children.size() < 2) throw std::logic_error("trivial partition at " + format_subset(n.dims));
        Subset all;
        for (auto c : n.children) all.insert(all.end(), nodes_[c].dims.begin(), nodes_[c].dims.end());
        std::sort(all.begin(), all.end());
        if (all != n.dims || std::adjacent_find(all.begin(), all.end()) != all.end())
            throw std::logic_error("children do not partition " + format_subset(n.dims));
        reached += n.children.size();
    }
    if (reached + 1 != nodes_.size()) throw std::logic_error("tree is not connected");
}

void DimensionTree::swap_subtrees(NodeId nu, NodeId mu) {
    if (nu == mu || nu == root_ || mu == root_ || is_ascendant(nu, mu) || is_ascendant(mu, nu))
        throw std::invalid_argument("nodes " + format_subset(dims(nu)) + " and " + format_subset(dims(mu)) +
                                    " are not disjoint");
    const NodeId pn = nodes_[nu].parent, pm = nodes_[mu].parent;
    auto& cn = nodes_[pn].children;
    auto& cm = nodes_[pm].children;
    *std::find(cn.begin(), cn.end(), nu) = no_node;
    *std::find(cm.begin(), cm.end(), mu) = nu;
    *std::find(cn.begin(), cn.end(), no_node) = mu;
    nodes_[nu].parent = pm;
    nodes_[mu].parent = pn;
    refresh();
}

std::string DimensionTree::serialize() const {
    const auto c = canonical();
    std::ostringstream os;
    os << "tree " << dimension() << ' ' << size() << '\n';
    for (NodeId a = 0; a < c.size(); ++a) {
        os << a << ' ' << format_subset(c.dims(a));
        for (auto ch : c.children(a)) os << ' ' << ch;
        os << '\n';
    }
    return os.str();
}

DimensionTree DimensionTree::parse(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string tag;
    std::size_t d = 0, n = 0;
    if (!(is >> tag >> d >> n) || tag != "tree") throw std::invalid_argument("not a tree document");
    std::string line;
    std::getline(is, line);
    DimensionTree t;
    t.nodes_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!std::getline(is, line)) throw std::invalid_argument("truncated tree document");
        std::istringstream ls(line);
        std::size_t idx = 0;
        std::string subset;
        if (!(ls >> idx >> subset) || idx != k || subset.size() < 2 || subset.front() != '{' || subset.back() != '}')
            throw std::invalid_argument("malformed tree line: " + line);
        Subset dims;
        std::istringstream ss(subset.substr(1, subset.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto v = std::stoul(item);
            if (v == 0 || v > d) throw std::invalid_argument("dimension out of range: " + line);
            dims.push_back(v - 1);
        }
        t.nodes_[k].dims = dims;
        std::size_t ch;
        while (ls >> ch) {
            if (ch >= n) throw std::invalid_argument("child index out of range: " + line);
            t.nodes_[k].children.push_back(ch);
        }
    }
    t.root_ = no_node;
    for (NodeId a = 0; a < n; ++a)
        for (auto c : t.nodes_[a].children) {
            if (t.nodes_[c].parent != no_node) throw std::invalid_argument("node with two parents");
            t.nodes_[c].parent = a;
        }
    for (NodeId a = 0; a < n; ++a)
        if (t.nodes_[a].parent == no_node) {
            if (t.root_ != no_node) throw std::invalid_argument("several roots");
            t.root_ = a;
        }
    if (t.root_ == no_node) throw std::invalid_argument("no root");
    auto declared = t.nodes_;
    t.refresh();
    for (NodeId a = 0; a < n; ++a)
        if (declared[a].dims != t.nodes_[a].dims) throw std::invalid_argument("subset does not match children");
    if (t.dimension() != d) throw std::invalid_argument("dimension count mismatch");
    t.validate();
    return t;
}

std::string DimensionTree::describe() const {
    std::function<std::string(NodeId)> rec = [&](NodeId a) -> std::string {
        if (is_leaf(a)) return std::to_string(dims(a)[0] + 1);
        std::string s = "(";
        for (std::size_t i = 0; i < children(a).size(); ++i) {
            if (i) s += ',';
            s += rec(children(a)[i]);
        }
        return s + ")";
    };
    return rec(root_);
}

NodeRelations node_relations(const DimensionTree& tree, NodeId a) {
    NodeRelations r;
    r.parent = tree.parent(a);
    r.children = tree.children(a);
    r.ascendants = tree.ascendants(a);
    r.descendants = tree.descendants(a);
    r.level = tree.level(a);
    r.leaves_below = tree.dims(a);
    return r;
}

Admissibility is_admissible(const DimensionTree& tree, const RankMap& ranks, std::span<const std::size_t> leaf_dims) {
    if (ranks.size() != tree.size()) throw std::invalid_argument("rank map does not cover every node");
    if (leaf_dims.size() != tree.dimension()) throw std::invalid_argument("leaf dimensions missing");
    auto fail = [](std::string msg) { return Admissibility{false, std::move(msg)}; };
    if (ranks[tree.root()] != 1) return fail("root rank must be 1");
    for (NodeId a = 0; a < tree.size(); ++a) {
        const auto& s = format_subset(tree.dims(a));
        if (ranks[a] == 0) return fail("zero rank at " + s);
        if (!tree.is_root(a)) {
            double bound = static_cast<double>(ranks[tree.parent(a)]);
            for (auto b : tree.siblings(a)) bound *= static_cast<double>(ranks[b]);
            if (static_cast<double>(ranks[a]) > bound) return fail("rank at " + s + " exceeds parent times siblings");
        }
        if (tree.is_leaf(a)) {
            if (ranks[a] > leaf_dims[tree.dims(a)[0]]) return fail("leaf rank at " + s + " exceeds basis size");
        } else {
            double bound = 1.0;
            for (auto b : tree.children(a)) bound *= static_cast<double>(ranks[b]);
            if (static_cast<double>(ranks[a]) > bound) return fail("rank at " + s + " exceeds product of children");
        }
        double full = 1.0;
        for (auto nu : tree.dims(a)) full *= static_cast<double>(leaf_dims[nu]);
        if (static_cast<double>(ranks[a]) > full) return fail("rank at " + s + " exceeds subspace dimension");
    }
    return {};
}

RankMap admissible_hull(const DimensionTree& tree, RankMap ranks, std::span<const std::size_t> leaf_dims) {
    if (ranks.size() != tree.size()) throw std::invalid_argument("rank map does not cover every node");
    if (leaf_dims.size() != tree.dimension()) throw std::invalid_argument("leaf dimensions missing");
    ranks[tree.root()] = 1;
    auto cap = [](std::size_t r, double bound) {
        return static_cast<double>(r) > bound ? static_cast<std::size_t>(bound) : r;
    };
    for (bool changed = true; changed;) {
        changed = false;
        for (NodeId a = 0; a < tree.size(); ++a) {
            if (tree.is_root(a)) continue;
            const auto before = ranks[a];
            double up = static_cast<double>(ranks[tree.parent(a)]);
            for (auto b : tree.siblings(a)) up *= static_cast<double>(ranks[b]);
            double down = 1.0;
            if (tree.is_leaf(a))
                down = static_cast<double>(leaf_dims[tree.dims(a)[0]]);
            else
                for (auto b : tree.children(a)) down *= static_cast<double>(ranks[b]);
            ranks[a] = std::max<std::size_t>(1, cap(cap(ranks[a], up), down));
            changed = changed || ranks[a] != before;
        }
    }
    return ranks;
}

MoveGeometry move_geometry(const DimensionTree& tree, PermutationMove move) {
    const auto [nu, mu] = move;
    if (nu == mu || tree.is_root(nu) || tree.is_root(mu) || tree.is_ascendant(nu, mu) || tree.is_ascendant(mu, nu))
        throw std::invalid_argument("permutation needs two disjoint non-root nodes");
    MoveGeometry g;
    const auto an = tree.ascendants(nu);
    const auto am = tree.ascendants(mu);
    for (auto a : an)
        if (std::find(am.begin(), am.end(), a) != am.end()) {
            g.gamma = a;
            break;
        }
    for (const auto* list : {&an, &am})
        for (auto a : *list) {
            if (a == g.gamma) break;
            g.affected.push_back(a);
        }
    std::sort(g.affected.begin(), g.affected.end());
    std::stable_sort(g.affected.begin(), g.affected.end(),
                     [&](NodeId a, NodeId b) { return tree.level(a) > tree.level(b); });
    g.noop = tree.parent(nu) == tree.parent(mu);
    auto in_affected = [&](NodeId a) { return std::find(g.affected.begin(), g.affected.end(), a) != g.affected.end(); };
    for (auto c : tree.children(g.gamma))
        if (!in_affected(c)) g.boundary.push_back(c);
    for (auto a : g.affected)
        for (auto c : tree.children(a))
            if (!in_affected(c)) g.boundary.push_back(c);
    return g;
}

DimensionTree permute_topology(const DimensionTree& tree, PermutationMove move) {
    DimensionTree out = tree;
    out.swap_subtrees(move.nu, move.mu);
    return out;
}

double move_cost(const DimensionTree& tree, const RankMap& ranks, PermutationMove move) {
    const auto g = move_geometry(tree, move);
    double c = static_cast<double>(ranks.at(g.gamma));
    for (auto b : g.boundary) c *= static_cast<double>(ranks.at(b));
    return c;
}

std::size_t draw_move_count(Rng& rng, const ProposalParams& params, std::size_t d) {
    if (!(params.gamma1 > 0)) throw std::invalid_argument("gamma1 must be positive");
    const std::size_t cap = params.max_moves ? params.max_moves : d;
    std::vector<double> w(std::max<std::size_t>(cap, 1));
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::pow(static_cast<double>(k + 1), -params.gamma1);
    std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
    return dist(rng) + 1;
}

PermutationMove draw_move(const DimensionTree& tree, const RankMap& ranks, Rng& rng, const ProposalParams& params) {
    if (!(params.gamma2 > 0) || !(params.gamma3 > 0)) throw std::invalid_argument("gamma2, gamma3 must be positive");
    std::vector<NodeId> firsts;
    std::vector<double> wf;
    for (NodeId a = 0; a < tree.size(); ++a) {
        if (tree.is_root(a)) continue;
        firsts.push_back(a);
        wf.push_back(std::pow(static_cast<double>(ranks.at(tree.parent(a))), params.gamma2));
    }
    std::discrete_distribution<std::size_t> first(wf.begin(), wf.end());
    for (std::size_t attempt = 0; attempt <= params.max_retries; ++attempt) {
        const NodeId nu = firsts[first(rng)];
        std::vector<NodeId> seconds;
        std::vector<double> ws;
        for (NodeId b = 0; b < tree.size(); ++b) {
            if (b == nu || tree.is_root(b) || tree.parent(b) == tree.parent(nu)) continue;
            if (tree.is_ascendant(b, nu) || tree.is_ascendant(nu, b)) continue;
            seconds.push_back(b);
            ws.push_back(std::pow(move_cost(tree, ranks, {nu, b}), -params.gamma3));
        }
        if (seconds.empty()) continue;
        std::discrete_distribution<std::size_t> second(ws.begin(), ws.end());
        return {nu, seconds[second(rng)]};
    }
    throw std::runtime_error("no admissible node permutation in this tree");
}

std::vector<PermutationMove> draw_move_sequence(const DimensionTree& tree, const RankMap& ranks, Rng& rng,
                                                const ProposalParams& params) {
    const std::size_t m = draw_move_count(rng, params, tree.dimension());
    std::vector<PermutationMove> moves;
    DimensionTree work = tree;
    for (std::size_t i = 0; i < m; ++i) {
        moves.push_back(draw_move(work, ranks, rng, params));
        work.swap_subtrees(moves.back().nu, moves.back().mu);
    }
    return moves;
}

std::size_t storage_complexity(const DimensionTree& tree, const RankMap& ranks, std::span<const std::size_t> leaf_dims) {
    if (ranks.size() != tree.size()) throw std::invalid_argument("rank map does not cover every node");
    std::size_t c = 0;
    for (NodeId a = 0; a < tree.size(); ++a) {
        std::size_t p = ranks[a];
        if (tree.is_leaf(a)) {
            p *= leaf_dims[tree.dims(a)[0]];
        } else {
            for (auto b : tree.children(a)) p *= ranks[b];
        }
        c += p;
    }
    return c;
}

}  // namespace treelearn
