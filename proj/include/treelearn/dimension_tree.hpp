#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "treelearn/random.hpp"

namespace treelearn {

// Nodes are addressed by slot. Dimensions are 0-based in the API and 1-based
// in text output.
using NodeId = std::size_t;
inline constexpr NodeId no_node = static_cast<NodeId>(-1);

using RankMap = std::vector<std::size_t>;
using Subset = std::vector<std::size_t>;

enum class TreeKind { balanced, linear, trivial };

class DimensionTree {
public:
    DimensionTree() = default;

    static DimensionTree build(TreeKind kind, std::size_t d, std::span<const std::size_t> leaf_order = {});
    // Parent of each subset is the smallest listed subset strictly containing it.
    static DimensionTree from_subsets(std::size_t d, const std::vector<Subset>& subsets);
    static DimensionTree parse(std::string_view text);

    std::string serialize() const;
    std::string describe() const;  // one-line nested form, e.g. ((1,2),(3,4))

    std::size_t dimension() const { return leaf_of_.size(); }
    std::size_t size() const { return nodes_.size(); }
    NodeId root() const { return root_; }

    const Subset& dims(NodeId a) const { return node(a).dims; }
    NodeId parent(NodeId a) const { return node(a).parent; }
    const std::vector<NodeId>& children(NodeId a) const { return node(a).children; }
    std::size_t level(NodeId a) const { return node(a).level; }
    bool is_leaf(NodeId a) const { return node(a).children.empty(); }
    bool is_root(NodeId a) const { return a == root_; }
    NodeId leaf_of(std::size_t dim) const { return leaf_of_.at(dim); }
    std::size_t child_position(NodeId a) const;

    std::vector<NodeId> ascendants(NodeId a) const;  // parent first
    std::vector<NodeId> descendants(NodeId a) const;
    std::vector<NodeId> siblings(NodeId a) const;
    bool is_ascendant(NodeId anc, NodeId a) const;
    std::vector<NodeId> by_decreasing_level() const;
    std::vector<NodeId> leaves() const;
    std::vector<NodeId> interior_nodes() const;
    std::optional<NodeId> find(const Subset& subset) const;
    bool contains(const Subset& subset) const { return find(subset).has_value(); }
    std::size_t depth() const;
    std::size_t arity() const;

    // Sorted list of node subsets; equal for trees with the same partitions.
    std::vector<Subset> subsets() const;
    bool same_subsets(const DimensionTree& other) const { return subsets() == other.subsets(); }

    // Canonical form: slots ordered lexicographically by subset, children sorted.
    // old_to_new maps each slot of *this to its canonical slot.
    DimensionTree canonical(std::vector<NodeId>* old_to_new = nullptr) const;

    // Throws std::logic_error naming the first broken invariant.
    void validate() const;

    // Swaps two disjoint subtrees in place of each other (slots are kept).
    void swap_subtrees(NodeId nu, NodeId mu);

    bool operator==(const DimensionTree&) const = default;

private:
    struct Node {
        Subset dims;
        NodeId parent = no_node;
        std::vector<NodeId> children;
        std::size_t level = 0;
        bool operator==(const Node&) const = default;
    };

    const Node& node(NodeId a) const;
    void refresh();  // recompute subsets, levels, leaf map from the structure

    std::vector<Node> nodes_;
    NodeId root_ = no_node;
    std::vector<NodeId> leaf_of_;
};

std::string format_subset(const Subset& s);  // 1-based, e.g. {1,3,4}

struct NodeRelations {
    NodeId parent = no_node;
    std::vector<NodeId> children;
    std::vector<NodeId> ascendants;
    std::vector<NodeId> descendants;
    std::size_t level = 0;
    Subset leaves_below;
};
NodeRelations node_relations(const DimensionTree& tree, NodeId a);

struct Admissibility {
    bool admissible = true;
    std::string violation;
};
Admissibility is_admissible(const DimensionTree& tree, const RankMap& ranks,
                            std::span<const std::size_t> leaf_dims);

// Largest ranks not above the given ones that are admissible. A network
// truncated to them represents the same tensor: its own ranks obey the same bounds.
RankMap admissible_hull(const DimensionTree& tree, RankMap ranks, std::span<const std::size_t> leaf_dims);

struct PermutationMove {
    NodeId nu = no_node;
    NodeId mu = no_node;
    bool operator==(const PermutationMove&) const = default;
};

struct MoveGeometry {
    NodeId gamma = no_node;
    std::vector<NodeId> affected;  // ascendants strictly below gamma, by decreasing level
    std::vector<NodeId> boundary;  // nodes whose ranks index the merged tensor besides gamma
    bool noop = false;             // nu and mu are siblings
};

MoveGeometry move_geometry(const DimensionTree& tree, PermutationMove move);
DimensionTree permute_topology(const DimensionTree& tree, PermutationMove move);

// Size of the merged tensor built when applying the move: r_gamma * prod boundary ranks.
double move_cost(const DimensionTree& tree, const RankMap& ranks, PermutationMove move);

struct ProposalParams {
    double gamma1 = 2.0;
    double gamma2 = 2.0;
    double gamma3 = 2.0;
    std::size_t max_moves = 0;  // 0 means d
    std::size_t max_retries = 100;
};

std::size_t draw_move_count(Rng& rng, const ProposalParams& params, std::size_t d);
// Draws one move; siblings of nu are never proposed for mu.
PermutationMove draw_move(const DimensionTree& tree, const RankMap& ranks, Rng& rng,
                          const ProposalParams& params);
// Ranks are carried by slot while the working tree changes.
std::vector<PermutationMove> draw_move_sequence(const DimensionTree& tree, const RankMap& ranks,
                                                Rng& rng, const ProposalParams& params);

std::size_t storage_complexity(const DimensionTree& tree, const RankMap& ranks,
                               std::span<const std::size_t> leaf_dims);

}  // namespace treelearn
