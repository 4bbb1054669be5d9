#include <algorithm>
#include <json.hpp>

#include "treelearn/tree_network.hpp"

namespace treelearn {

namespace {
constexpr const char* network_format = "treelearn-network";
constexpr int network_version = 1;
}  // namespace

// Written in canonical slot order so equal networks give equal documents.
std::string TreeTensorNetwork::serialize() const {
    std::vector<NodeId> map;
    const DimensionTree canon = tree_.canonical(&map);
    std::vector<NodeId> inverse(map.size());
    for (NodeId a = 0; a < map.size(); ++a) inverse[map[a]] = a;

    nlohmann::json doc;
    doc["format"] = network_format;
    doc["version"] = network_version;
    doc["tree"] = canon.serialize();
    auto& bases = doc["bases"] = nlohmann::json::array();
    for (const auto& b : bases_) bases.push_back({{"family", family_name(b.family)}, {"degree", b.degree}});
    auto& cores = doc["cores"] = nlohmann::json::array();
    auto& flags = doc["orthonormal"] = nlohmann::json::array();
    for (NodeId k = 0; k < canon.size(); ++k) {
        const NodeId a = inverse[k];
        FullTensor c = cores_[a];
        if (!tree_.is_leaf(a)) {
            const auto& old_children = tree_.children(a);
            std::vector<std::size_t> perm;
            for (auto nc : canon.children(k)) {
                const auto it = std::find_if(old_children.begin(), old_children.end(),
                                             [&](NodeId oc) { return map[oc] == nc; });
                perm.push_back(static_cast<std::size_t>(it - old_children.begin()));
            }
            perm.push_back(old_children.size());
            c = permute_modes(c, perm);
        }
        cores.push_back({{"shape", c.shape()}, {"data", c.data()}});
        flags.push_back(orthonormal_[a] != 0);
    }
    doc["orth_state"] = orth_state_name(state_);
    if (state_ == OrthState::node) doc["orth_node"] = format_subset(tree_.dims(center_));
    return doc.dump(1) + "\n";
}

TreeTensorNetwork TreeTensorNetwork::parse(const std::string& text) {
    const auto doc = nlohmann::json::parse(text);
    if (doc.value("format", "") != network_format) throw std::invalid_argument("not a network document");
    if (doc.value("version", 0) != network_version) throw std::invalid_argument("unsupported network version");
    auto tree = DimensionTree::parse(doc.at("tree").get<std::string>());
    std::vector<FeatureBasis> bases;
    for (const auto& b : doc.at("bases"))
        bases.push_back({parse_family(b.at("family").get<std::string>()), b.at("degree").get<std::size_t>()});
    std::vector<FullTensor> cores;
    for (const auto& c : doc.at("cores"))
        cores.emplace_back(c.at("shape").get<std::vector<std::size_t>>(), c.at("data").get<std::vector<double>>());
    TreeTensorNetwork net(std::move(tree), std::move(bases), std::move(cores));
    const auto flags = doc.at("orthonormal").get<std::vector<bool>>();
    if (flags.size() != net.tree().size()) throw std::invalid_argument("orthonormal flags missing");
    for (NodeId a = 0; a < flags.size(); ++a) net.mark_orthonormal(a, flags[a]);
    const auto state = doc.at("orth_state").get<std::string>();
    if (state == "all") {
        net.set_orth_state(OrthState::all);
    } else if (state == "node") {
        const auto label = doc.at("orth_node").get<std::string>();
        NodeId center = no_node;
        for (NodeId a = 0; a < net.tree().size(); ++a)
            if (format_subset(net.tree().dims(a)) == label) center = a;
        if (center == no_node) throw std::invalid_argument("unknown orthogonality center " + label);
        net.set_orth_state(OrthState::node, center);
    } else if (state != "none") {
        throw std::invalid_argument("unknown orth_state " + state);
    }
    return net;
}

}  // namespace treelearn
