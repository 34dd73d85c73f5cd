#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lre/knn.hpp"
#include "lre/types.hpp"

namespace lre {

/// Sentinel edge weight for label-graph and anchor edges. Strictly above any
/// inner product of unit vectors, so these edges take traversal precedence.
constexpr double kMaxWeight = 2.0;

struct EgtParams {
    double t = 0.0;           // trust threshold on traversed edge weights
    int p = 100;              // result budget
    std::size_t max_steps = 0; // safety cap on queue pops; 0 -> 10 * p * k
};

struct RankedItem {
    ImageId id;
    double score;
};

/// Retrieval result of one traversal. Items appear in emission order with a
/// strictly decreasing rank score that encodes (pop epoch asc, trust key).
struct RankedList {
    ImageId query;
    std::vector<RankedItem> items;
    std::size_t pops = 0;
    bool step_capped = false;
};

/// Serialization of the (epoch, key) emission pair into one strictly
/// decreasing score: epochs grow by at least 1 between emissions while the
/// key term spans less than 1.
inline double egt_rank_score(std::size_t epoch, double key) {
    return -static_cast<double>(epoch) + key * 0.25;
}

/// Vertex-indexed symmetric weighted graph prepared for traversal. Vertices
/// are ordered image ids ascending, then hub ids ascending; this order is
/// also the tie order for equal-priority pops.
struct TraversalGraph {
    std::vector<std::string> ids;
    std::vector<char> retrievable;           // true exactly for index-role vertices
    std::vector<std::vector<KnnEdge>> adj;   // symmetric
    std::unordered_map<std::string, std::int32_t> pos;
    int k_hint = 0;

    std::size_t size() const { return ids.size(); }

    std::int32_t vertex(const std::string& id) const {
        auto it = pos.find(id);
        return it == pos.end() ? -1 : it->second;
    }
};

/// Adapts a symmetrized KnnGraph for traversal; retrievable = index role.
TraversalGraph make_traversal_graph(const KnnGraph& symmetric);

/// Explore/exploit traversal. Starting from the trusted query, the explore
/// step pushes neighbors of trusted vertices into a max-priority queue keyed
/// by the best edge weight from the trusted set; the exploit step pops the
/// top vertex, trusts it when its key reaches t (emitting it if retrievable
/// and exploring its neighbors), and otherwise emits it without exploration
/// so the result budget can still fill. Ties pop the smaller vertex id.
RankedList egt_traverse(const TraversalGraph& g, const ImageId& q, const EgtParams& params);

/// Star sub-graphs C_l: one synthetic hub per label, spokes at kMaxWeight to
/// every train image carrying that label.
struct LabelGraph {
    std::map<std::int64_t, std::vector<ImageId>> members; // label -> ids ascending

    static std::string hub_id(std::int64_t label) { return "#label:" + std::to_string(label); }
    bool empty() const { return members.empty(); }
    std::size_t hub_count() const { return members.size(); }
};

LabelGraph build_label_graph(const LabelTable& labels);

struct LabelAssignment {
    std::int64_t label = 0;
    ImageId anchor; // most similar train image carrying the label
};

/// Majority vote over the labels of the top-3 most similar train images
/// (ties in similarity break by id). Returns nothing when no label reaches
/// two votes.
std::optional<LabelAssignment> assign_label(const ImageId& img, std::span<const float> img_desc,
                                            const DescriptorSet& train, const LabelTable& labels);

struct AugmentedGraph {
    TraversalGraph graph;
    std::size_t anchor_count = 0;
};

/// Attaches the label graph to a symmetrized base graph and adds a
/// kMaxWeight anchor edge for every query and index vertex whose label
/// assignment succeeds. Train images and hubs become traversable but are
/// never retrievable. Descriptors are looked up by vertex role.
AugmentedGraph augment(const KnnGraph& base, const LabelGraph& lg, const DescriptorSet& train,
                       const LabelTable& labels, const DescriptorSet& query_desc,
                       const DescriptorSet& index_desc, int threads = 0);

/// EGT on the augmented graph; train images and hubs are skipped during
/// retrieval because they are not part of the index set.
RankedList semisup_egt(const AugmentedGraph& aug, const ImageId& q, const EgtParams& params);

} // namespace lre
