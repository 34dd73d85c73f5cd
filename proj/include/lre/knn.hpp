#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lre/types.hpp"

namespace lre {

struct KnnEdge {
    std::int32_t target = -1; // vertex index
    double weight = 0.0;      // inner-product similarity, clamped to [-1, 1]
};

/// Directed k-nearest-neighbor similarity graph. Vertices are kept sorted by
/// id and edge lists sorted by (weight desc, target id asc), so identical
/// inputs produce identical graphs regardless of record order or thread
/// count. Role is Index for target-side vertices, Query otherwise.
struct KnnGraph {
    int k = 0;
    std::vector<ImageId> ids;                // vertex index -> id, ascending
    std::vector<Role> roles;                 // parallel to ids
    std::vector<std::vector<KnnEdge>> edges; // per source vertex
    std::unordered_map<ImageId, std::int32_t> pos;

    std::size_t vertex_count() const { return ids.size(); }

    std::int32_t vertex(const ImageId& id) const {
        auto it = pos.find(id);
        return it == pos.end() ? -1 : it->second;
    }
};

/// Per-id concatenation of a's then b's descriptor, renormalized.
/// Both sets must cover exactly the same ids.
DescriptorSet blend(const DescriptorSet& a, const DescriptorSet& b);

/// Exact top-k inner-product search of every source against all targets.
/// A target sharing the source's id is excluded (no self-edges); ties on
/// equal similarity break by ascending target id.
KnnGraph knn_build(const DescriptorSet& targets, const DescriptorSet& sources, int k,
                   int threads = 0);

/// Pipeline graph: sources = query ∪ index, targets = index. Query and index
/// ids must be disjoint. Not symmetrized.
KnnGraph build_retrieval_graph(const DescriptorSet& query, const DescriptorSet& index, int k,
                               int threads = 0);

/// Mirror every edge; duplicate (source, target) pairs keep the max weight.
/// Per-vertex edge counts may exceed k afterwards.
KnnGraph symmetrize(const KnnGraph& g);

/// CSV persistence: header "source,target,weight", weights with 6 decimals.
void save_graph_csv(const KnnGraph& g, const std::string& path);
KnnGraph load_graph_csv(const std::string& path);

/// Re-tags vertex roles from the sets the graph was built over. Every vertex
/// must belong to one of them; index membership wins.
void assign_roles(KnnGraph& g, const DescriptorSet& query, const DescriptorSet& index);

} // namespace lre
