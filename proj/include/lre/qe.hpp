#pragma once

#include <span>
#include <vector>

#include "lre/knn.hpp"
#include "lre/sv.hpp"
#include "lre/types.hpp"

namespace lre {

struct QeParams {
    int sv_depth = 10;        // candidates passed to spatial verification
    int expand_count = 2;     // verified neighbors folded into the descriptor
    double alpha = 0.0;       // neighbor weight = max(similarity, 0)^alpha
    bool database_side = true;
};

struct WeightedNeighbor {
    std::span<const float> desc;
    double similarity = 0.0;
};

/// L2-normalize(q + sum_i max(sim_i, 0)^alpha * d_i). An empty neighbor list
/// returns q unchanged.
std::vector<float> expand_descriptor(std::span<const float> q,
                                     std::span<const WeightedNeighbor> neighbors, double alpha);

struct QeSvResult {
    DescriptorSet query;
    DescriptorSet index;
    KnnGraph refined;
    std::size_t expanded_queries = 0;
    std::size_t expanded_index = 0;
};

/// One pass of spatially-verified query expansion. Every query (and, when
/// database_side is set, every index image issued as a query over the
/// remaining index) takes its top sv_depth index neighbors from the graph,
/// re-ranks them by RANSAC inliers, and averages in the expand_count most
/// reliable verified ones. Expansion reads only original descriptors, so the
/// result is independent of processing order. The graph is then rebuilt with
/// the expanded index images as both sources and targets.
QeSvResult qe_sv_pass(const KnnGraph& graph, const DescriptorSet& query,
                      const DescriptorSet& index, const LocalFeatureSet& local,
                      const QeParams& qe, const RansacParams& ransac, int k, int threads = 0);

} // namespace lre
