#include "lre/qe.hpp"

#include <atomic>
#include <cmath>

#include "lre/parallel.hpp"

namespace lre {

std::vector<float> expand_descriptor(std::span<const float> q,
                                     std::span<const WeightedNeighbor> neighbors, double alpha) {
    if (neighbors.empty()) return {q.begin(), q.end()};
    const std::size_t dim = q.size();
    std::vector<double> acc(q.begin(), q.end());
    for (const WeightedNeighbor& nb : neighbors) {
        if (nb.desc.size() != dim) {
            throw ValidationError("expand_descriptor: neighbor dimension mismatch");
        }
        const double w = std::pow(std::max(nb.similarity, 0.0), alpha);
        for (std::size_t d = 0; d < dim; ++d) acc[d] += w * nb.desc[d];
    }
    double sq = 0.0;
    for (const double v : acc) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm < 1e-12) return {q.begin(), q.end()}; // exact cancellation, keep the input
    std::vector<float> out(dim);
    for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(acc[d] / norm);
    return out;
}

QeSvResult qe_sv_pass(const KnnGraph& graph, const DescriptorSet& query,
                      const DescriptorSet& index, const LocalFeatureSet& local,
                      const QeParams& qe, const RansacParams& ransac, int k, int threads) {
    if (qe.sv_depth < 0 || qe.expand_count < 0) {
        throw ValidationError("qe: sv_depth and expand_count must be non-negative");
    }
    if (qe.expand_count > qe.sv_depth) {
        throw ValidationError("qe: expand_count must not exceed sv_depth");
    }
    QeSvResult result;
    result.query = query;
    result.index = index;

    struct Item {
        const DescriptorSet* source;
        DescriptorSet* out;
        std::size_t row;
    };
    std::vector<Item> items;
    items.reserve(query.size() + (qe.database_side ? index.size() : 0));
    for (std::size_t r = 0; r < query.size(); ++r) items.push_back({&query, &result.query, r});
    if (qe.database_side) {
        for (std::size_t r = 0; r < index.size(); ++r) items.push_back({&index, &result.index, r});
    }

    std::atomic<std::size_t> expanded_queries{0};
    std::atomic<std::size_t> expanded_index{0};

    parallel_chunks(items.size(), threads, [&](std::size_t begin, std::size_t end) {
        std::vector<ImageId> candidates;
        std::vector<double> similarities;
        for (std::size_t it = begin; it < end; ++it) {
            const Item& item = items[it];
            const ImageId& id = item.source->id(item.row);
            const std::int32_t v = graph.vertex(id);
            if (v < 0) throw ValidationError("qe: image \"" + id + "\" missing from graph");
            candidates.clear();
            similarities.clear();
            for (const KnnEdge& e : graph.edges[static_cast<std::size_t>(v)]) {
                if (static_cast<int>(candidates.size()) >= qe.sv_depth) break;
                const std::size_t t = static_cast<std::size_t>(e.target);
                if (graph.roles[t] != Role::Index) continue;
                if (graph.ids[t] == id) continue;
                candidates.push_back(graph.ids[t]);
                similarities.push_back(e.weight);
            }
            if (candidates.empty() || qe.expand_count == 0) continue;
            const auto reranked = sv_rerank(id, candidates, local, ransac);
            std::vector<WeightedNeighbor> selected;
            for (const RerankedCandidate& cand : reranked) {
                if (static_cast<int>(selected.size()) >= qe.expand_count) break;
                if (!cand.verified) continue;
                const auto row = index.find(cand.id);
                if (!row) throw ValidationError("qe: candidate \"" + cand.id + "\" missing from index set");
                // similarity = original graph edge weight for this pair
                double sim = 0.0;
                for (std::size_t c = 0; c < candidates.size(); ++c) {
                    if (candidates[c] == cand.id) {
                        sim = similarities[c];
                        break;
                    }
                }
                selected.push_back({index.row(*row), sim});
            }
            if (selected.empty()) continue;
            const auto expanded = expand_descriptor(item.source->row(item.row), selected, qe.alpha);
            auto dst = item.out->mutable_row(item.row);
            std::copy(expanded.begin(), expanded.end(), dst.begin());
            if (item.source == &query) {
                expanded_queries.fetch_add(1, std::memory_order_relaxed);
            } else {
                expanded_index.fetch_add(1, std::memory_order_relaxed);
            }
        }
    });

    result.expanded_queries = expanded_queries.load();
    result.expanded_index = expanded_index.load();
    result.refined = build_retrieval_graph(result.query, result.index, k, threads);
    return result;
}

} // namespace lre
