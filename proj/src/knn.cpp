#include "lre/knn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "lre/parallel.hpp"

namespace lre {

namespace {

constexpr std::size_t kSourceTile = 16;  // sources scored together per pass
constexpr std::size_t kTargetBlock = 256; // target rows per cache-friendly block

double clamp_similarity(double v) { return std::min(1.0, std::max(-1.0, v)); }

// Top-k of one scored source row. Ties break by target id so the graph does
// not depend on target record order.
void select_top_k(const double* scores, std::size_t n, const DescriptorSet& targets,
                  std::size_t self, int k, std::vector<std::uint32_t>& scratch,
                  std::vector<std::pair<ImageId, double>>& out) {
    scratch.clear();
    scratch.reserve(n);
    for (std::uint32_t t = 0; t < n; ++t) {
        if (t != self) scratch.push_back(t);
    }
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), scratch.size());
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return targets.id(a) < targets.id(b);
    };
    if (kk < scratch.size()) {
        std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(kk),
                         scratch.end(), better);
        scratch.resize(kk);
    }
    std::sort(scratch.begin(), scratch.end(), better);
    out.clear();
    out.reserve(kk);
    for (const std::uint32_t t : scratch) out.emplace_back(targets.id(t), scores[t]);
}

// Scores one tile of sources against all targets (fixed accumulation order,
// so results are bit-identical for any tiling or thread count).
void score_tile(const DescriptorSet& targets, const float* src_rows, std::size_t tile_size,
                std::uint32_t dim, std::vector<double>& scores) {
    const std::size_t n_targets = targets.size();
    std::fill(scores.begin(), scores.end(), 0.0);
    for (std::size_t tb = 0; tb < n_targets; tb += kTargetBlock) {
        const std::size_t te = std::min(n_targets, tb + kTargetBlock);
        for (std::size_t s = 0; s < tile_size; ++s) {
            const float* src = src_rows + s * dim;
            double* srow = scores.data() + s * n_targets;
            for (std::size_t t = tb; t < te; ++t) {
                const float* tgt = targets.row(t).data();
                double acc = 0.0;
                for (std::uint32_t d = 0; d < dim; ++d) {
                    acc += static_cast<double>(src[d]) * static_cast<double>(tgt[d]);
                }
                srow[t] = clamp_similarity(acc);
            }
        }
    }
}

// Shared kernel: neighbor lists for every row of every source set.
std::vector<std::vector<std::pair<ImageId, double>>> top_k_lists(
    const DescriptorSet& targets, const std::vector<const DescriptorSet*>& source_sets, int k,
    int threads) {
    if (k < 1) throw ValidationError("knn: k must be >= 1");
    std::vector<std::pair<const DescriptorSet*, std::size_t>> rows; // (set, row)
    for (const DescriptorSet* set : source_sets) {
        if (set->dim() != targets.dim()) {
            throw ValidationError("knn: dimension mismatch, sources " + std::to_string(set->dim()) +
                                  " vs targets " + std::to_string(targets.dim()));
        }
        for (std::size_t r = 0; r < set->size(); ++r) rows.emplace_back(set, r);
    }
    std::vector<std::vector<std::pair<ImageId, double>>> result(rows.size());
    const std::size_t n_tiles = (rows.size() + kSourceTile - 1) / kSourceTile;
    const std::uint32_t dim = targets.dim();
    parallel_chunks(n_tiles, threads, [&](std::size_t tile_begin, std::size_t tile_end) {
        std::vector<float> src_rows(kSourceTile * dim);
        std::vector<double> scores(kSourceTile * targets.size());
        std::vector<std::uint32_t> scratch;
        for (std::size_t t = tile_begin; t < tile_end; ++t) {
            const std::size_t begin = t * kSourceTile;
            const std::size_t end = std::min(rows.size(), begin + kSourceTile);
            const std::size_t tile_size = end - begin;
            for (std::size_t s = 0; s < tile_size; ++s) {
                const auto row = rows[begin + s].first->row(rows[begin + s].second);
                std::copy(row.begin(), row.end(), src_rows.begin() + static_cast<std::ptrdiff_t>(s * dim));
            }
            score_tile(targets, src_rows.data(), tile_size, dim, scores);
            for (std::size_t s = 0; s < tile_size; ++s) {
                const ImageId& source_id = rows[begin + s].first->id(rows[begin + s].second);
                const auto self = targets.find(source_id);
                select_top_k(scores.data() + s * targets.size(), targets.size(), targets,
                             self.value_or(targets.size()), k, scratch, result[begin + s]);
            }
        }
    });
    return result;
}

KnnGraph assemble_graph(const DescriptorSet& targets,
                        const std::vector<const DescriptorSet*>& source_sets,
                        const std::vector<std::vector<std::pair<ImageId, double>>>& lists, int k) {
    KnnGraph g;
    g.k = k;
    for (const DescriptorSet* set : source_sets) {
        for (const ImageId& id : set->ids()) g.ids.push_back(id);
    }
    for (const ImageId& id : targets.ids()) g.ids.push_back(id);
    std::sort(g.ids.begin(), g.ids.end());
    g.ids.erase(std::unique(g.ids.begin(), g.ids.end()), g.ids.end());
    g.pos.reserve(g.ids.size());
    for (std::size_t i = 0; i < g.ids.size(); ++i) {
        g.pos.emplace(g.ids[i], static_cast<std::int32_t>(i));
    }
    g.roles.assign(g.ids.size(), Role::Query);
    for (const ImageId& id : targets.ids()) g.roles[static_cast<std::size_t>(g.vertex(id))] = Role::Index;
    g.edges.assign(g.ids.size(), {});
    std::size_t row = 0;
    for (const DescriptorSet* set : source_sets) {
        for (std::size_t r = 0; r < set->size(); ++r, ++row) {
            auto& out = g.edges[static_cast<std::size_t>(g.vertex(set->id(r)))];
            out.reserve(lists[row].size());
            for (const auto& [tid, w] : lists[row]) {
                out.push_back({g.vertex(tid), w});
            }
        }
    }
    return g;
}

} // namespace

DescriptorSet blend(const DescriptorSet& a, const DescriptorSet& b) {
    if (a.size() != b.size()) {
        throw ValidationError("blend: sets cover different id counts (" + std::to_string(a.size()) +
                              " vs " + std::to_string(b.size()) + ")");
    }
    DescriptorSet out(a.dim() + b.dim(), a.role());
    std::vector<float> row(out.dim());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const ImageId& id = a.id(i);
        const auto bj = b.find(id);
        if (!bj) throw ValidationError("blend: id \"" + id + "\" present in first set only");
        const auto ra = a.row(i);
        const auto rb = b.row(*bj);
        double sq = 0.0;
        for (std::size_t d = 0; d < ra.size(); ++d) sq += static_cast<double>(ra[d]) * ra[d];
        for (std::size_t d = 0; d < rb.size(); ++d) sq += static_cast<double>(rb[d]) * rb[d];
        const double norm = std::sqrt(sq);
        if (norm < 1e-12) {
            throw ValidationError("blend: zero-norm concatenation for \"" + id + "\"");
        }
        for (std::size_t d = 0; d < ra.size(); ++d) row[d] = static_cast<float>(ra[d] / norm);
        for (std::size_t d = 0; d < rb.size(); ++d) {
            row[ra.size() + d] = static_cast<float>(rb[d] / norm);
        }
        out.add(id, row);
    }
    return out;
}

KnnGraph knn_build(const DescriptorSet& targets, const DescriptorSet& sources, int k, int threads) {
    const std::vector<const DescriptorSet*> source_sets{&sources};
    const auto lists = top_k_lists(targets, source_sets, k, threads);
    return assemble_graph(targets, source_sets, lists, k);
}

KnnGraph build_retrieval_graph(const DescriptorSet& query, const DescriptorSet& index, int k,
                               int threads) {
    for (const ImageId& id : query.ids()) {
        if (index.contains(id)) {
            throw ValidationError("retrieval graph: id \"" + id + "\" present in both query and index sets");
        }
    }
    const std::vector<const DescriptorSet*> source_sets{&query, &index};
    const auto lists = top_k_lists(index, source_sets, k, threads);
    return assemble_graph(index, source_sets, lists, k);
}

KnnGraph symmetrize(const KnnGraph& g) {
    KnnGraph out;
    out.k = g.k;
    out.ids = g.ids;
    out.roles = g.roles;
    out.pos = g.pos;
    const std::size_t n = g.ids.size();
    std::vector<std::vector<KnnEdge>> adj(n);
    std::vector<std::size_t> degree(n, 0);
    for (std::size_t u = 0; u < n; ++u) {
        degree[u] += g.edges[u].size();
        for (const KnnEdge& e : g.edges[u]) ++degree[static_cast<std::size_t>(e.target)];
    }
    for (std::size_t u = 0; u < n; ++u) adj[u].reserve(degree[u]);
    for (std::size_t u = 0; u < n; ++u) {
        for (const KnnEdge& e : g.edges[u]) {
            adj[u].push_back(e);
            adj[static_cast<std::size_t>(e.target)].push_back({static_cast<std::int32_t>(u), e.weight});
        }
    }
    for (std::size_t u = 0; u < n; ++u) {
        auto& list = adj[u];
        // merge duplicates keeping the max weight, then order for retrieval
        std::sort(list.begin(), list.end(), [](const KnnEdge& a, const KnnEdge& b) {
            if (a.target != b.target) return a.target < b.target;
            return a.weight > b.weight;
        });
        list.erase(std::unique(list.begin(), list.end(),
                               [](const KnnEdge& a, const KnnEdge& b) { return a.target == b.target; }),
                   list.end());
        std::sort(list.begin(), list.end(), [](const KnnEdge& a, const KnnEdge& b) {
            if (a.weight != b.weight) return a.weight > b.weight;
            return a.target < b.target;
        });
    }
    out.edges = std::move(adj);
    return out;
}

void save_graph_csv(const KnnGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "source,target,weight\n";
    char buf[32];
    for (std::size_t u = 0; u < g.ids.size(); ++u) {
        for (const KnnEdge& e : g.edges[u]) {
            std::snprintf(buf, sizeof(buf), "%.6f", e.weight);
            out << g.ids[u] << ',' << g.ids[static_cast<std::size_t>(e.target)] << ',' << buf << '\n';
        }
    }
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

KnnGraph load_graph_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) -> void {
        throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
    };
    if (!std::getline(in, line)) fail("missing header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "source,target,weight") fail("expected header \"source,target,weight\"");
    struct Row {
        ImageId source, target;
        double weight;
    };
    std::vector<Row> raw;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) fail("empty row");
        const std::size_t c1 = line.find(',');
        const std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos) fail("expected \"source,target,weight\"");
        Row row;
        row.source = line.substr(0, c1);
        row.target = line.substr(c1 + 1, c2 - c1 - 1);
        require_valid_image_id(row.source);
        require_valid_image_id(row.target);
        const char* first = line.data() + c2 + 1;
        const char* last = line.data() + line.size();
        const auto [ptr, ec] = std::from_chars(first, last, row.weight);
        if (ec != std::errc() || ptr != last) fail("malformed weight");
        if (row.weight < -1.0 - 1e-6 || row.weight > 1.0 + 1e-6) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": weight outside [-1, 1]: " + std::to_string(row.weight));
        }
        if (row.source == row.target) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": self-edge on \"" +
                                  row.source + "\"");
        }
        raw.push_back(std::move(row));
    }
    KnnGraph g;
    for (const Row& r : raw) {
        g.ids.push_back(r.source);
        g.ids.push_back(r.target);
    }
    std::sort(g.ids.begin(), g.ids.end());
    g.ids.erase(std::unique(g.ids.begin(), g.ids.end()), g.ids.end());
    for (std::size_t i = 0; i < g.ids.size(); ++i) g.pos.emplace(g.ids[i], static_cast<std::int32_t>(i));
    g.roles.assign(g.ids.size(), Role::Query);
    g.edges.assign(g.ids.size(), {});
    for (const Row& r : raw) {
        g.edges[static_cast<std::size_t>(g.vertex(r.source))].push_back({g.vertex(r.target), r.weight});
    }
    std::size_t max_degree = 0;
    for (auto& list : g.edges) {
        std::sort(list.begin(), list.end(), [](const KnnEdge& a, const KnnEdge& b) {
            if (a.target != b.target) return a.target < b.target;
            return a.weight > b.weight;
        });
        list.erase(std::unique(list.begin(), list.end(),
                               [](const KnnEdge& a, const KnnEdge& b) { return a.target == b.target; }),
                   list.end());
        std::sort(list.begin(), list.end(), [](const KnnEdge& a, const KnnEdge& b) {
            if (a.weight != b.weight) return a.weight > b.weight;
            return a.target < b.target;
        });
        max_degree = std::max(max_degree, list.size());
    }
    g.k = static_cast<int>(max_degree);
    return g;
}

void assign_roles(KnnGraph& g, const DescriptorSet& query, const DescriptorSet& index) {
    for (std::size_t v = 0; v < g.ids.size(); ++v) {
        if (index.contains(g.ids[v])) {
            g.roles[v] = Role::Index;
        } else if (query.contains(g.ids[v])) {
            g.roles[v] = Role::Query;
        } else {
            throw ValidationError("graph vertex \"" + g.ids[v] +
                                  "\" not found in query or index descriptor sets");
        }
    }
}

} // namespace lre
