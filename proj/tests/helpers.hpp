#pragma once

#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "lre/egt.hpp"
#include "lre/knn.hpp"
#include "lre/rng.hpp"
#include "lre/types.hpp"

namespace test {

/// Unique scratch directory under the build tree, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::path("lre_test_tmp") /
                (tag + "-" + std::to_string(counter.fetch_add(1)));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline lre::DescriptorSet make_set(std::uint32_t dim, lre::Role role,
                                   std::initializer_list<std::pair<const char*, std::vector<float>>> rows) {
    lre::DescriptorSet set(dim, role);
    for (const auto& [id, values] : rows) set.add(id, values);
    return set;
}

inline std::vector<float> random_unit(lre::Rng& rng, int dim) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double sq = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        sq += x * x;
    }
    const double inv = 1.0 / std::sqrt(sq);
    std::vector<float> out(v.size());
    for (std::size_t d = 0; d < v.size(); ++d) out[d] = static_cast<float>(v[d] * inv);
    return out;
}

inline bool bits_equal(float a, float b) {
    std::uint32_t ba, bb;
    std::memcpy(&ba, &a, 4);
    std::memcpy(&bb, &b, 4);
    return ba == bb;
}

/// Bit-exact equality of two descriptor sets (ids, order, dim, raw floats).
inline bool sets_bit_equal(const lre::DescriptorSet& a, const lre::DescriptorSet& b) {
    if (a.dim() != b.dim() || a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.id(i) != b.id(i)) return false;
        const auto ra = a.row(i);
        const auto rb = b.row(i);
        for (std::uint32_t d = 0; d < a.dim(); ++d) {
            if (!bits_equal(ra[d], rb[d])) return false;
        }
    }
    return true;
}

inline bool graphs_equal(const lre::KnnGraph& a, const lre::KnnGraph& b) {
    if (a.ids != b.ids) return false;
    if (a.edges.size() != b.edges.size()) return false;
    for (std::size_t v = 0; v < a.edges.size(); ++v) {
        if (a.edges[v].size() != b.edges[v].size()) return false;
        for (std::size_t e = 0; e < a.edges[v].size(); ++e) {
            if (a.edges[v][e].target != b.edges[v][e].target) return false;
            if (a.edges[v][e].weight != b.edges[v][e].weight) return false;
        }
    }
    return true;
}

inline bool ranked_lists_equal(const lre::RankedList& a, const lre::RankedList& b) {
    if (a.query != b.query || a.items.size() != b.items.size() || a.pops != b.pops) return false;
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        if (a.items[i].id != b.items[i].id) return false;
        if (a.items[i].score != b.items[i].score) return false; // bitwise, both sides compute doubles
    }
    return true;
}

inline std::vector<lre::ImageId> item_ids(const lre::RankedList& list) {
    std::vector<lre::ImageId> out;
    out.reserve(list.items.size());
    for (const auto& item : list.items) out.push_back(item.id);
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Hand-assembled symmetric traversal graph for traversal tests.
/// Vertices must be supplied in canonical order (image ids asc, hubs last).
struct GraphBuilder {
    lre::TraversalGraph g;

    explicit GraphBuilder(std::initializer_list<std::pair<const char*, bool>> vertices) {
        for (const auto& [id, retrievable] : vertices) {
            g.pos.emplace(id, static_cast<std::int32_t>(g.ids.size()));
            g.ids.emplace_back(id);
            g.retrievable.push_back(retrievable ? 1 : 0);
        }
        g.adj.resize(g.ids.size());
        g.k_hint = static_cast<int>(g.ids.size());
    }

    GraphBuilder& edge(const char* u, const char* v, double w) {
        const auto ui = g.vertex(u);
        const auto vi = g.vertex(v);
        g.adj[static_cast<std::size_t>(ui)].push_back({vi, w});
        g.adj[static_cast<std::size_t>(vi)].push_back({ui, w});
        return *this;
    }
};

} // namespace test
