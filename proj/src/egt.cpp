#include "lre/egt.hpp"

#include <algorithm>
#include <limits>
#include <queue>

#include "lre/parallel.hpp"

namespace lre {

namespace {

std::size_t resolve_max_steps(const EgtParams& params, int k_hint) {
    if (params.max_steps > 0) return params.max_steps;
    return 10ULL * static_cast<std::size_t>(params.p) * static_cast<std::size_t>(std::max(1, k_hint));
}

void sort_adjacency(std::vector<std::vector<KnnEdge>>& adj) {
    for (auto& list : adj) {
        // merge duplicate targets keeping the max weight
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
}

} // namespace

TraversalGraph make_traversal_graph(const KnnGraph& symmetric) {
    TraversalGraph g;
    g.ids = symmetric.ids;
    g.pos = symmetric.pos;
    g.k_hint = symmetric.k;
    g.retrievable.resize(g.ids.size());
    for (std::size_t v = 0; v < g.ids.size(); ++v) {
        g.retrievable[v] = symmetric.roles[v] == Role::Index ? 1 : 0;
    }
    g.adj = symmetric.edges;
    return g;
}

RankedList egt_traverse(const TraversalGraph& g, const ImageId& q, const EgtParams& params) {
    if (params.p <= 0) throw ValidationError("egt: result budget p must be positive");
    const std::int32_t qi = g.vertex(q);
    if (qi < 0) throw ValidationError("egt: query \"" + q + "\" is not a graph vertex");

    const std::size_t n = g.size();
    const std::size_t max_steps = resolve_max_steps(params, g.k_hint);
    constexpr double kNoKey = -std::numeric_limits<double>::infinity();

    std::vector<double> key(n, kNoKey);
    std::vector<char> trusted(n, 0), emitted(n, 0), queued(n, 0);

    using Entry = std::pair<double, std::int32_t>; // (key, vertex)
    auto lower_priority = [](const Entry& x, const Entry& y) {
        if (x.first != y.first) return x.first < y.first;
        return x.second > y.second; // equal keys: smaller vertex id pops first
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> heap(lower_priority);

    // Explore step: raise the key of every untrusted neighbor to the best
    // edge weight seen from the trusted set and (re)queue it.
    auto explore = [&](std::int32_t v) {
        for (const KnnEdge& e : g.adj[static_cast<std::size_t>(v)]) {
            const auto u = static_cast<std::size_t>(e.target);
            if (trusted[u]) continue;
            if (e.weight > key[u]) {
                key[u] = e.weight;
                queued[u] = 1;
                heap.push({key[u], e.target});
            } else if (!queued[u]) {
                queued[u] = 1;
                heap.push({key[u], e.target});
            }
        }
    };

    RankedList out;
    out.query = q;
    trusted[static_cast<std::size_t>(qi)] = 1;
    emitted[static_cast<std::size_t>(qi)] = 1;
    explore(qi);

    std::size_t pops = 0;
    while (static_cast<int>(out.items.size()) < params.p && !heap.empty() && pops < max_steps) {
        const auto [w, v] = heap.top();
        heap.pop();
        const auto vi = static_cast<std::size_t>(v);
        if (trusted[vi] || !queued[vi] || w != key[vi]) continue; // stale entry
        queued[vi] = 0;
        ++pops;
        if (key[vi] >= params.t) {
            trusted[vi] = 1;
            if (g.retrievable[vi] && !emitted[vi]) {
                emitted[vi] = 1;
                out.items.push_back({g.ids[vi], egt_rank_score(pops, key[vi])});
            }
            explore(v);
        } else {
            // exploit-only fallback: emit without trusting or exploring
            if (g.retrievable[vi] && !emitted[vi]) {
                emitted[vi] = 1;
                out.items.push_back({g.ids[vi], egt_rank_score(pops, key[vi])});
            }
        }
    }
    out.pops = pops;
    out.step_capped =
        pops >= max_steps && static_cast<int>(out.items.size()) < params.p && !heap.empty();
    return out;
}

LabelGraph build_label_graph(const LabelTable& labels) {
    LabelGraph lg;
    for (const ImageId& id : labels.ids()) {
        lg.members[*labels.find(id)].push_back(id);
    }
    for (auto& [label, ids] : lg.members) std::sort(ids.begin(), ids.end());
    return lg;
}

std::optional<LabelAssignment> assign_label(const ImageId& img, std::span<const float> img_desc,
                                            const DescriptorSet& train, const LabelTable& labels) {
    if (train.empty()) return std::nullopt;
    if (img_desc.size() != train.dim()) {
        throw ValidationError("assign_label: descriptor dimension mismatch for \"" + img + "\"");
    }
    struct Ranked {
        double sim;
        std::size_t row;
    };
    // top-3 by (similarity desc, id asc)
    Ranked top[3];
    std::size_t filled = 0;
    auto before = [&](const Ranked& a, const Ranked& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return train.id(a.row) < train.id(b.row);
    };
    for (std::size_t r = 0; r < train.size(); ++r) {
        const auto row = train.row(r);
        double sim = 0.0;
        for (std::size_t d = 0; d < row.size(); ++d) {
            sim += static_cast<double>(img_desc[d]) * row[d];
        }
        Ranked cand{sim, r};
        std::size_t pos = filled;
        while (pos > 0 && before(cand, top[pos - 1])) --pos;
        if (pos >= 3) continue;
        for (std::size_t s = std::min<std::size_t>(filled, 2); s > pos; --s) top[s] = top[s - 1];
        top[pos] = cand;
        if (filled < 3) ++filled;
    }
    LabelTable::Label votes[3];
    for (std::size_t i = 0; i < filled; ++i) {
        const auto label = labels.find(train.id(top[i].row));
        if (!label) {
            throw ValidationError("assign_label: train image \"" + train.id(top[i].row) +
                                  "\" has no label");
        }
        votes[i] = *label;
    }
    // majority = a label with at least two of the (up to) three votes
    std::optional<LabelTable::Label> majority;
    for (std::size_t i = 0; i < filled && !majority; ++i) {
        int count = 0;
        for (std::size_t j = 0; j < filled; ++j) {
            if (votes[j] == votes[i]) ++count;
        }
        if (count >= 2) majority = votes[i];
    }
    if (!majority) return std::nullopt;
    for (std::size_t i = 0; i < filled; ++i) {
        if (votes[i] == *majority) {
            return LabelAssignment{*majority, train.id(top[i].row)};
        }
    }
    return std::nullopt; // unreachable
}

AugmentedGraph augment(const KnnGraph& base, const LabelGraph& lg, const DescriptorSet& train,
                       const LabelTable& labels, const DescriptorSet& query_desc,
                       const DescriptorSet& index_desc, int threads) {
    const std::size_t n_base = base.ids.size();
    const bool have_labels = !lg.empty() && !train.empty();
    if (have_labels) {
        for (const ImageId& id : train.ids()) {
            if (!labels.find(id)) {
                throw ValidationError("augment: train image \"" + id + "\" has no label");
            }
            if (base.vertex(id) >= 0) {
                throw ValidationError("augment: train image \"" + id +
                                      "\" collides with a query/index vertex");
            }
        }
    }

    // label assignment for every base vertex, parallel over slots
    std::vector<std::optional<LabelAssignment>> assigned(n_base);
    if (have_labels) {
        parallel_chunks(n_base, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t v = begin; v < end; ++v) {
                const DescriptorSet& set = base.roles[v] == Role::Index ? index_desc : query_desc;
                const auto row = set.find(base.ids[v]);
                if (!row) {
                    throw ValidationError("augment: no descriptor for graph vertex \"" +
                                          base.ids[v] + "\"");
                }
                assigned[v] = assign_label(base.ids[v], set.row(*row), train, labels);
            }
        });
    }

    AugmentedGraph out;
    TraversalGraph& g = out.graph;
    g.k_hint = base.k;

    std::vector<std::string> image_ids = base.ids;
    if (have_labels) {
        for (const auto& [label, members] : lg.members) {
            image_ids.insert(image_ids.end(), members.begin(), members.end());
        }
    }
    std::sort(image_ids.begin(), image_ids.end());
    image_ids.erase(std::unique(image_ids.begin(), image_ids.end()), image_ids.end());
    g.ids = std::move(image_ids);
    for (const auto& [label, members] : lg.members) g.ids.push_back(LabelGraph::hub_id(label));
    g.pos.reserve(g.ids.size());
    for (std::size_t v = 0; v < g.ids.size(); ++v) g.pos.emplace(g.ids[v], static_cast<std::int32_t>(v));

    g.retrievable.assign(g.ids.size(), 0);
    for (std::size_t v = 0; v < n_base; ++v) {
        if (base.roles[v] == Role::Index) {
            g.retrievable[static_cast<std::size_t>(g.vertex(base.ids[v]))] = 1;
        }
    }

    g.adj.assign(g.ids.size(), {});
    auto add_undirected = [&](std::int32_t u, std::int32_t v, double w) {
        g.adj[static_cast<std::size_t>(u)].push_back({v, w});
        g.adj[static_cast<std::size_t>(v)].push_back({u, w});
    };
    for (std::size_t v = 0; v < n_base; ++v) {
        const std::int32_t nv = g.vertex(base.ids[v]);
        for (const KnnEdge& e : base.edges[v]) {
            const std::int32_t nt = g.vertex(base.ids[static_cast<std::size_t>(e.target)]);
            g.adj[static_cast<std::size_t>(nv)].push_back({nt, e.weight});
        }
    }
    if (have_labels) {
        for (const auto& [label, members] : lg.members) {
            const std::int32_t hub = g.vertex(LabelGraph::hub_id(label));
            for (const ImageId& id : members) add_undirected(g.vertex(id), hub, kMaxWeight);
        }
        for (std::size_t v = 0; v < n_base; ++v) {
            if (!assigned[v]) continue;
            add_undirected(g.vertex(base.ids[v]), g.vertex(assigned[v]->anchor), kMaxWeight);
            ++out.anchor_count;
        }
    }
    sort_adjacency(g.adj);
    return out;
}

RankedList semisup_egt(const AugmentedGraph& aug, const ImageId& q, const EgtParams& params) {
    return egt_traverse(aug.graph, q, params);
}

} // namespace lre
