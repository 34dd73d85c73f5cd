// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit status is the number of failures.
//
//  1  traversal equals the naive rescan reference on a small-graph family
//  2  semisup_egt with an empty label graph reduces bitwise to egt_traverse
//  3  the bridging mini-graph retrieves both far images only under semisup
//  4  ablation ordering and gap on the seed-42 synthetic dataset
//  5  RANSAC recovery under 40% outliers across 100 seeds
//  6  mAP hand cases and oracle agreement on 1000 random rankings
//  7  thread-count determinism of the full pipeline (byte-identical files)
//  8  throughput and memory sanity at 1k x 20k scale

#include <sys/resource.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ap_reference.hpp"
#include "egt_reference.hpp"
#include "mini_scene.hpp"
#include "planted.hpp"

#include "lre/parallel.hpp"
#include "lre/pipeline.hpp"
#include "lre/rng.hpp"

using namespace lre;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool lists_equal(const RankedList& a, const RankedList& b) {
    if (a.items.size() != b.items.size() || a.pops != b.pops) return false;
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        if (a.items[i].id != b.items[i].id || a.items[i].score != b.items[i].score) return false;
    }
    return true;
}

std::vector<float> random_unit(Rng& rng, int dim) {
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

// ---------------------------------------------------------------- criterion 1

// Weighted graph on n vertices from an edge-subset mask; edge weights cycle
// through {0.1, ..., 0.9} in a mask- and rotation-dependent pattern.
TraversalGraph family_graph(int n, std::uint32_t mask, int rotation, int retrievability) {
    TraversalGraph g;
    for (int v = 0; v < n; ++v) {
        g.pos.emplace("v" + std::to_string(v), v);
        g.ids.push_back("v" + std::to_string(v));
        const bool r = retrievability == 0 || (v + static_cast<int>(mask)) % 3 != 0;
        g.retrievable.push_back(r ? 1 : 0);
    }
    g.adj.resize(static_cast<std::size_t>(n));
    g.k_hint = n;
    int pair_index = 0;
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v, ++pair_index) {
            if ((mask >> pair_index) & 1u) {
                const int step = (pair_index * 7 + rotation * 5 + static_cast<int>(mask & 63u)) % 9;
                const double w = (1 + step) / 10.0;
                g.adj[static_cast<std::size_t>(u)].push_back({v, w});
                g.adj[static_cast<std::size_t>(v)].push_back({u, w});
            }
        }
    }
    return g;
}

std::string criterion_1() {
    const auto start = Clock::now();
    std::atomic<std::uint64_t> mismatches{0};
    std::atomic<std::uint64_t> comparisons{0};

    auto sweep_graph = [&](const TraversalGraph& g, int n) {
        std::uint64_t local_bad = 0, local_cmp = 0;
        for (int q = 0; q < n; ++q) {
            for (int ti = 0; ti < 10; ++ti) {
                EgtParams params;
                params.t = 0.05 + 0.1 * ti;
                for (int p = 1; p <= 7; ++p) {
                    if (p > n && p != 7) continue;
                    params.p = p;
                    const auto got = egt_traverse(g, g.ids[static_cast<std::size_t>(q)], params);
                    const auto want =
                        test::egt_reference(g, g.ids[static_cast<std::size_t>(q)], params);
                    ++local_cmp;
                    if (!lists_equal(got, want)) ++local_bad;
                }
            }
        }
        mismatches.fetch_add(local_bad, std::memory_order_relaxed);
        comparisons.fetch_add(local_cmp, std::memory_order_relaxed);
    };

    // exhaustive edge subsets for n <= 5, 2 weight rotations, 2 retrievability patterns
    for (int n = 2; n <= 5; ++n) {
        const std::uint32_t masks = 1u << (n * (n - 1) / 2);
        parallel_chunks(masks, 0, [&](std::size_t begin, std::size_t end) {
            for (std::size_t mask = begin; mask < end; ++mask) {
                for (int rot = 0; rot < 2; ++rot) {
                    for (int retr = 0; retr < 2; ++retr) {
                        sweep_graph(family_graph(n, static_cast<std::uint32_t>(mask), rot, retr), n);
                    }
                }
            }
        });
    }
    // deterministic samples of the larger spaces
    for (const auto& [n, samples] : std::vector<std::pair<int, int>>{{6, 3000}, {7, 1500}}) {
        const int bits = n * (n - 1) / 2;
        parallel_chunks(static_cast<std::size_t>(samples), 0, [&](std::size_t begin, std::size_t end) {
            for (std::size_t s = begin; s < end; ++s) {
                Rng rng(0x5eed0000ULL + static_cast<std::uint64_t>(n) * 100000 + s);
                const auto mask = static_cast<std::uint32_t>(rng.below(1ULL << bits));
                for (int retr = 0; retr < 2; ++retr) {
                    sweep_graph(family_graph(n, mask, static_cast<int>(s % 3), retr), n);
                }
            }
        });
    }

    const double elapsed = seconds_since(start);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%llu mismatches over %llu traversal pairs in %.1fs",
                  static_cast<unsigned long long>(mismatches.load()),
                  static_cast<unsigned long long>(comparisons.load()), elapsed);
    if (mismatches.load() != 0) return std::string("FAIL: ") + buf;
    if (elapsed >= 60.0) return std::string("FAIL: too slow, ") + buf;
    return std::string("ok: ") + buf;
}

// ---------------------------------------------------------------- criterion 2

std::string criterion_2() {
    Rng rng(202);
    const LabelTable no_labels;
    const DescriptorSet no_train(6, Role::Train);
    std::uint64_t mismatches = 0, comparisons = 0;
    for (int trial = 0; trial < 100; ++trial) {
        DescriptorSet query(6, Role::Query), index(6, Role::Index);
        const int nq = 2 + static_cast<int>(rng.below(4));
        const int ni = 8 + static_cast<int>(rng.below(10));
        for (int i = 0; i < nq; ++i) query.add("q" + std::to_string(i), random_unit(rng, 6));
        for (int i = 0; i < ni; ++i) index.add("i" + std::to_string(i), random_unit(rng, 6));
        const auto sym = symmetrize(build_retrieval_graph(query, index, 4));
        const auto aug =
            augment(sym, build_label_graph(no_labels), no_train, no_labels, query, index);
        const auto tg = make_traversal_graph(sym);
        EgtParams params;
        params.t = 0.1 + 0.2 * static_cast<double>(trial % 5);
        params.p = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(ni)));
        for (const ImageId& q : query.ids()) {
            ++comparisons;
            if (!lists_equal(semisup_egt(aug, q, params), egt_traverse(tg, q, params))) {
                ++mismatches;
            }
        }
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%llu mismatches over %llu traversals on 100 random graphs",
                  static_cast<unsigned long long>(mismatches),
                  static_cast<unsigned long long>(comparisons));
    return mismatches == 0 ? std::string("ok: ") + buf : std::string("FAIL: ") + buf;
}

// ---------------------------------------------------------------- criterion 3

std::string criterion_3() {
    test::MiniScene s = test::make_mini_scene();
    EgtParams params;
    params.t = 0.5;
    params.p = 5;
    const auto plain = egt_traverse(make_traversal_graph(s.base), "q", params);
    const auto aug = augment(s.base, s.lg, s.train, s.labels, s.query, s.index);
    const auto semi = semisup_egt(aug, "q", params);

    const std::vector<ImageId> expect_plain = {"inear", "inoise"};
    const std::vector<ImageId> expect_semi = {"ifar1", "ifar2", "inear", "inoise"};
    auto ids_of = [](const RankedList& l) {
        std::vector<ImageId> out;
        for (const auto& item : l.items) out.push_back(item.id);
        return out;
    };
    if (ids_of(plain) != expect_plain) return "FAIL: plain EGT deviates from the hand trace";
    if (ids_of(semi) != expect_semi) return "FAIL: semisup EGT deviates from the hand trace";
    if (aug.anchor_count != 3) return "FAIL: unexpected anchor count";
    if (semi.pops != 8) return "FAIL: semisup pop count deviates from the hand trace";
    for (const auto& item : semi.items) {
        if (item.id == "q" || item.id.front() == '#' || item.id.front() == 't') {
            return "FAIL: non-index vertex retrieved";
        }
    }
    return "ok: plain [inear inoise], semisup [ifar1 ifar2 inear inoise], 8 pops";
}

// ---------------------------------------------------------------- criterion 4

std::string criterion_4() {
    const auto start = Clock::now();
    namespace fs = std::filesystem;
    const fs::path root = "lre_acceptance_tmp";
    fs::remove_all(root);
    fs::create_directories(root / "data");
    const SynthParams sp; // defaults: 20 clusters, 5/40/10, d=64, sigma 0.45, seed 42
    const SynthData data = gen_synthetic(sp);
    save_descriptors(data.query, (root / "data" / "query.gds").string());
    save_descriptors(data.index, (root / "data" / "index.gds").string());
    save_descriptors(data.train, (root / "data" / "train.gds").string());
    save_local_features(data.features, (root / "data" / "features.glf").string());
    save_labels(data.labels, (root / "data" / "labels.csv").string());
    save_ground_truth(data.truth, (root / "data" / "truth.csv").string());

    PipelineParams params;
    params.k = 100;
    params.egt.t = 0.6;
    params.egt.p = 100;
    const auto report =
        run_ablation((root / "data").string(), (root / "ablation").string(), params);
    const double elapsed = seconds_since(start);
    if (report.rows.size() != 4) return "FAIL: expected 4 stages";
    const double blend = report.rows[0].map;
    const double qesv = report.rows[1].map;
    const double egt = report.rows[2].map;
    const double semisup = report.rows[3].map;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "blend %.4f < qesv %.4f <= egt %.4f <= semisup %.4f, gap %.4f, %.1fs", blend,
                  qesv, egt, semisup, semisup - blend, elapsed);
    if (!(blend < qesv && qesv <= egt && egt <= semisup)) {
        return std::string("FAIL: ordering violated, ") + buf;
    }
    if (semisup - blend < 0.05) return std::string("FAIL: gap below 0.05, ") + buf;
    if (elapsed >= 300.0) return std::string("FAIL: too slow, ") + buf;
    fs::remove_all(root);
    return std::string("ok: ") + buf;
}

// ---------------------------------------------------------------- criterion 5

std::string criterion_5() {
    const int planted_inliers = 30;
    int good = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto scene =
            test::make_planted_scene(5000 + static_cast<std::uint64_t>(trial), planted_inliers, 20,
                                     0.02, 15.0, 1.2, 5.0, -3.0);
        RansacParams params;
        params.iterations = 1000;
        params.inlier_threshold = 3.0;
        params.seed = static_cast<std::uint64_t>(trial);
        const auto res = ransac_affine(scene.correspondences, params);
        const bool count_ok =
            res.inlier_count >= static_cast<int>(std::ceil(0.95 * planted_inliers));
        bool transform_ok = res.transform.has_value();
        if (transform_ok) {
            const auto& got = *res.transform;
            const auto& want = scene.transform;
            transform_ok = std::abs(got.a - want.a) < 0.05 && std::abs(got.b - want.b) < 0.05 &&
                           std::abs(got.c - want.c) < 0.05 && std::abs(got.d - want.d) < 0.05 &&
                           std::abs(got.tx - want.tx) < 0.05 && std::abs(got.ty - want.ty) < 0.05;
        }
        if (count_ok && transform_ok) ++good;
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%d/100 trials recovered >=95%% inliers within 0.05", good);
    return good >= 99 ? std::string("ok: ") + buf : std::string("FAIL: ") + buf;
}

// ---------------------------------------------------------------- criterion 6

std::string criterion_6() {
    // hand-computed cases
    if (std::abs(average_precision_at({"a", "x", "b"}, {"a", "b"}) - 5.0 / 6.0) > 1e-9) {
        return "FAIL: [a,x,b] hand case";
    }
    if (average_precision_at({"a", "b"}, {"a", "b"}) != 1.0) return "FAIL: perfect ranking";
    if (average_precision_at({"x", "y", "z"}, {"a"}) != 0.0) return "FAIL: miss case";
    // oracle agreement
    Rng rng(606);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int pool = 20 + static_cast<int>(rng.below(80));
        std::vector<ImageId> ranked;
        for (int i = 0; i < pool; ++i) ranked.push_back("v" + std::to_string(i));
        for (std::size_t i = ranked.size(); i > 1; --i) {
            std::swap(ranked[i - 1], ranked[rng.below(i)]);
        }
        ranked.resize(1 + rng.below(static_cast<std::uint64_t>(pool)));
        std::unordered_set<ImageId> relevant;
        const int n_rel = 1 + static_cast<int>(rng.below(15));
        for (int i = 0; i < n_rel; ++i) relevant.insert("v" + std::to_string(rng.below(pool)));
        const int cutoff = 1 + static_cast<int>(rng.below(120));
        const double got = average_precision_at(ranked, relevant, cutoff);
        const double want = test::naive_ap(ranked, relevant, cutoff);
        if (std::abs(got - want) > 1e-12) return "FAIL: oracle disagreement on trial " +
                                                 std::to_string(trial);
        ++checked;
    }
    return "ok: hand cases exact, " + std::to_string(checked) + " random rankings within 1e-12";
}

// ---------------------------------------------------------------- criterion 7

std::string criterion_7() {
    namespace fs = std::filesystem;
    const fs::path root = "lre_acceptance_tmp7";
    fs::remove_all(root);
    fs::create_directories(root / "data");
    SynthParams sp;
    sp.seed = 42;
    const SynthData data = gen_synthetic(sp);
    save_descriptors(data.query, (root / "data" / "query.gds").string());
    save_descriptors(data.index, (root / "data" / "index.gds").string());
    save_descriptors(data.train, (root / "data" / "train.gds").string());
    save_local_features(data.features, (root / "data" / "features.glf").string());
    save_labels(data.labels, (root / "data" / "labels.csv").string());
    save_ground_truth(data.truth, (root / "data" / "truth.csv").string());

    PipelineParams params;
    params.k = 100;
    params.egt.t = 0.6;
    params.egt.p = 100;
    params.threads = 1;
    run_ablation((root / "data").string(), (root / "run1").string(), params);
    params.threads = resolve_threads(0) > 1 ? resolve_threads(0) : 4;
    run_ablation((root / "data").string(), (root / "runN").string(), params);

    for (const char* name : {"submission_blend.csv", "submission_qesv.csv", "submission_egt.csv",
                             "submission_semisup.csv", "qesv_graph.csv", "map.csv"}) {
        const auto a = read_file((root / "run1" / name).string());
        const auto b = read_file((root / "runN" / name).string());
        if (a.empty()) return std::string("FAIL: missing artifact ") + name;
        if (a != b) return std::string("FAIL: ") + name + " differs between thread counts";
    }
    fs::remove_all(root);
    char buf[120];
    std::snprintf(buf, sizeof(buf), "all submissions byte-identical for 1 vs %d threads",
                  params.threads);
    return std::string("ok: ") + buf;
}

// ---------------------------------------------------------------- criterion 8

std::size_t peak_rss_kb() {
    struct rusage usage {};
    if (getrusage(RUSAGE_SELF, &usage) != 0) return 0;
    return static_cast<std::size_t>(usage.ru_maxrss); // kilobytes on Linux
}

std::string criterion_8() {
    Rng rng(808);
    const int dim = 128;
    DescriptorSet query(dim, Role::Query);
    for (int i = 0; i < 1000; ++i) query.add("q" + std::to_string(i), random_unit(rng, dim));
    DescriptorSet index(dim, Role::Index);
    for (int i = 0; i < 20000; ++i) index.add("i" + std::to_string(i), random_unit(rng, dim));

    const auto start = Clock::now();
    const auto graph = build_retrieval_graph(query, index, 100, 0);
    const auto tg = make_traversal_graph(symmetrize(graph));
    EgtParams params;
    params.t = 0.7;
    params.p = 100;
    const auto lists = egt_rankings(tg, query, params, 0);
    const double elapsed = seconds_since(start);

    std::size_t produced = 0;
    for (const auto& list : lists) produced += list.items.size();
    const double rss_gb = static_cast<double>(peak_rss_kb()) / (1024.0 * 1024.0);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "knn+rerank 1000x20000 d=128 k=100 in %.1fs, %zu items, peak rss %.2f GB",
                  elapsed, produced, rss_gb);
    if (produced != 100000) return std::string("FAIL: incomplete rankings, ") + buf;
    if (elapsed >= 120.0) return std::string("FAIL: too slow, ") + buf;
    if (rss_gb >= 2.0) return std::string("FAIL: memory over budget, ") + buf;
    return std::string("ok: ") + buf;
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<std::string()> run;
    };
    const std::vector<Criterion> criteria = {
        {"1 egt oracle equivalence", criterion_1},
        {"2 semisup reduction", criterion_2},
        {"3 label-graph bridging", criterion_3},
        {"4 ablation ordering", criterion_4},
        {"5 ransac recovery", criterion_5},
        {"6 map correctness", criterion_6},
        {"7 thread determinism", criterion_7},
        {"8 throughput sanity", criterion_8},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        std::string result;
        try {
            result = c.run();
        } catch (const std::exception& e) {
            result = std::string("FAIL: exception: ") + e.what();
        }
        const bool ok = result.rfind("ok", 0) == 0;
        if (!ok) ++failures;
        std::printf("[%s] criterion %s: %s\n", ok ? "PASS" : "FAIL", c.name, result.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
                criteria.size());
    return failures;
}
