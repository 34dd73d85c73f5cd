// lre — landmark retrieval re-ranking pipeline.
//
// Subcommands mirror the pipeline stages; stages communicate through files so
// any single stage can be re-run or swapped out. Every subcommand is
// deterministic: identical inputs and flags produce byte-identical outputs,
// independent of --threads.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lre/pipeline.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void note_renormalized(const char* what, const lre::DescriptorSet& set) {
    if (set.renormalized() > 0) {
        std::cerr << "[store] warning: renormalized " << set.renormalized() << " " << what
                  << " descriptors (norm deviated from 1 by more than 1e-5)\n";
    }
}

struct CommonFlags {
    int threads = 0;
    std::uint64_t seed = 0;
};

void add_qe_flags(CLI::App* cmd, lre::QeParams& qe, lre::RansacParams& ransac) {
    cmd->add_option("--sv-depth", qe.sv_depth, "candidates passed to spatial verification");
    cmd->add_option("--expand-count", qe.expand_count, "verified neighbors folded into each descriptor");
    cmd->add_option("--alpha", qe.alpha, "neighbor weight exponent (0 = simple average)");
    cmd->add_flag("--no-database-side", [&qe](std::int64_t) { qe.database_side = false; },
                  "skip expansion of index images");
    cmd->add_option("--ransac-iters", ransac.iterations, "RANSAC iterations");
    cmd->add_option("--inlier-thresh", ransac.inlier_threshold, "RANSAC inlier threshold (pixels)");
    cmd->add_option("--ratio", ransac.ratio, "feature match ratio bound");
    cmd->add_option("--min-inliers", ransac.min_inliers, "inliers required for verification");
}

int run(int argc, char** argv) {
    CLI::App app{"landmark retrieval re-ranking pipeline"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
    std::string synth_out;
    lre::SynthParams sp;
    synth->add_option("--out-dir", synth_out, "output directory")->required();
    synth->add_option("--clusters", sp.clusters);
    synth->add_option("--queries", sp.queries_per_cluster, "queries per cluster");
    synth->add_option("--index", sp.index_per_cluster, "index images per cluster");
    synth->add_option("--train", sp.train_per_cluster, "train images per cluster");
    synth->add_option("--dim", sp.dim);
    synth->add_option("--sigma", sp.sigma, "intra-cluster noise scale");
    synth->add_option("--bridge-frac", sp.bridge_fraction);
    synth->add_option("--keypoints", sp.keypoints, "keypoints per image");
    synth->add_option("--outlier-frac", sp.outlier_fraction);
    synth->add_option("--seed", sp.seed);

    // ---- blend ----
    auto* blend_cmd = app.add_subcommand("blend", "concatenate two descriptor files and renormalize");
    std::string blend_a, blend_b, blend_out;
    blend_cmd->add_option("--a", blend_a, "first GDS1 file")->required();
    blend_cmd->add_option("--b", blend_b, "second GDS1 file")->required();
    blend_cmd->add_option("--out", blend_out, "output GDS1 file")->required();

    // ---- knn ----
    auto* knn_cmd = app.add_subcommand("knn", "build and symmetrize the similarity graph");
    std::string knn_query, knn_index, knn_out;
    int knn_k = 100;
    CommonFlags knn_flags;
    knn_cmd->add_option("--query", knn_query, "query GDS1 file")->required();
    knn_cmd->add_option("--index", knn_index, "index GDS1 file")->required();
    knn_cmd->add_option("--k", knn_k, "neighbors per source");
    knn_cmd->add_option("--out", knn_out, "output graph CSV")->required();
    knn_cmd->add_option("--threads", knn_flags.threads, "worker threads (0 = machine parallelism)");

    // ---- qesv ----
    auto* qesv_cmd = app.add_subcommand("qesv", "spatially verified query expansion");
    std::string qesv_graph, qesv_query, qesv_index, qesv_features;
    std::string qesv_out_graph, qesv_out_query, qesv_out_index;
    int qesv_k = 100;
    lre::QeParams qesv_qe;
    lre::RansacParams qesv_ransac;
    CommonFlags qesv_flags;
    qesv_cmd->add_option("--graph", qesv_graph, "input graph CSV")->required();
    qesv_cmd->add_option("--query-desc", qesv_query, "query GDS1 file")->required();
    qesv_cmd->add_option("--index-desc", qesv_index, "index GDS1 file")->required();
    qesv_cmd->add_option("--features", qesv_features, "local features GLF1 file")->required();
    qesv_cmd->add_option("--k", qesv_k, "neighbors per source in the rebuilt graph");
    qesv_cmd->add_option("--out-graph", qesv_out_graph, "refined graph CSV")->required();
    qesv_cmd->add_option("--out-query-desc", qesv_out_query, "expanded query GDS1")->required();
    qesv_cmd->add_option("--out-index-desc", qesv_out_index, "expanded index GDS1")->required();
    add_qe_flags(qesv_cmd, qesv_qe, qesv_ransac);
    qesv_cmd->add_option("--seed", qesv_flags.seed, "seed for per-pair RANSAC streams");
    qesv_cmd->add_option("--threads", qesv_flags.threads, "worker threads");

    // ---- rerank ----
    auto* rerank_cmd = app.add_subcommand("rerank", "EGT traversal per query, writes submission CSV");
    std::string rr_graph, rr_query, rr_index, rr_labels, rr_train, rr_out;
    lre::EgtParams rr_egt;
    bool rr_semisup = false;
    CommonFlags rr_flags;
    rerank_cmd->add_option("--graph", rr_graph, "input graph CSV")->required();
    rerank_cmd->add_option("--query-desc", rr_query, "query GDS1 file")->required();
    rerank_cmd->add_option("--index-desc", rr_index, "index GDS1 file")->required();
    rerank_cmd->add_option("--t", rr_egt.t, "trust threshold")->required();
    rerank_cmd->add_option("--p", rr_egt.p, "result budget per query");
    rerank_cmd->add_option("--max-steps", rr_egt.max_steps, "traversal pop cap (0 = 10*p*k)");
    rerank_cmd->add_flag("--semisup", rr_semisup, "augment the graph with labeled train sub-graphs");
    rerank_cmd->add_option("--labels", rr_labels, "train labels CSV (with --semisup)");
    rerank_cmd->add_option("--train-desc", rr_train, "train GDS1 file (with --semisup)");
    rerank_cmd->add_option("--out", rr_out, "submission CSV")->required();
    rerank_cmd->add_option("--threads", rr_flags.threads, "worker threads");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "mAP of a submission against ground truth");
    std::string ev_submission, ev_truth;
    int ev_cutoff = 100;
    bool ev_plain = false;
    eval_cmd->add_option("--submission", ev_submission, "submission CSV")->required();
    eval_cmd->add_option("--truth", ev_truth, "ground-truth CSV")->required();
    eval_cmd->add_option("--k", ev_cutoff, "ranking cutoff K");
    eval_cmd->add_flag("--plain-map", ev_plain, "use |relevant| as the AP denominator");

    // ---- ablate ----
    auto* ablate_cmd = app.add_subcommand("ablate", "run the stages cumulatively and report per-stage mAP");
    std::string ab_data, ab_out;
    lre::PipelineParams ab;
    bool ab_no_qesv = false, ab_no_egt = false, ab_no_semisup = false;
    ablate_cmd->add_option("--data-dir", ab_data, "synth-format dataset directory")->required();
    ablate_cmd->add_option("--out-dir", ab_out, "directory for stage artifacts")->required();
    ablate_cmd->add_option("--k", ab.k, "neighbors per source");
    ablate_cmd->add_option("--t", ab.egt.t, "trust threshold")->required();
    ablate_cmd->add_option("--p", ab.egt.p, "result budget per query");
    ablate_cmd->add_option("--max-steps", ab.egt.max_steps, "traversal pop cap (0 = 10*p*k)");
    add_qe_flags(ablate_cmd, ab.qe, ab.ransac);
    ablate_cmd->add_option("--seed", ab.ransac.seed, "seed for per-pair RANSAC streams");
    ablate_cmd->add_option("--threads", ab.threads, "worker threads");
    ablate_cmd->add_flag("--no-qesv", ab_no_qesv, "skip the query-expansion stage");
    ablate_cmd->add_flag("--no-egt", ab_no_egt, "skip the EGT stage");
    ablate_cmd->add_flag("--no-semisup", ab_no_semisup, "skip the semi-supervised stage");

    CLI11_PARSE(app, argc, argv);

    const auto start = Clock::now();

    if (*synth) {
        const lre::SynthData data = lre::gen_synthetic(sp);
        namespace fs = std::filesystem;
        fs::create_directories(synth_out);
        const auto at = [&](const char* name) { return (fs::path(synth_out) / name).string(); };
        lre::save_descriptors(data.query, at("query.gds"));
        lre::save_descriptors(data.index, at("index.gds"));
        lre::save_descriptors(data.train, at("train.gds"));
        lre::save_local_features(data.features, at("features.glf"));
        lre::save_labels(data.labels, at("labels.csv"));
        lre::save_ground_truth(data.truth, at("truth.csv"));
        std::cerr << "[synth] " << data.query.size() << " queries, " << data.index.size()
                  << " index, " << data.train.size() << " train -> " << synth_out << " ("
                  << seconds_since(start) << "s)\n";
        return 0;
    }

    if (*blend_cmd) {
        const lre::DescriptorSet a = lre::load_descriptors(blend_a, lre::Role::Index);
        const lre::DescriptorSet b = lre::load_descriptors(blend_b, lre::Role::Index);
        note_renormalized("input", a);
        note_renormalized("input", b);
        lre::save_descriptors(lre::blend(a, b), blend_out);
        std::cerr << "[blend] " << a.size() << " ids, dim " << a.dim() << "+" << b.dim() << " -> "
                  << blend_out << " (" << seconds_since(start) << "s)\n";
        return 0;
    }

    if (*knn_cmd) {
        const lre::DescriptorSet query = lre::load_descriptors(knn_query, lre::Role::Query);
        const lre::DescriptorSet index = lre::load_descriptors(knn_index, lre::Role::Index);
        note_renormalized("query", query);
        note_renormalized("index", index);
        const lre::KnnGraph g =
            lre::symmetrize(lre::build_retrieval_graph(query, index, knn_k, knn_flags.threads));
        lre::save_graph_csv(g, knn_out);
        std::cerr << "[knn] " << query.size() << "+" << index.size() << " sources, k=" << knn_k
                  << " -> " << knn_out << " (" << seconds_since(start) << "s)\n";
        return 0;
    }

    if (*qesv_cmd) {
        const lre::DescriptorSet query = lre::load_descriptors(qesv_query, lre::Role::Query);
        const lre::DescriptorSet index = lre::load_descriptors(qesv_index, lre::Role::Index);
        const lre::LocalFeatureSet features = lre::load_local_features(qesv_features);
        lre::KnnGraph g = lre::load_graph_csv(qesv_graph);
        lre::assign_roles(g, query, index);
        lre::RansacParams ransac = qesv_ransac;
        ransac.seed = qesv_flags.seed;
        const lre::QeSvResult result = lre::qe_sv_pass(g, query, index, features, qesv_qe, ransac,
                                                       qesv_k, qesv_flags.threads);
        lre::save_descriptors(result.query, qesv_out_query);
        lre::save_descriptors(result.index, qesv_out_index);
        lre::save_graph_csv(result.refined, qesv_out_graph);
        std::cerr << "[qesv] expanded " << result.expanded_queries << " queries, "
                  << result.expanded_index << " index images -> " << qesv_out_graph << " ("
                  << seconds_since(start) << "s)\n";
        return 0;
    }

    if (*rerank_cmd) {
        if (rr_semisup && (rr_labels.empty() || rr_train.empty())) {
            throw lre::UsageError("rerank: --semisup requires --labels and --train-desc");
        }
        const lre::DescriptorSet query = lre::load_descriptors(rr_query, lre::Role::Query);
        const lre::DescriptorSet index = lre::load_descriptors(rr_index, lre::Role::Index);
        lre::KnnGraph g = lre::load_graph_csv(rr_graph);
        lre::assign_roles(g, query, index);
        const lre::KnnGraph sym = lre::symmetrize(g);
        std::vector<lre::RankedList> lists;
        if (rr_semisup) {
            const lre::DescriptorSet train = lre::load_descriptors(rr_train, lre::Role::Train);
            const lre::LabelTable labels = lre::load_labels(rr_labels);
            const lre::LabelGraph lg = lre::build_label_graph(labels);
            const lre::AugmentedGraph aug =
                lre::augment(sym, lg, train, labels, query, index, rr_flags.threads);
            std::cerr << "[rerank] label graph: " << lg.hub_count() << " hubs, "
                      << aug.anchor_count << " anchor edges\n";
            lists = lre::semisup_rankings(aug, query, rr_egt, rr_flags.threads);
        } else {
            const lre::TraversalGraph tg = lre::make_traversal_graph(sym);
            lists = lre::egt_rankings(tg, query, rr_egt, rr_flags.threads);
        }
        std::size_t capped = 0;
        for (const auto& list : lists) capped += list.step_capped ? 1 : 0;
        if (capped > 0) {
            std::cerr << "[rerank] warning: " << capped << " traversals hit the max-steps cap\n";
        }
        lre::save_submission(lre::to_submission(lists), rr_out);
        std::cerr << "[rerank] " << lists.size() << " queries, t=" << rr_egt.t << ", p=" << rr_egt.p
                  << (rr_semisup ? ", semisup" : "") << " -> " << rr_out << " ("
                  << seconds_since(start) << "s)\n";
        return 0;
    }

    if (*eval_cmd) {
        const auto rows = lre::load_submission(ev_submission);
        const lre::GroundTruth truth = lre::load_ground_truth(ev_truth);
        const double map = lre::evaluate_submission(rows, truth, ev_cutoff, ev_plain);
        std::printf("mAP@%d%s: %.6f\n", ev_cutoff, ev_plain ? " (plain)" : "", map);
        return 0;
    }

    if (*ablate_cmd) {
        ab.run_qesv = !ab_no_qesv;
        ab.run_egt = !ab_no_egt;
        ab.run_semisup = !ab_no_semisup;
        if (ab.run_semisup && !ab.run_egt) {
            throw lre::UsageError("ablate: --no-egt requires --no-semisup");
        }
        const lre::AblationReport report = lre::run_ablation(ab_data, ab_out, ab);
        for (const auto& row : report.rows) {
            std::printf("%-8s %.6f\n", row.stage.c_str(), row.map);
        }
        std::cerr << "[ablate] " << report.rows.size() << " stages -> " << ab_out << "/map.csv ("
                  << seconds_since(start) << "s)\n";
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const lre::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const lre::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
