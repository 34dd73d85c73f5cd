#include "lre/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lre/parallel.hpp"

namespace lre {

std::vector<RankedList> knn_rankings(const KnnGraph& g, const DescriptorSet& query, int p) {
    if (p < 1) throw ValidationError("knn_rankings: p must be >= 1");
    std::vector<RankedList> out;
    out.reserve(query.size());
    for (const ImageId& qid : query.ids()) {
        const std::int32_t v = g.vertex(qid);
        if (v < 0) throw ValidationError("knn_rankings: query \"" + qid + "\" missing from graph");
        RankedList list;
        list.query = qid;
        for (const KnnEdge& e : g.edges[static_cast<std::size_t>(v)]) {
            if (static_cast<int>(list.items.size()) >= p) break;
            const auto t = static_cast<std::size_t>(e.target);
            if (g.roles[t] != Role::Index) continue;
            list.items.push_back({g.ids[t], e.weight});
        }
        out.push_back(std::move(list));
    }
    return out;
}

std::vector<RankedList> egt_rankings(const TraversalGraph& g, const DescriptorSet& query,
                                     const EgtParams& params, int threads) {
    std::vector<RankedList> out(query.size());
    parallel_chunks(query.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            out[i] = egt_traverse(g, query.id(i), params);
        }
    });
    return out;
}

std::vector<RankedList> semisup_rankings(const AugmentedGraph& aug, const DescriptorSet& query,
                                         const EgtParams& params, int threads) {
    std::vector<RankedList> out(query.size());
    parallel_chunks(query.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            out[i] = semisup_egt(aug, query.id(i), params);
        }
    });
    return out;
}

std::vector<SubmissionRow> to_submission(const std::vector<RankedList>& lists) {
    std::vector<SubmissionRow> rows;
    rows.reserve(lists.size());
    for (const RankedList& list : lists) {
        std::vector<ImageId> ids;
        ids.reserve(list.items.size());
        for (const RankedItem& item : list.items) ids.push_back(item.id);
        rows.emplace_back(list.query, std::move(ids));
    }
    return rows;
}

double evaluate_submission(const std::vector<SubmissionRow>& rows, const GroundTruth& truth,
                           int cutoff, bool plain_denominator) {
    std::unordered_map<ImageId, std::vector<ImageId>> rankings;
    rankings.reserve(rows.size());
    for (const auto& [id, images] : rows) rankings.emplace(id, images);
    return mean_ap(rankings, truth, cutoff, plain_denominator);
}

void save_ablation_csv(const AblationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "stage,map\n";
    char buf[32];
    for (const AblationRow& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%.6f", row.map);
        out << row.stage << ',' << buf << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

AblationReport run_ablation(const std::string& data_dir, const std::string& out_dir,
                            const PipelineParams& params) {
    namespace fs = std::filesystem;
    if (params.run_semisup && !params.run_egt) {
        throw UsageError("ablate: the semisup stage requires the egt stage");
    }
    fs::create_directories(out_dir);
    const auto in = [&](const char* name) { return (fs::path(data_dir) / name).string(); };
    const auto at = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

    const DescriptorSet query = load_descriptors(in("query.gds"), Role::Query);
    const DescriptorSet index = load_descriptors(in("index.gds"), Role::Index);
    const GroundTruth truth = load_ground_truth(in("truth.csv"));

    AblationReport report;
    auto score_stage = [&](const char* stage, const std::vector<RankedList>& lists,
                           const char* file) {
        save_submission(to_submission(lists), at(file));
        const auto rows = load_submission(at(file));
        report.rows.push_back({stage, evaluate_submission(rows, truth, params.egt.p)});
    };

    // blend: plain similarity ranking off the initial graph
    {
        const KnnGraph g = symmetrize(build_retrieval_graph(query, index, params.k, params.threads));
        save_graph_csv(g, at("blend_graph.csv"));
    }
    std::string graph_file = at("blend_graph.csv");
    std::string query_file = in("query.gds");
    std::string index_file = in("index.gds");
    {
        KnnGraph g = load_graph_csv(graph_file);
        assign_roles(g, query, index);
        score_stage("blend", knn_rankings(g, query, params.egt.p), "submission_blend.csv");
    }

    if (params.run_qesv) {
        KnnGraph g = load_graph_csv(graph_file);
        assign_roles(g, query, index);
        const LocalFeatureSet features = load_local_features(in("features.glf"));
        const QeSvResult qe =
            qe_sv_pass(g, query, index, features, params.qe, params.ransac, params.k, params.threads);
        save_descriptors(qe.query, at("query_qe.gds"));
        save_descriptors(qe.index, at("index_qe.gds"));
        save_graph_csv(qe.refined, at("qesv_graph.csv"));
        graph_file = at("qesv_graph.csv");
        query_file = at("query_qe.gds");
        index_file = at("index_qe.gds");
        KnnGraph refined = load_graph_csv(graph_file);
        const DescriptorSet q2 = load_descriptors(query_file, Role::Query);
        const DescriptorSet i2 = load_descriptors(index_file, Role::Index);
        assign_roles(refined, q2, i2);
        score_stage("qesv", knn_rankings(refined, q2, params.egt.p), "submission_qesv.csv");
    }

    if (params.run_egt) {
        KnnGraph g = load_graph_csv(graph_file);
        const DescriptorSet q2 = load_descriptors(query_file, Role::Query);
        const DescriptorSet i2 = load_descriptors(index_file, Role::Index);
        assign_roles(g, q2, i2);
        const KnnGraph sym = symmetrize(g);
        {
            const TraversalGraph tg = make_traversal_graph(sym);
            score_stage("egt", egt_rankings(tg, q2, params.egt, params.threads),
                        "submission_egt.csv");
        }
        if (params.run_semisup) {
            const DescriptorSet train = load_descriptors(in("train.gds"), Role::Train);
            const LabelTable labels = load_labels(in("labels.csv"));
            const LabelGraph lg = build_label_graph(labels);
            const AugmentedGraph aug = augment(sym, lg, train, labels, q2, i2, params.threads);
            score_stage("semisup", semisup_rankings(aug, q2, params.egt, params.threads),
                        "submission_semisup.csv");
        }
    }

    save_ablation_csv(report, at("map.csv"));
    return report;
}

} // namespace lre
