#pragma once

#include <string>
#include <vector>

#include "lre/egt.hpp"
#include "lre/eval.hpp"
#include "lre/qe.hpp"
#include "lre/store.hpp"

namespace lre {

struct PipelineParams {
    int k = 100;
    EgtParams egt;       // t must be set by the caller
    QeParams qe;
    RansacParams ransac; // ransac.seed carries the pipeline seed
    bool run_qesv = true;
    bool run_egt = true;
    bool run_semisup = true; // requires run_egt
    int threads = 0;
};

/// Baseline similarity ranking straight off the graph: each query's
/// index-role neighbors in edge order, truncated to p.
std::vector<RankedList> knn_rankings(const KnnGraph& g, const DescriptorSet& query, int p);

/// One EGT traversal per query, parallel over queries.
std::vector<RankedList> egt_rankings(const TraversalGraph& g, const DescriptorSet& query,
                                     const EgtParams& params, int threads);

/// Semi-supervised EGT per query on an augmented graph.
std::vector<RankedList> semisup_rankings(const AugmentedGraph& aug, const DescriptorSet& query,
                                         const EgtParams& params, int threads);

std::vector<SubmissionRow> to_submission(const std::vector<RankedList>& lists);

double evaluate_submission(const std::vector<SubmissionRow>& rows, const GroundTruth& truth,
                           int cutoff, bool plain_denominator = false);

struct AblationRow {
    std::string stage;
    double map = 0.0;
};

struct AblationReport {
    std::vector<AblationRow> rows;
};

/// Writes the report as "stage,map" CSV.
void save_ablation_csv(const AblationReport& report, const std::string& path);

/// Cumulative ablation (blend; +qesv; +egt; +semisup) over a synth-format
/// data directory (query.gds, index.gds, train.gds, features.glf,
/// labels.csv, truth.csv). Stages communicate through files in out_dir, so
/// any intermediate artifact can be inspected or re-used; map.csv collects
/// the per-stage mAP@p.
AblationReport run_ablation(const std::string& data_dir, const std::string& out_dir,
                            const PipelineParams& params);

} // namespace lre
