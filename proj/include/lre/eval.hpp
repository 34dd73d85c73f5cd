#pragma once

#include <cstdint>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lre/types.hpp"

namespace lre {

/// Challenge-style AP@K: (1 / min(|relevant|, K)) * sum of P(i) over relevant
/// hits in the first K positions. With plain_denominator the classic |relevant|
/// denominator is used instead. An empty relevant set scores 0; duplicate
/// ranked ids raise ValidationError.
double average_precision_at(const std::vector<ImageId>& ranked,
                            const std::unordered_set<ImageId>& relevant, int cutoff = 100,
                            bool plain_denominator = false);

/// Unweighted mean AP@K over every ground-truth query; a query absent from
/// the rankings contributes 0. Empty ground truth raises ValidationError.
double mean_ap(const std::unordered_map<ImageId, std::vector<ImageId>>& rankings,
               const GroundTruth& truth, int cutoff = 100, bool plain_denominator = false);

/// Knobs of the synthetic retrieval benchmark. Descriptors cluster around
/// random unit centers; a bridge_fraction share of each cluster's index
/// images interpolates between the center and an orthogonal sub-center, so
/// some relevant pairs have low mutual similarity but share high-similarity
/// intermediates. Matching images carry affine-consistent keypoint layouts.
struct SynthParams {
    int clusters = 20;
    int queries_per_cluster = 5;
    int index_per_cluster = 40;
    int train_per_cluster = 10;
    int dim = 64;
    double sigma = 0.45;          // intra-cluster noise scale
    double bridge_fraction = 0.3; // index images placed along the center->sub-center arc
    int keypoints = 25;           // keypoints per image
    double outlier_fraction = 0.25; // share of keypoints replaced by outliers
    std::uint64_t seed = 42;
};

struct SynthData {
    DescriptorSet query;
    DescriptorSet index;
    DescriptorSet train;
    LocalFeatureSet features;
    LabelTable labels;
    GroundTruth truth;
};

/// Fully determined by params.seed; identical params give bit-identical data.
SynthData gen_synthetic(const SynthParams& params);

} // namespace lre
