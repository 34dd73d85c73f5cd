#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lre/types.hpp"

namespace lre {

// Binary and CSV persistence. All multi-byte integers and floats are
// little-endian; descriptor components are 32-bit floats so a save/load
// round trip is bit-exact.
//
//   GDS1  magic "GDS1" | dim u32 | count u64 | count x record
//         record = id_len u16 | id bytes | dim x f32
//   GLF1  magic "GLF1" | dim u32 | image_count u64 | per image:
//         id_len u16 | id bytes | n_keypoints u32 | n x (x f32, y f32, dim x f32)
//
// CSV formats use a fixed header line and no quoting:
//   labels       id,landmark_id
//   ground truth id,images         (images = space-separated index ids)
//   submission   id,images         (up to p space-separated index ids)

/// Loads a GDS1 file. Descriptors whose norm deviates from 1 by more than
/// 1e-5 are renormalized; the count is available via set.renormalized().
DescriptorSet load_descriptors(const std::string& path, Role role);
void save_descriptors(const DescriptorSet& set, const std::string& path);

LocalFeatureSet load_local_features(const std::string& path);
void save_local_features(const LocalFeatureSet& set, const std::string& path);

LabelTable load_labels(const std::string& path);
void save_labels(const LabelTable& table, const std::string& path);

GroundTruth load_ground_truth(const std::string& path);
void save_ground_truth(const GroundTruth& truth, const std::string& path);

using SubmissionRow = std::pair<ImageId, std::vector<ImageId>>;

void save_submission(const std::vector<SubmissionRow>& rows, const std::string& path);
std::vector<SubmissionRow> load_submission(const std::string& path);

} // namespace lre
