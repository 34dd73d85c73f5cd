#include "lre/types.hpp"

#include <cctype>
#include <cmath>

namespace lre {

bool valid_image_id(const ImageId& id) {
    if (id.empty()) return false;
    if (id.front() == '#') return false; // reserved for synthetic vertices
    for (const char c : id) {
        if (std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

void require_valid_image_id(const ImageId& id) {
    if (!valid_image_id(id)) {
        throw ValidationError("invalid image id: \"" + id + "\"");
    }
}

const char* role_name(Role r) {
    switch (r) {
        case Role::Query: return "query";
        case Role::Index: return "index";
        case Role::Train: return "train";
    }
    return "?";
}

void DescriptorSet::add(const ImageId& id, std::span<const float> values) {
    require_valid_image_id(id);
    if (values.size() != dim_) {
        throw ValidationError("descriptor for \"" + id + "\" has dimension " +
                              std::to_string(values.size()) + ", expected " +
                              std::to_string(dim_));
    }
    for (const float v : values) {
        if (!std::isfinite(v)) {
            throw ValidationError("non-finite descriptor component in \"" + id + "\"");
        }
    }
    if (!pos_.emplace(id, ids_.size()).second) {
        throw ValidationError("duplicate image id: \"" + id + "\"");
    }
    ids_.push_back(id);
    data_.insert(data_.end(), values.begin(), values.end());
}

std::size_t DescriptorSet::normalize_all() {
    std::size_t touched = 0;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        float* row = data_.data() + i * dim_;
        double sq = 0.0;
        for (std::uint32_t d = 0; d < dim_; ++d) sq += static_cast<double>(row[d]) * row[d];
        const double norm = std::sqrt(sq);
        if (std::abs(norm - 1.0) <= norm_tolerance()) continue;
        if (norm < 1e-12) {
            throw ValidationError("zero-norm descriptor for \"" + ids_[i] + "\" cannot be normalized");
        }
        for (std::uint32_t d = 0; d < dim_; ++d) {
            row[d] = static_cast<float>(row[d] / norm);
        }
        ++touched;
    }
    renormalized_ = touched;
    return touched;
}

void LocalFeatureSet::add(const ImageId& id, std::vector<Keypoint> keypoints) {
    require_valid_image_id(id);
    for (const Keypoint& kp : keypoints) {
        if (!std::isfinite(kp.x) || !std::isfinite(kp.y)) {
            throw ValidationError("non-finite keypoint coordinate in \"" + id + "\"");
        }
        if (kp.desc.size() != dim_) {
            throw ValidationError("keypoint descriptor in \"" + id + "\" has dimension " +
                                  std::to_string(kp.desc.size()) + ", expected " +
                                  std::to_string(dim_));
        }
        for (const float v : kp.desc) {
            if (!std::isfinite(v)) {
                throw ValidationError("non-finite keypoint descriptor component in \"" + id + "\"");
            }
        }
    }
    if (!pos_.emplace(id, ids_.size()).second) {
        throw ValidationError("duplicate image id: \"" + id + "\"");
    }
    ids_.push_back(id);
    keypoints_.push_back(std::move(keypoints));
}

void LabelTable::add(const ImageId& id, Label label) {
    require_valid_image_id(id);
    if (label < 0) {
        throw ValidationError("negative label for \"" + id + "\"");
    }
    if (!map_.emplace(id, label).second) {
        throw ValidationError("duplicate labeled image: \"" + id + "\"");
    }
    ids_.push_back(id);
    distinct_.insert(label);
}

} // namespace lre
