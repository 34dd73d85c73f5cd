#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lre/error.hpp"

namespace lre {

/// Images are identified by non-empty UTF-8 tokens. Whitespace is forbidden
/// because the CSV outputs use the space character as the in-field separator;
/// a leading '#' is reserved for synthetic graph vertices (label hubs).
using ImageId = std::string;

bool valid_image_id(const ImageId& id);
void require_valid_image_id(const ImageId& id);

enum class Role { Query, Index, Train };

const char* role_name(Role r);

/// Fixed-dimension set of unit-norm global descriptors keyed by image id.
/// Rows are stored contiguously in insertion order; lookups go through an
/// id -> row map. Immutable once loaded, safe to share across threads.
class DescriptorSet {
public:
    DescriptorSet() = default;
    DescriptorSet(std::uint32_t dim, Role role) : dim_(dim), role_(role) {}

    std::uint32_t dim() const { return dim_; }
    Role role() const { return role_; }
    void set_role(Role r) { role_ = r; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }

    const std::vector<ImageId>& ids() const { return ids_; }
    const ImageId& id(std::size_t row) const { return ids_[row]; }

    std::span<const float> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    std::span<float> mutable_row(std::size_t i) {
        return {data_.data() + i * dim_, dim_};
    }

    std::optional<std::size_t> find(const ImageId& id) const {
        auto it = pos_.find(id);
        if (it == pos_.end()) return std::nullopt;
        return it->second;
    }
    bool contains(const ImageId& id) const { return pos_.count(id) != 0; }

    /// Appends a descriptor. Throws ValidationError on duplicate or invalid
    /// id, wrong dimension, or a non-finite component.
    void add(const ImageId& id, std::span<const float> values);

    /// Renormalizes every row whose L2 norm deviates from 1 by more than
    /// norm_tolerance(); returns the number of rows touched. A zero-norm row
    /// cannot be normalized and raises ValidationError.
    std::size_t normalize_all();

    std::size_t renormalized() const { return renormalized_; }

    static constexpr double norm_tolerance() { return 1e-5; }

private:
    std::uint32_t dim_ = 0;
    Role role_ = Role::Index;
    std::vector<ImageId> ids_;
    std::vector<float> data_;
    std::unordered_map<ImageId, std::size_t> pos_;
    std::size_t renormalized_ = 0;
};

/// One keypoint: pixel position plus its local descriptor.
struct Keypoint {
    float x = 0.0f;
    float y = 0.0f;
    std::vector<float> desc;
};

/// Per-image keypoint sequences sharing one local-descriptor dimension.
class LocalFeatureSet {
public:
    LocalFeatureSet() = default;
    explicit LocalFeatureSet(std::uint32_t dim) : dim_(dim) {}

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    const std::vector<ImageId>& ids() const { return ids_; }

    const std::vector<Keypoint>& keypoints(std::size_t i) const { return keypoints_[i]; }

    /// nullptr when the image has no recorded features.
    const std::vector<Keypoint>* find(const ImageId& id) const {
        auto it = pos_.find(id);
        if (it == pos_.end()) return nullptr;
        return &keypoints_[it->second];
    }

    /// Appends an image; validates id, dimension, and finiteness.
    void add(const ImageId& id, std::vector<Keypoint> keypoints);

private:
    std::uint32_t dim_ = 0;
    std::vector<ImageId> ids_;
    std::vector<std::vector<Keypoint>> keypoints_;
    std::unordered_map<ImageId, std::size_t> pos_;
};

/// Image -> landmark label table; L is the number of distinct labels.
class LabelTable {
public:
    using Label = std::int64_t;

    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    std::size_t label_count() const { return distinct_.size(); }
    const std::vector<ImageId>& ids() const { return ids_; }

    std::optional<Label> find(const ImageId& id) const {
        auto it = map_.find(id);
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    void add(const ImageId& id, Label label);

private:
    std::vector<ImageId> ids_;
    std::unordered_map<ImageId, Label> map_;
    std::unordered_set<Label> distinct_;
};

/// Query id -> sorted unique relevant index ids.
struct GroundTruth {
    std::map<ImageId, std::vector<ImageId>> entries;

    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }
};

} // namespace lre
