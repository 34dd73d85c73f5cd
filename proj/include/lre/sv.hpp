#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lre/types.hpp"

namespace lre {

/// One putative match between a keypoint of image a and one of image b.
struct Correspondence {
    float src_x = 0.0f, src_y = 0.0f; // keypoint in a
    float dst_x = 0.0f, dst_y = 0.0f; // matched keypoint in b
    double score = 0.0;               // descriptor similarity
    std::int32_t a_index = -1;
    std::int32_t b_index = -1;
};

struct RansacParams {
    int iterations = 1000;
    double inlier_threshold = 3.0; // pixels
    double ratio = 0.8;            // ratio bound on (1 - s1) / (1 - s2)
    int min_inliers = 10;
    std::uint64_t seed = 0;
};

/// x' = a x + b y + tx,  y' = c x + d y + ty
struct AffineTransform {
    double a = 1.0, b = 0.0, tx = 0.0;
    double c = 0.0, d = 1.0, ty = 0.0;

    void apply(double x, double y, double& ox, double& oy) const {
        ox = a * x + b * y + tx;
        oy = c * x + d * y + ty;
    }
};

struct VerificationResult {
    int inlier_count = 0;
    bool verified = false; // inlier_count >= min_inliers
    std::optional<AffineTransform> transform;
};

/// Nearest-neighbor matching with a similarity-induced ratio test: a keypoint
/// of a is kept iff (1 - s1) / (1 - s2) <= ratio, s1/s2 its best/second-best
/// similarity in b. A single-keypoint b has no second candidate and passes.
/// Output sorted by (score desc, a index asc, b index asc).
std::vector<Correspondence> match_features(std::span<const Keypoint> a,
                                           std::span<const Keypoint> b, double ratio);

/// RANSAC with a 3-point affine minimal sample. All C(n,3) samples are
/// enumerated when that is no more work than the requested iteration count,
/// which also makes the result seed-independent on small inputs. The final
/// count comes from a least-squares refit on the best consensus set.
VerificationResult ransac_affine(std::span<const Correspondence> corr, const RansacParams& params);

struct RerankedCandidate {
    ImageId id;
    int inliers = 0;
    bool verified = false;
};

/// Verifies each candidate against the query and orders the prefix by
/// (inlier count desc, original rank asc). Missing local features degrade to
/// zero inliers, preserving the incoming order. The RANSAC seed for each pair
/// is derived from (params.seed, query id, candidate id).
std::vector<RerankedCandidate> sv_rerank(const ImageId& query, std::span<const ImageId> candidates,
                                         const LocalFeatureSet& features,
                                         const RansacParams& params);

} // namespace lre
