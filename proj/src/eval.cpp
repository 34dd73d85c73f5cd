#include "lre/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "lre/rng.hpp"

namespace lre {

double average_precision_at(const std::vector<ImageId>& ranked,
                            const std::unordered_set<ImageId>& relevant, int cutoff,
                            bool plain_denominator) {
    if (cutoff < 1) throw ValidationError("average_precision_at: cutoff must be >= 1");
    if (relevant.empty()) return 0.0;
    const std::size_t limit = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(cutoff));
    {
        std::unordered_set<ImageId> seen;
        seen.reserve(ranked.size());
        for (const ImageId& id : ranked) {
            if (!seen.insert(id).second) {
                throw ValidationError("average_precision_at: duplicate ranked id \"" + id + "\"");
            }
        }
    }
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < limit; ++i) {
        if (relevant.count(ranked[i]) != 0) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    const std::size_t denom = plain_denominator
                                  ? relevant.size()
                                  : std::min<std::size_t>(relevant.size(),
                                                          static_cast<std::size_t>(cutoff));
    return sum / static_cast<double>(denom);
}

double mean_ap(const std::unordered_map<ImageId, std::vector<ImageId>>& rankings,
               const GroundTruth& truth, int cutoff, bool plain_denominator) {
    if (truth.empty()) throw ValidationError("mean_ap: empty ground truth");
    double sum = 0.0;
    for (const auto& [query, relevant] : truth.entries) {
        const auto it = rankings.find(query);
        if (it == rankings.end()) continue; // missing query scores 0
        const std::unordered_set<ImageId> rel(relevant.begin(), relevant.end());
        sum += average_precision_at(it->second, rel, cutoff, plain_denominator);
    }
    return sum / static_cast<double>(truth.size());
}

namespace {

constexpr int kLocalDim = 32;
constexpr double kSplitAngle = std::numbers::pi / 2; // center vs. sub-center
constexpr double kBridgeNoise = 0.35;                // of sigma
constexpr double kTrainNoise = 0.9;                  // of sigma
constexpr double kHardNoise = 3.0;                   // of sigma, for hard index images
constexpr double kHardQueryNoise = 4.0;              // of sigma, for hard queries
constexpr double kKeypointJitter = 0.3;              // pixels
constexpr double kLocalDescNoise = 0.02;             // per component

std::vector<double> random_direction(Rng& rng, int dim) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double sq = 0.0;
    do {
        sq = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            sq += x * x;
        }
    } while (sq < 1e-12);
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& x : v) x *= inv;
    return v;
}

std::vector<float> noisy_unit(Rng& rng, const std::vector<double>& base, double scale) {
    std::vector<double> v = base;
    if (scale > 0.0) {
        const auto dir = random_direction(rng, static_cast<int>(base.size()));
        for (std::size_t d = 0; d < v.size(); ++d) v[d] += scale * dir[d];
    }
    double sq = 0.0;
    for (const double x : v) sq += x * x;
    const double inv = 1.0 / std::sqrt(sq);
    std::vector<float> out(v.size());
    for (std::size_t d = 0; d < v.size(); ++d) out[d] = static_cast<float>(v[d] * inv);
    return out;
}

// Point on the great-circle arc between two unit vectors separated by angle.
std::vector<double> slerp(const std::vector<double>& a, const std::vector<double>& b, double angle,
                          double lambda) {
    const double sa = std::sin(angle);
    const double wa = std::sin((1.0 - lambda) * angle) / sa;
    const double wb = std::sin(lambda * angle) / sa;
    std::vector<double> out(a.size());
    for (std::size_t d = 0; d < a.size(); ++d) out[d] = wa * a[d] + wb * b[d];
    return out;
}

struct KeypointTemplate {
    std::vector<float> x, y;
    std::vector<std::vector<float>> desc;
};

// Affine view of the cluster template plus outlier keypoints. `degraded`
// template points are replaced by additional outliers (hard shots keep too
// few stable points for verification).
std::vector<Keypoint> make_view(Rng& rng, const KeypointTemplate& tmpl, int outliers,
                                int degraded = 0) {
    const double theta = rng.uniform(-25.0, 25.0) * std::numbers::pi / 180.0;
    const double scale = rng.uniform(0.85, 1.2);
    const double tx = rng.uniform(-15.0, 15.0);
    const double ty = rng.uniform(-15.0, 15.0);
    const double ca = scale * std::cos(theta);
    const double sa = scale * std::sin(theta);
    const std::size_t kept =
        tmpl.x.size() - std::min<std::size_t>(tmpl.x.size(), static_cast<std::size_t>(degraded));
    outliers += static_cast<int>(tmpl.x.size() - kept);
    std::vector<Keypoint> kps;
    kps.reserve(kept + static_cast<std::size_t>(outliers));
    for (std::size_t j = 0; j < kept; ++j) {
        Keypoint kp;
        kp.x = static_cast<float>(ca * tmpl.x[j] - sa * tmpl.y[j] + tx +
                                  kKeypointJitter * rng.normal());
        kp.y = static_cast<float>(sa * tmpl.x[j] + ca * tmpl.y[j] + ty +
                                  kKeypointJitter * rng.normal());
        std::vector<double> d(tmpl.desc[j].begin(), tmpl.desc[j].end());
        double sq = 0.0;
        for (auto& v : d) {
            v += kLocalDescNoise * rng.normal();
            sq += v * v;
        }
        const double inv = 1.0 / std::sqrt(sq);
        kp.desc.resize(kLocalDim);
        for (int c = 0; c < kLocalDim; ++c) kp.desc[c] = static_cast<float>(d[c] * inv);
        kps.push_back(std::move(kp));
    }
    for (int o = 0; o < outliers; ++o) {
        Keypoint kp;
        kp.x = static_cast<float>(rng.uniform(0.0, 100.0));
        kp.y = static_cast<float>(rng.uniform(0.0, 100.0));
        const auto d = random_direction(rng, kLocalDim);
        kp.desc.resize(kLocalDim);
        for (int c = 0; c < kLocalDim; ++c) kp.desc[c] = static_cast<float>(d[c]);
        kps.push_back(std::move(kp));
    }
    return kps;
}

std::string make_id(const char* prefix, int cluster, int member) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%03d_%03d", prefix, cluster, member);
    return buf;
}

} // namespace

SynthData gen_synthetic(const SynthParams& p) {
    if (p.clusters < 0 || p.queries_per_cluster < 0 || p.index_per_cluster < 0 ||
        p.train_per_cluster < 0 || p.keypoints < 0) {
        throw ValidationError("gen_synthetic: counts must be non-negative");
    }
    if (p.dim < 1) throw ValidationError("gen_synthetic: dim must be >= 1");
    if (p.sigma < 0.0) throw ValidationError("gen_synthetic: sigma must be non-negative");
    if (p.bridge_fraction < 0.0 || p.bridge_fraction > 1.0) {
        throw ValidationError("gen_synthetic: bridge_fraction must be in [0, 1]");
    }
    if (p.outlier_fraction < 0.0 || p.outlier_fraction > 1.0) {
        throw ValidationError("gen_synthetic: outlier_fraction must be in [0, 1]");
    }

    SynthData data{DescriptorSet(static_cast<std::uint32_t>(p.dim), Role::Query),
                   DescriptorSet(static_cast<std::uint32_t>(p.dim), Role::Index),
                   DescriptorSet(static_cast<std::uint32_t>(p.dim), Role::Train),
                   LocalFeatureSet(kLocalDim),
                   {},
                   {}};

    Rng rng(p.seed);
    const int n_outlier = static_cast<int>(std::lround(p.outlier_fraction * p.keypoints));
    const int n_template = p.keypoints - n_outlier;
    const int n_bridge = static_cast<int>(std::lround(p.bridge_fraction * p.index_per_cluster));
    const int n_near = p.index_per_cluster - n_bridge;

    for (int c = 0; c < p.clusters; ++c) {
        const auto center = random_direction(rng, p.dim);
        // orthogonal direction spanning the bridge arc
        auto ortho = random_direction(rng, p.dim);
        double proj = 0.0;
        for (int d = 0; d < p.dim; ++d) proj += ortho[static_cast<std::size_t>(d)] * center[static_cast<std::size_t>(d)];
        double sq = 0.0;
        for (int d = 0; d < p.dim; ++d) {
            ortho[static_cast<std::size_t>(d)] -= proj * center[static_cast<std::size_t>(d)];
            sq += ortho[static_cast<std::size_t>(d)] * ortho[static_cast<std::size_t>(d)];
        }
        if (sq < 1e-12) sq = 1.0; // degenerate only when dim == 1
        const double inv = 1.0 / std::sqrt(sq);
        std::vector<double> sub_center(center.size());
        for (std::size_t d = 0; d < center.size(); ++d) {
            sub_center[d] = std::cos(kSplitAngle) * center[d] + std::sin(kSplitAngle) * ortho[d] * inv;
        }

        KeypointTemplate tmpl;
        tmpl.x.resize(static_cast<std::size_t>(n_template));
        tmpl.y.resize(static_cast<std::size_t>(n_template));
        tmpl.desc.resize(static_cast<std::size_t>(n_template));
        for (int j = 0; j < n_template; ++j) {
            tmpl.x[static_cast<std::size_t>(j)] = static_cast<float>(rng.uniform(0.0, 100.0));
            tmpl.y[static_cast<std::size_t>(j)] = static_cast<float>(rng.uniform(0.0, 100.0));
            const auto d = random_direction(rng, kLocalDim);
            auto& desc = tmpl.desc[static_cast<std::size_t>(j)];
            desc.resize(kLocalDim);
            for (int v = 0; v < kLocalDim; ++v) desc[static_cast<std::size_t>(v)] = static_cast<float>(d[static_cast<std::size_t>(v)]);
        }

        std::vector<ImageId> cluster_index_ids;
        cluster_index_ids.reserve(static_cast<std::size_t>(p.index_per_cluster));

        for (int j = 0; j < p.queries_per_cluster; ++j) {
            const ImageId id = make_id("q", c, j);
            // every fourth query is a hard shot: heavy descriptor noise and
            // most of its stable keypoints gone
            const bool hard = j % 4 == 3;
            data.query.add(id, noisy_unit(rng, center, (hard ? kHardQueryNoise : 1.0) * p.sigma));
            data.features.add(id, make_view(rng, tmpl, n_outlier, hard ? (2 * n_template) / 3 : 0));
        }
        for (int j = 0; j < p.index_per_cluster; ++j) {
            const ImageId id = make_id("i", c, j);
            std::vector<float> desc;
            if (j < n_near) {
                // every fifth near image is a hard (heavily degraded) shot
                const double scale = (j % 5 == 2) ? kHardNoise * p.sigma : p.sigma;
                desc = noisy_unit(rng, center, scale);
            } else {
                const int b = j - n_near;
                // even clusters get a full stepping-stone ladder toward the
                // sub-center; odd clusters only the far end, reachable through
                // the label graph alone
                double lambda;
                if (c % 2 == 0) {
                    lambda = n_bridge > 1 ? 0.15 + 0.85 * b / (n_bridge - 1.0) : 1.0;
                } else {
                    lambda = n_bridge > 1 ? 0.9 + 0.1 * b / (n_bridge - 1.0) : 1.0;
                }
                desc = noisy_unit(rng, slerp(center, sub_center, kSplitAngle, lambda),
                                  kBridgeNoise * p.sigma);
            }
            data.index.add(id, desc);
            data.features.add(id, make_view(rng, tmpl, n_outlier));
            cluster_index_ids.push_back(id);
        }
        for (int j = 0; j < p.train_per_cluster; ++j) {
            const ImageId id = make_id("t", c, j);
            const bool far_side = j >= (p.train_per_cluster + 1) / 2;
            const auto& base = far_side ? sub_center : center;
            data.train.add(id, noisy_unit(rng, base, kTrainNoise * p.sigma));
            data.labels.add(id, c + 1);
        }
        for (int j = 0; j < p.queries_per_cluster; ++j) {
            data.truth.entries.emplace(make_id("q", c, j), cluster_index_ids);
        }
    }
    return data;
}

} // namespace lre
