#include "lre/sv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "lre/rng.hpp"

namespace lre {

namespace {

constexpr double kDegenerateDet = 1e-9;

double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

// Exact affine map from three correspondences. Returns false when the source
// points are (near) collinear.
bool solve_minimal(const Correspondence& p0, const Correspondence& p1, const Correspondence& p2,
                   AffineTransform& out) {
    const double x0 = p0.src_x, y0 = p0.src_y;
    const double x1 = p1.src_x, y1 = p1.src_y;
    const double x2 = p2.src_x, y2 = p2.src_y;
    const double det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if (std::abs(det) < kDegenerateDet) return false;
    auto solve_row = [&](double u0, double u1, double u2, double& ca, double& cb, double& cc) {
        // Cramer on [[x y 1]] rows
        const double d1 = (u1 - u0) * (y2 - y0) - (u2 - u0) * (y1 - y0);
        const double d2 = (x1 - x0) * (u2 - u0) - (x2 - x0) * (u1 - u0);
        ca = d1 / det;
        cb = d2 / det;
        cc = u0 - ca * x0 - cb * y0;
    };
    solve_row(p0.dst_x, p1.dst_x, p2.dst_x, out.a, out.b, out.tx);
    solve_row(p0.dst_y, p1.dst_y, p2.dst_y, out.c, out.d, out.ty);
    return true;
}

struct Consensus {
    int count = 0;
    double sse = 0.0; // squared error over inliers only
};

Consensus score_model(std::span<const Correspondence> corr, const AffineTransform& T,
                      double threshold_sq) {
    Consensus c;
    for (const Correspondence& p : corr) {
        double px, py;
        T.apply(p.src_x, p.src_y, px, py);
        const double dx = px - p.dst_x;
        const double dy = py - p.dst_y;
        const double e2 = dx * dx + dy * dy;
        if (e2 <= threshold_sq) {
            ++c.count;
            c.sse += e2;
        }
    }
    return c;
}

// Least-squares affine fit over the inliers of a model. Falls back to the
// given model when the normal equations are singular (collinear consensus).
bool refit_least_squares(std::span<const Correspondence> corr, const AffineTransform& model,
                         double threshold_sq, AffineTransform& out) {
    double sxx = 0, sxy = 0, syy = 0, sx = 0, sy = 0, n = 0;
    double bx0 = 0, bx1 = 0, bx2 = 0, by0 = 0, by1 = 0, by2 = 0;
    for (const Correspondence& p : corr) {
        double px, py;
        model.apply(p.src_x, p.src_y, px, py);
        const double dx = px - p.dst_x;
        const double dy = py - p.dst_y;
        if (dx * dx + dy * dy > threshold_sq) continue;
        const double x = p.src_x, y = p.src_y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sx += x;
        sy += y;
        n += 1;
        bx0 += x * p.dst_x;
        bx1 += y * p.dst_x;
        bx2 += p.dst_x;
        by0 += x * p.dst_y;
        by1 += y * p.dst_y;
        by2 += p.dst_y;
    }
    if (n < 3) return false;
    // 3x3 symmetric normal matrix, solved by Cramer
    const double m00 = sxx, m01 = sxy, m02 = sx;
    const double m11 = syy, m12 = sy, m22 = n;
    const double det = m00 * (m11 * m22 - m12 * m12) - m01 * (m01 * m22 - m12 * m02) +
                       m02 * (m01 * m12 - m11 * m02);
    if (std::abs(det) < 1e-12) return false;
    auto solve = [&](double b0, double b1, double b2, double& ca, double& cb, double& cc) {
        const double d0 = b0 * (m11 * m22 - m12 * m12) - m01 * (b1 * m22 - m12 * b2) +
                          m02 * (b1 * m12 - m11 * b2);
        const double d1 = m00 * (b1 * m22 - b2 * m12) - b0 * (m01 * m22 - m12 * m02) +
                          m02 * (m01 * b2 - b1 * m02);
        const double d2 = m00 * (m11 * b2 - m12 * b1) - m01 * (m01 * b2 - b1 * m02) +
                          b0 * (m01 * m12 - m11 * m02);
        ca = d0 / det;
        cb = d1 / det;
        cc = d2 / det;
    };
    solve(bx0, bx1, bx2, out.a, out.b, out.tx);
    solve(by0, by1, by2, out.c, out.d, out.ty);
    return true;
}

} // namespace

std::vector<Correspondence> match_features(std::span<const Keypoint> a, std::span<const Keypoint> b,
                                           double ratio) {
    std::vector<Correspondence> out;
    if (a.empty() || b.empty()) return out;
    const std::size_t dim = a[0].desc.size();
    for (const Keypoint& kp : b) {
        if (kp.desc.size() != dim) {
            throw ValidationError("match_features: descriptor dimension mismatch");
        }
    }
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].desc.size() != dim) {
            throw ValidationError("match_features: descriptor dimension mismatch");
        }
        double s1 = -std::numeric_limits<double>::infinity();
        double s2 = -std::numeric_limits<double>::infinity();
        std::size_t best = 0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double s = std::min(1.0, dot(a[i].desc, b[j].desc));
            if (s > s1) {
                s2 = s1;
                s1 = s;
                best = j;
            } else if (s > s2) {
                s2 = s;
            }
        }
        double rv;
        if (b.size() < 2) {
            rv = 0.0; // no second candidate, unambiguous by definition
        } else {
            const double num = std::max(0.0, 1.0 - s1);
            const double den = std::max(0.0, 1.0 - s2);
            rv = den > 0.0 ? num / den : 1.0; // 0/0: both perfect, treat as a tie
        }
        if (rv <= ratio) {
            Correspondence c;
            c.src_x = a[i].x;
            c.src_y = a[i].y;
            c.dst_x = b[best].x;
            c.dst_y = b[best].y;
            c.score = s1;
            c.a_index = static_cast<std::int32_t>(i);
            c.b_index = static_cast<std::int32_t>(best);
            out.push_back(c);
        }
    }
    std::sort(out.begin(), out.end(), [](const Correspondence& x, const Correspondence& y) {
        if (x.score != y.score) return x.score > y.score;
        if (x.a_index != y.a_index) return x.a_index < y.a_index;
        return x.b_index < y.b_index;
    });
    return out;
}

VerificationResult ransac_affine(std::span<const Correspondence> corr, const RansacParams& params) {
    if (params.iterations < 1) throw ValidationError("ransac: iterations must be >= 1");
    if (params.inlier_threshold <= 0.0) throw ValidationError("ransac: inlier threshold must be > 0");
    VerificationResult result;
    const std::size_t n = corr.size();
    if (n < 3) return result;

    const double thr_sq = params.inlier_threshold * params.inlier_threshold;
    AffineTransform best_model;
    Consensus best;
    bool have_model = false;

    auto consider = [&](const Correspondence& p0, const Correspondence& p1,
                        const Correspondence& p2) {
        AffineTransform T;
        if (!solve_minimal(p0, p1, p2, T)) return; // degenerate sample, skip
        const Consensus c = score_model(corr, T, thr_sq);
        if (!have_model || c.count > best.count || (c.count == best.count && c.sse < best.sse)) {
            have_model = true;
            best = c;
            best_model = T;
        }
    };

    const std::uint64_t total_triples = n * (n - 1) * (n - 2) / 6;
    if (total_triples <= static_cast<std::uint64_t>(params.iterations)) {
        for (std::size_t i = 0; i + 2 < n; ++i)
            for (std::size_t j = i + 1; j + 1 < n; ++j)
                for (std::size_t k = j + 1; k < n; ++k) consider(corr[i], corr[j], corr[k]);
    } else {
        Rng rng(params.seed);
        for (int it = 0; it < params.iterations; ++it) {
            const std::size_t i = rng.below(n);
            std::size_t j, k;
            do { j = rng.below(n); } while (j == i);
            do { k = rng.below(n); } while (k == i || k == j);
            consider(corr[i], corr[j], corr[k]);
        }
    }
    if (!have_model) return result; // every sampled triple was degenerate

    AffineTransform final_model = best_model;
    if (!refit_least_squares(corr, best_model, thr_sq, final_model)) {
        final_model = best_model;
    }
    const Consensus final_c = score_model(corr, final_model, thr_sq);
    result.inlier_count = final_c.count;
    result.verified = final_c.count >= params.min_inliers;
    if (final_c.count >= 3) result.transform = final_model;
    return result;
}

std::vector<RerankedCandidate> sv_rerank(const ImageId& query, std::span<const ImageId> candidates,
                                         const LocalFeatureSet& features,
                                         const RansacParams& params) {
    std::vector<RerankedCandidate> out(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) out[i].id = candidates[i];
    const std::vector<Keypoint>* qkps = features.find(query);
    if (qkps != nullptr && !qkps->empty()) {
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const std::vector<Keypoint>* ckps = features.find(candidates[i]);
            if (ckps == nullptr || ckps->empty()) continue;
            const auto corr = match_features(*qkps, *ckps, params.ratio);
            RansacParams pair_params = params;
            pair_params.seed = pair_seed(params.seed, query, candidates[i]);
            const VerificationResult res = ransac_affine(corr, pair_params);
            out[i].inliers = res.inlier_count;
            out[i].verified = res.verified;
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const RerankedCandidate& a, const RerankedCandidate& b) {
        return a.inliers > b.inliers; // stable keeps the original rank on ties
    });
    return out;
}

} // namespace lre
