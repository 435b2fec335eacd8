#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coreg/circumferential.hpp"
#include "coreg/config.hpp"
#include "coreg/dtw.hpp"
#include "coreg/features.hpp"
#include "coreg/matrix.hpp"
#include "coreg/pullback.hpp"

namespace coreg {

/// Everything one registration produces, intermediates included so
/// callers can dump or inspect them.
struct RegistrationResult {
    std::vector<int> ivus_ed_frames;         // IVUS frame_index per ED frame
    std::vector<double> full_mapping;        // fractional OCT frame index per ED frame
    std::vector<double> per_frame_rotation;  // degrees in [0,360) per ED frame
    std::vector<std::pair<int, int>> path;   // DTW path on downsampled indices
    std::vector<AnchorPair> anchors;
    std::vector<double> anchor_rotation_deg;
    Matrix D;              // distance matrix (downsampled IVUS x OCT)
    Matrix C;              // cumulative cost matrix
    RotationCostMatrix R;  // anchors x 180 rotation bins
    EngineConfig config;
    std::vector<std::string> warnings;
    bool degenerate = false;  // no usable anchors; rotations defaulted to 0
    double wall_clock_ms = 0.0;
};

namespace detail {

/// Position (into `frames`) of the frame whose index is closest to the
/// fractional index f; exact midpoints resolve to the higher frame.
inline std::size_t nearest_frame_pos(const std::vector<int>& frame_indices, double f) {
    auto it = std::lower_bound(frame_indices.begin(), frame_indices.end(), f,
                               [](int a, double b) { return static_cast<double>(a) < b; });
    if (it == frame_indices.begin()) return 0;
    if (it == frame_indices.end()) return frame_indices.size() - 1;
    const std::size_t hi = static_cast<std::size_t>(it - frame_indices.begin());
    const std::size_t lo = hi - 1;
    const double d_lo = f - static_cast<double>(frame_indices[lo]);
    const double d_hi = static_cast<double>(frame_indices[hi]) - f;
    return d_lo < d_hi ? lo : hi;
}

}  // namespace detail

/// Runs the full two-stage registration: smoothed longitudinal features
/// aligned by feature-weighted DTW, then per-anchor rotation recovery with
/// the regularized path search, interpolated to every ED frame. Throws the
/// feature/config error types on invalid input; a pair with no usable
/// anchors degrades to zero rotation with a warning and `degenerate` set.
inline RegistrationResult register_pullbacks(const Pullback& ivus, const Pullback& oct,
                                             const EngineConfig& cfg) {
    validate(cfg);
    const auto t0 = std::chrono::steady_clock::now();

    RegistrationResult res;
    res.config = cfg;

    LongFeatureSequence xi = gaussian_smooth(extract_long_features(ivus), cfg.sigma);
    LongFeatureSequence yo = gaussian_smooth(extract_long_features(oct), cfg.sigma);
    const LongFeatureSequence X = downsample(xi, ivus);
    const LongFeatureSequence Y = downsample(yo, oct);

    LongitudinalResult lon = align_longitudinal(X, Y, cfg.long_weights);
    res.D = std::move(lon.D);
    res.C = std::move(lon.C);
    res.path = std::move(lon.path.pairs);
    res.full_mapping = std::move(lon.path.full_mapping);
    res.ivus_ed_frames = X.source_frame_indices;

    // Pair every ED frame with its nearest existing OCT frame; those pairs
    // are the anchor candidates.
    std::vector<int> oct_indices;
    oct_indices.reserve(oct.frames.size());
    for (const RawFrame& f : oct.frames) oct_indices.push_back(f.frame_index);

    std::vector<int> oct_partner(res.ivus_ed_frames.size());
    std::vector<const RawFrame*> ivus_ptrs, oct_ptrs;
    std::vector<std::size_t> ivus_pos_of_ed;
    for (std::size_t i = 0; i < ivus.frames.size(); ++i) {
        if (ivus.frames[i].is_ed) ivus_pos_of_ed.push_back(i);
    }
    for (std::size_t k = 0; k < res.ivus_ed_frames.size(); ++k) {
        const std::size_t pos = detail::nearest_frame_pos(oct_indices, res.full_mapping[k]);
        oct_partner[k] = oct.frames[pos].frame_index;
        ivus_ptrs.push_back(&ivus.frames[ivus_pos_of_ed[k]]);
        oct_ptrs.push_back(&oct.frames[pos]);
    }

    res.anchors = select_anchors(res.ivus_ed_frames, oct_partner, ivus_ptrs, oct_ptrs,
                                 cfg.calcium_anchor_threshold);

    if (res.anchors.empty()) {
        res.degenerate = true;
        res.warnings.push_back(
            "no anchors (no side branches and not enough calcium); "
            "per-frame rotation defaulted to 0");
        res.R.values = Matrix(0, kCircBins);
        res.per_frame_rotation.assign(res.ivus_ed_frames.size(), 0.0);
    } else {
        std::vector<CircProfile> ivus_profiles, oct_profiles;
        std::vector<double> positions;
        ivus_profiles.reserve(res.anchors.size());
        oct_profiles.reserve(res.anchors.size());
        for (const AnchorPair& a : res.anchors) {
            const std::size_t ip = detail::nearest_frame_pos(
                res.ivus_ed_frames, static_cast<double>(a.ivus_frame));
            ivus_profiles.push_back(extract_circ_profile(*ivus_ptrs[ip]));
            const std::size_t op = detail::nearest_frame_pos(
                oct_indices, static_cast<double>(a.oct_frame));
            oct_profiles.push_back(extract_circ_profile(oct.frames[op]));
            positions.push_back(a.position_mm);
        }
        res.R = rotation_cost_matrix(res.anchors, ivus_profiles, oct_profiles,
                                     cfg.circ_weights, cfg.calcium_anchor_threshold,
                                     cfg.strict_sidebranch_zeroing);
        const std::vector<int> bins =
            rotation_path(res.R, cfg.lambda, cfg.delta_max_deg_per_mm, positions);
        res.anchor_rotation_deg.reserve(bins.size());
        for (int b : bins) res.anchor_rotation_deg.push_back(wrap360(b * res.R.bin_deg()));
        res.per_frame_rotation =
            interpolate_rotations(res.anchors, res.anchor_rotation_deg, res.ivus_ed_frames);
    }

    const auto t1 = std::chrono::steady_clock::now();
    res.wall_clock_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return res;
}

inline nlohmann::json registration_result_to_json(const RegistrationResult& r) {
    nlohmann::json anchors = nlohmann::json::array();
    for (std::size_t a = 0; a < r.anchors.size(); ++a) {
        anchors.push_back({{"ivus_frame", r.anchors[a].ivus_frame},
                           {"oct_frame", r.anchors[a].oct_frame},
                           {"has_side_branch", r.anchors[a].has_side_branch},
                           {"calcium_fraction", r.anchors[a].calcium_fraction},
                           {"rotation_deg", r.anchor_rotation_deg[a]}});
    }
    nlohmann::json path = nlohmann::json::array();
    for (const auto& [i, j] : r.path) path.push_back({i, j});
    return nlohmann::json{{"ivus_ed_frames", r.ivus_ed_frames},
                          {"full_mapping", r.full_mapping},
                          {"per_frame_rotation", r.per_frame_rotation},
                          {"anchors", anchors},
                          {"path", path},
                          {"config", engine_config_to_json(r.config)},
                          {"degenerate", r.degenerate},
                          {"warnings", r.warnings},
                          {"wall_clock_ms", r.wall_clock_ms}};
}

}  // namespace coreg
