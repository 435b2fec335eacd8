#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "coreg/features.hpp"
#include "coreg/matrix.hpp"

namespace coreg {

/// Channel weights of the circular correlation. Defaults are the tuned
/// values the engine ships with.
struct CircWeights {
    double w_sb = 1.0;
    double w_calc = 1.0;
    double w_ecc = 0.1;

    friend bool operator==(const CircWeights&, const CircWeights&) = default;
};

/// One matched frame pair eligible for rotation estimation.
struct AnchorPair {
    int ivus_frame = 0;
    int oct_frame = 0;
    bool has_side_branch = false;   // side branch present in either frame
    double calcium_fraction = 0.0;  // min of the two frames' calcified fractions
    double position_mm = 0.0;       // IVUS frame position, used for the rate cap
};

/// Per-anchor correlation over every rotation bin, plus the rows that were
/// blanked because the anchor lacks the features rotation can lock onto.
struct RotationCostMatrix {
    Matrix values;  // A x bins, entries in [-1, 1]
    std::vector<std::size_t> zeroed_rows;

    std::size_t anchors() const { return values.rows(); }
    std::size_t bins() const { return values.cols(); }
    double bin_deg() const { return 360.0 / static_cast<double>(values.cols()); }
};

namespace detail {

/// Normalized circular cross-correlation of one channel at every shift.
/// correlate(s) pairs a[t] with b[(t+s) mod n], so if b is a copy of a
/// displaced counterclockwise by k bins the peak lands at s = k. Channels
/// without variance carry no rotational information and yield all zeros.
inline void circ_ncc_channel(const std::vector<double>& a,
                             const std::vector<double>& b,
                             std::vector<double>& out) {
    const std::size_t n = a.size();
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        mean_a += a[t];
        mean_b += b[t];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);

    std::vector<double> ca(n), cb(n);
    double ss_a = 0.0, ss_b = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        ca[t] = a[t] - mean_a;
        cb[t] = b[t] - mean_b;
        ss_a += ca[t] * ca[t];
        ss_b += cb[t] * cb[t];
    }
    if (ss_a <= 1e-12 || ss_b <= 1e-12) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    const double denom = std::sqrt(ss_a * ss_b);
    for (std::size_t s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            acc += ca[t] * cb[(t + s) % n];
        }
        out[s] = acc / denom;
    }
}

}  // namespace detail

/// Weighted circular NCC between two profiles: per-channel zero-mean,
/// unit-variance circular correlation at each of the 180 shifts, averaged
/// with the channel weights. Every value lies in [-1, 1]; shift s
/// corresponds to a rotation of 2s degrees.
inline std::vector<double> weighted_circular_ncc(const CircProfile& a,
                                                 const CircProfile& b,
                                                 const CircWeights& w) {
    const std::size_t n = a.radius_centered.size();
    std::vector<double> out(n, 0.0), channel(n);
    const double w_sum = w.w_sb + w.w_calc + w.w_ecc;

    detail::circ_ncc_channel(a.side_branch, b.side_branch, channel);
    for (std::size_t s = 0; s < n; ++s) out[s] += w.w_sb * channel[s];
    detail::circ_ncc_channel(a.calcium, b.calcium, channel);
    for (std::size_t s = 0; s < n; ++s) out[s] += w.w_calc * channel[s];
    detail::circ_ncc_channel(a.radius_centered, b.radius_centered, channel);
    for (std::size_t s = 0; s < n; ++s) out[s] += w.w_ecc * channel[s];

    for (std::size_t s = 0; s < n; ++s) {
        out[s] = std::clamp(out[s] / w_sum, -1.0, 1.0);
    }
    return out;
}

/// Keeps the matched pairs worth estimating rotation on: those where either
/// frame shows a side branch, or both frames carry at least
/// calcium_threshold of calcified arc. An empty result means no anchors
/// (callers fall back to zero rotation and report a warning).
inline std::vector<AnchorPair> select_anchors(const std::vector<int>& ivus_frames,
                                              const std::vector<int>& oct_frames,
                                              const std::vector<const RawFrame*>& ivus,
                                              const std::vector<const RawFrame*>& oct,
                                              double calcium_threshold) {
    std::vector<AnchorPair> anchors;
    for (std::size_t k = 0; k < ivus_frames.size(); ++k) {
        const RawFrame& fi = *ivus[k];
        const RawFrame& fo = *oct[k];
        AnchorPair a;
        a.ivus_frame = ivus_frames[k];
        a.oct_frame = oct_frames[k];
        a.has_side_branch = fi.side_branch.has_value() || fo.side_branch.has_value();
        a.calcium_fraction = std::min(fi.calcium_fraction(), fo.calcium_fraction());
        a.position_mm = fi.position_mm;
        if (a.has_side_branch || a.calcium_fraction >= calcium_threshold) {
            anchors.push_back(a);
        }
    }
    return anchors;
}

/// Builds the anchor-by-rotation-bin correlation matrix. Rows whose anchor
/// fails the feature test are zeroed and recorded: by default an anchor
/// passes with a side branch or enough calcium; with strict_sidebranch
/// only side-branch anchors keep their data terms (calcium-only anchors
/// then ride on the smoothness term alone).
inline RotationCostMatrix rotation_cost_matrix(
    const std::vector<AnchorPair>& anchors,
    const std::vector<CircProfile>& ivus_profiles,
    const std::vector<CircProfile>& oct_profiles,
    const CircWeights& w,
    double calcium_threshold,
    bool strict_sidebranch = false) {
    const std::size_t A = anchors.size();
    const std::size_t bins = A ? ivus_profiles[0].radius_centered.size() : kCircBins;
    RotationCostMatrix R;
    R.values = Matrix(A, bins);
    for (std::size_t a = 0; a < A; ++a) {
        const bool keep = strict_sidebranch
                              ? anchors[a].has_side_branch
                              : (anchors[a].has_side_branch ||
                                 anchors[a].calcium_fraction >= calcium_threshold);
        if (!keep) {
            R.zeroed_rows.push_back(a);
            continue;  // row stays all zero
        }
        std::vector<double> row =
            weighted_circular_ncc(ivus_profiles[a], oct_profiles[a], w);
        for (std::size_t s = 0; s < bins; ++s) R.values(a, s) = row[s];
    }
    return R;
}

namespace detail {

inline int circular_bin_diff(int a, int b, int bins) {
    int d = std::abs(a - b);
    return std::min(d, bins - d);
}

}  // namespace detail

/// Regularized rotation search. Over all bin tuples (one per anchor)
/// maximizes
///     sum_a R[a][bin_a]  -  lambda * sum_a (circular bin change)^2
/// subject to the hard cap: consecutive rotations may differ by at most
/// delta_max_deg_per_mm times the anchor gap in mm. Solved by dynamic
/// programming over rows with backtracking from the last row; ties prefer
/// the smaller angular change, then the smaller bin index. Returns one bin
/// index per anchor (angle = bin * 360 / bins).
inline std::vector<int> rotation_path(const RotationCostMatrix& R,
                                      double lambda,
                                      double delta_max_deg_per_mm,
                                      const std::vector<double>& anchor_positions_mm) {
    const int A = static_cast<int>(R.anchors());
    const int bins = static_cast<int>(R.bins());
    if (A == 0) return {};
    const double bin_deg = R.bin_deg();

    std::vector<std::vector<double>> score(A, std::vector<double>(bins));
    std::vector<std::vector<int>> pred(A, std::vector<int>(bins, -1));
    for (int b = 0; b < bins; ++b) score[0][b] = R.values(0, b);

    for (int a = 1; a < A; ++a) {
        const double gap_mm = std::abs(anchor_positions_mm[a] - anchor_positions_mm[a - 1]);
        const double cap_deg = delta_max_deg_per_mm * gap_mm;
        int max_d = static_cast<int>(std::floor(cap_deg / bin_deg + 1e-9));
        max_d = std::min(max_d, bins / 2);
        for (int b = 0; b < bins; ++b) {
            double best = 0.0;
            int best_p = -1, best_d = 0;
            for (int p = 0; p < bins; ++p) {
                const int d = detail::circular_bin_diff(b, p, bins);
                if (d > max_d) continue;
                const double cand = score[a - 1][p] - lambda * static_cast<double>(d) * d;
                if (best_p < 0 || cand > best ||
                    (cand == best && (d < best_d || (d == best_d && p < best_p)))) {
                    best = cand;
                    best_p = p;
                    best_d = d;
                }
            }
            score[a][b] = R.values(a, b) + best;
            pred[a][b] = best_p;
        }
    }

    int best_bin = 0;
    for (int b = 1; b < bins; ++b) {
        if (score[A - 1][b] > score[A - 1][best_bin]) best_bin = b;
    }
    std::vector<int> bins_out(A);
    bins_out[A - 1] = best_bin;
    for (int a = A - 1; a > 0; --a) {
        bins_out[a - 1] = pred[a][bins_out[a]];
    }
    return bins_out;
}

/// Reduces an angle to [0, 360).
inline double wrap360(double deg) {
    double r = std::fmod(deg, 360.0);
    if (r < 0.0) r += 360.0;
    if (r == 360.0) r = 0.0;
    return r;
}

/// Maps an angular difference to the short way around, in (-180, 180].
inline double signed_angle_diff(double deg) {
    double d = std::fmod(deg, 360.0);
    if (d > 180.0) d -= 360.0;
    if (d <= -180.0) d += 360.0;
    return d;
}

/// Spreads the anchor rotations over every IVUS ED frame: anchor angles are
/// unwrapped (consecutive differences taken the short way around), linearly
/// interpolated by frame index, clamped to the nearest anchor outside the
/// anchor span, and reduced back into [0, 360).
inline std::vector<double> interpolate_rotations(const std::vector<AnchorPair>& anchors,
                                                 const std::vector<double>& anchor_deg,
                                                 const std::vector<int>& ed_frame_indices) {
    std::vector<double> out(ed_frame_indices.size(), 0.0);
    if (anchors.empty()) return out;

    std::vector<double> unwrapped(anchors.size());
    unwrapped[0] = anchor_deg[0];
    for (std::size_t a = 1; a < anchors.size(); ++a) {
        unwrapped[a] = unwrapped[a - 1] + signed_angle_diff(anchor_deg[a] - anchor_deg[a - 1]);
    }

    for (std::size_t k = 0; k < ed_frame_indices.size(); ++k) {
        const double x = ed_frame_indices[k];
        double val;
        if (x <= anchors.front().ivus_frame) {
            val = unwrapped.front();
        } else if (x >= anchors.back().ivus_frame) {
            val = unwrapped.back();
        } else {
            std::size_t a = 0;
            while (anchors[a + 1].ivus_frame < x) ++a;
            const double x0 = anchors[a].ivus_frame;
            const double x1 = anchors[a + 1].ivus_frame;
            const double t = (x - x0) / (x1 - x0);
            val = unwrapped[a] + t * (unwrapped[a + 1] - unwrapped[a]);
        }
        out[k] = wrap360(val);
    }
    return out;
}

}  // namespace coreg
