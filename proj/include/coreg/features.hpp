#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "coreg/pullback.hpp"

namespace coreg {

class DegenerateVessel : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TooFewFrames : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One frame's longitudinal descriptor. All components live in [0,1] so the
/// alignment weights are comparable across channels.
struct LongFeatureVector {
    double lumen_area_norm = 0.0;
    double side_branch_area_norm = 0.0;
    double calcium_degree = 0.0;
    double norm_position = 0.0;

    double operator[](std::size_t k) const {
        switch (k) {
            case 0: return lumen_area_norm;
            case 1: return side_branch_area_norm;
            case 2: return calcium_degree;
            default: return norm_position;
        }
    }
    double& operator[](std::size_t k) {
        switch (k) {
            case 0: return lumen_area_norm;
            case 1: return side_branch_area_norm;
            case 2: return calcium_degree;
            default: return norm_position;
        }
    }
};

inline constexpr std::size_t kLongFeatureCount = 4;

struct LongFeatureSequence {
    Modality modality = Modality::IVUS;
    std::vector<LongFeatureVector> vectors;
    std::vector<int> source_frame_indices;  // back-pointers into the pullback

    std::size_t size() const { return vectors.size(); }
};

/// Per-direction channels used by the rotation search. radius_centered is
/// mean-free so only the eccentricity shape (not the vessel caliber)
/// contributes to circular correlation.
struct CircProfile {
    std::vector<double> radius_centered;  // kCircBins, mm, mean subtracted
    std::vector<double> side_branch;      // kCircBins, normalized area or 0
    std::vector<double> calcium;          // kCircBins, 0 or 1
};

/// Builds one feature vector per frame (all frames retained):
/// lumen area normalized by the pullback maximum, the ingested side-branch
/// area clamped to [0,1] (0 when absent), the fraction of calcified bins,
/// and the relative frame position index/(N-1).
inline LongFeatureSequence extract_long_features(const Pullback& p) {
    double max_area = 0.0;
    for (const RawFrame& f : p.frames) max_area = std::max(max_area, f.lumen_area_mm2);
    if (!(max_area > 0.0)) {
        throw DegenerateVessel("maximum lumen area is not positive");
    }
    LongFeatureSequence seq;
    seq.modality = p.modality;
    const std::size_t n = p.frames.size();
    seq.vectors.reserve(n);
    seq.source_frame_indices.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const RawFrame& f = p.frames[i];
        LongFeatureVector v;
        v.lumen_area_norm = f.lumen_area_mm2 / max_area;
        v.side_branch_area_norm =
            f.side_branch ? std::clamp(f.side_branch->area, 0.0, 1.0) : 0.0;
        v.calcium_degree = f.calcium_fraction();
        v.norm_position = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
        seq.vectors.push_back(v);
        seq.source_frame_indices.push_back(f.frame_index);
    }
    return seq;
}

namespace detail {

/// Reflects an out-of-range index back into [0, n) with the edge sample
/// repeated (... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...). Periodic with
/// period 2n, so arbitrarily long kernel tails fold correctly.
inline std::size_t mirror_index(long long i, std::size_t n) {
    const long long period = 2 * static_cast<long long>(n);
    long long m = i % period;
    if (m < 0) m += period;
    if (m >= static_cast<long long>(n)) m = period - 1 - m;
    return static_cast<std::size_t>(m);
}

inline std::vector<double> gaussian_kernel(double sigma) {
    const long long radius = static_cast<long long>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (long long d = -radius; d <= radius; ++d) {
        double w = std::exp(-static_cast<double>(d * d) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(d + radius)] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

inline std::vector<double> smooth_channel(const std::vector<double>& x,
                                          const std::vector<double>& kernel) {
    const std::size_t n = x.size();
    const long long radius = static_cast<long long>(kernel.size() / 2);
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (long long d = -radius; d <= radius; ++d) {
            acc += kernel[static_cast<std::size_t>(d + radius)] *
                   x[mirror_index(static_cast<long long>(i) + d, n)];
        }
        out[i] = acc;
    }
    return out;
}

}  // namespace detail

/// Convolves each feature channel along the frame axis with a discrete
/// Gaussian truncated at +/-ceil(3*sigma). Boundaries are handled by
/// mirror-folding the sequence, so every output stays a convex combination
/// of inputs: constants are preserved exactly and [0,1] ranges survive.
/// sigma = 0 is the identity.
inline LongFeatureSequence gaussian_smooth(const LongFeatureSequence& seq, double sigma) {
    if (!(sigma > 0.0) || seq.vectors.empty()) return seq;
    const std::vector<double> kernel = detail::gaussian_kernel(sigma);
    const std::size_t n = seq.vectors.size();
    LongFeatureSequence out = seq;
    std::vector<double> channel(n);
    for (std::size_t k = 0; k < kLongFeatureCount; ++k) {
        for (std::size_t i = 0; i < n; ++i) channel[i] = seq.vectors[i][k];
        std::vector<double> smoothed = detail::smooth_channel(channel, kernel);
        for (std::size_t i = 0; i < n; ++i) out.vectors[i][k] = smoothed[i];
    }
    return out;
}

/// Thins a sequence to alignment resolution: IVUS keeps exactly the
/// ED-flagged frames, OCT keeps every second vector (positions 0,2,4,...).
/// The pullback supplies the ED flags; it must be the sequence's source.
inline LongFeatureSequence downsample(const LongFeatureSequence& seq, const Pullback& p) {
    LongFeatureSequence out;
    out.modality = seq.modality;
    if (seq.modality == Modality::IVUS) {
        for (std::size_t i = 0; i < seq.vectors.size() && i < p.frames.size(); ++i) {
            if (p.frames[i].is_ed) {
                out.vectors.push_back(seq.vectors[i]);
                out.source_frame_indices.push_back(seq.source_frame_indices[i]);
            }
        }
    } else {
        for (std::size_t i = 0; i < seq.vectors.size(); i += 2) {
            out.vectors.push_back(seq.vectors[i]);
            out.source_frame_indices.push_back(seq.source_frame_indices[i]);
        }
    }
    if (out.vectors.size() < 2) {
        throw TooFewFrames("downsampled sequence has fewer than 2 frames");
    }
    return out;
}

/// Samples one frame's circumferential channels. The side-branch channel
/// paints the branch area over its angular extent, inclusive and circular
/// (bin_start may exceed bin_end when the branch wraps past bin 179).
inline CircProfile extract_circ_profile(const RawFrame& f) {
    CircProfile prof;
    prof.radius_centered.resize(kCircBins, 0.0);
    prof.side_branch.resize(kCircBins, 0.0);
    prof.calcium.resize(kCircBins, 0.0);

    double mean = 0.0;
    for (double r : f.lumen_radius_profile) mean += r;
    mean /= static_cast<double>(kCircBins);
    for (int b = 0; b < kCircBins; ++b) {
        prof.radius_centered[b] = f.lumen_radius_profile[b] - mean;
    }

    if (f.side_branch) {
        const SideBranch& sb = *f.side_branch;
        int b = sb.bin_start;
        while (true) {
            prof.side_branch[b] = sb.area;
            if (b == sb.bin_end) break;
            b = (b + 1) % kCircBins;
        }
    }

    for (int b = 0; b < kCircBins; ++b) {
        prof.calcium[b] = f.calcium_arc[b] ? 1.0 : 0.0;
    }
    return prof;
}

}  // namespace coreg
