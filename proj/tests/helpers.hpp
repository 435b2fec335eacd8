#pragma once

// Shared builders for the test suites: hand-sized pullbacks, frames and
// circular profiles with just enough structure to exercise each contract.

#include <coreg/features.hpp>
#include <coreg/prng.hpp>
#include <coreg/pullback.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

namespace testutil {

/// A frame with a circular lumen of the given area, no side branch and an
/// optional number of leading calcified bins.
inline coreg::RawFrame make_frame(int index, double position_mm, double area_mm2,
                                  bool is_ed = true, int calcium_bins = 0) {
    coreg::RawFrame f;
    f.frame_index = index;
    f.position_mm = position_mm;
    f.is_ed = is_ed;
    f.lumen_area_mm2 = area_mm2;
    const double r = std::sqrt(area_mm2 / 3.14159265358979323846);
    f.lumen_radius_profile.assign(coreg::kCircBins, r);
    f.calcium_arc.assign(coreg::kCircBins, 0);
    for (int b = 0; b < calcium_bins && b < coreg::kCircBins; ++b) f.calcium_arc[b] = 1;
    return f;
}

/// Pullback of n frames with areas varying linearly, every frame ED-flagged.
inline coreg::Pullback make_pullback(int n, double spacing_mm = 0.5,
                                     double area0 = 8.0, double area_step = 0.25,
                                     coreg::Modality m = coreg::Modality::IVUS) {
    coreg::Pullback p;
    p.modality = m;
    p.frame_spacing_mm = spacing_mm;
    for (int i = 0; i < n; ++i) {
        p.frames.push_back(make_frame(i, i * spacing_mm, area0 + i * area_step));
    }
    return p;
}

/// A profile with variance in every channel so NCC has signal to lock onto.
inline coreg::CircProfile make_profile(std::uint64_t seed) {
    coreg::SplitMix64 rng(seed);
    coreg::CircProfile p;
    p.radius_centered.resize(coreg::kCircBins);
    p.side_branch.assign(coreg::kCircBins, 0.0);
    p.calcium.assign(coreg::kCircBins, 0.0);
    for (int b = 0; b < coreg::kCircBins; ++b) {
        p.radius_centered[b] = rng.uniform(-0.3, 0.3);
    }
    double mean = 0.0;
    for (double v : p.radius_centered) mean += v;
    mean /= coreg::kCircBins;
    for (double& v : p.radius_centered) v -= mean;
    const int sb0 = static_cast<int>(rng.uniform_below(coreg::kCircBins));
    for (int d = 0; d < 12; ++d) p.side_branch[(sb0 + d) % coreg::kCircBins] = 0.5;
    const int ca0 = static_cast<int>(rng.uniform_below(coreg::kCircBins));
    for (int d = 0; d < 18; ++d) p.calcium[(ca0 + d) % coreg::kCircBins] = 1.0;
    return p;
}

/// Same content displaced counterclockwise by k bins: out[t] = in[t - k].
inline coreg::CircProfile rotate_profile(const coreg::CircProfile& in, int k) {
    const int n = coreg::kCircBins;
    coreg::CircProfile out;
    out.radius_centered.resize(n);
    out.side_branch.resize(n);
    out.calcium.resize(n);
    for (int t = 0; t < n; ++t) {
        const int s = ((t - k) % n + n) % n;
        out.radius_centered[t] = in.radius_centered[s];
        out.side_branch[t] = in.side_branch[s];
        out.calcium[t] = in.calcium[s];
    }
    return out;
}

}  // namespace testutil
