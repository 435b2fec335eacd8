#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "coreg/circumferential.hpp"
#include "coreg/config.hpp"
#include "coreg/prng.hpp"
#include "coreg/pullback.hpp"

// Synthetic paired pullbacks with analytically known alignment. The
// anatomy lives directly in feature space (areas, radius profiles, branch
// footprints, calcium arcs); the OCT copy is resampled through a
// configurable longitudinal warp and rotated by a configurable field, so
// every generated pair carries its exact ground truth.

namespace coreg {

struct LumenControlPoint {
    double position_mm = 0.0;
    double area_mm2 = 10.0;
};

/// One-fold lumen eccentricity: radius(theta) = r0 * (1 + amplitude *
/// cos(theta - phase)). The phase may drift along the vessel so the
/// eccentricity channel carries rotational information everywhere.
struct EccentricityConfig {
    double amplitude = 0.15;
    double phase_deg = 0.0;
    double phase_rate_deg_per_mm = 0.0;
};

struct BranchSpec {
    double position_mm = 0.0;  // longitudinal center
    double angle_deg = 0.0;    // angular center of the ostium
    double extent_mm = 2.0;    // full longitudinal footprint
    double arc_deg = 40.0;     // full angular footprint
    double area = 0.5;         // normalized peak area, in [0,1]
};

struct CalciumSpec {
    double start_mm = 0.0;
    double end_mm = 0.0;
    double angle_start_deg = 0.0;  // arc runs counterclockwise start -> end
    double angle_end_deg = 0.0;
};

/// Longitudinal remap: the OCT frame recorded at catheter position oct_mm
/// actually shows the vessel at ivus_mm. Interior points only; (0,0) and
/// (length,length) are pinned automatically.
struct WarpPoint {
    double oct_mm = 0.0;
    double ivus_mm = 0.0;
};

struct RotationPoint {
    double position_mm = 0.0;
    double rotation_deg = 0.0;
};

struct NoiseLevels {
    double area_sigma_mm2 = 0.0;
    double radius_sigma_mm = 0.0;
    double side_branch_sigma = 0.0;
    double calcium_flip_prob = 0.0;
};

struct SynthConfig {
    double vessel_length_mm = 50.0;
    double ivus_ed_spacing_mm = 0.5;
    double oct_spacing_mm = 0.4;
    std::uint64_t seed = 1;
    std::vector<LumenControlPoint> lumen_area_control_points = {{0.0, 10.0}};
    EccentricityConfig eccentricity;
    std::vector<BranchSpec> side_branches;
    std::vector<CalciumSpec> calcium_deposits;
    std::vector<WarpPoint> warp_control_points;  // empty = identity
    std::vector<RotationPoint> rotation_control_points;  // empty = zero field
    NoiseLevels noise;
};

struct GroundTruth {
    std::vector<double> true_mapping;   // fractional OCT index per IVUS ED frame
    std::vector<double> true_rotation;  // degrees per IVUS ED frame, in [0,360)
};

struct SynthPair {
    Pullback ivus;
    Pullback oct;
    GroundTruth truth;
};

namespace detail {

/// Piecewise-linear curve through (xs, ys), clamped to the end values
/// outside the knot span. xs must be strictly increasing.
inline double piecewise_linear(const std::vector<double>& xs,
                               const std::vector<double>& ys, double x) {
    if (xs.empty()) return 0.0;
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    std::size_t k = 0;
    while (xs[k + 1] < x) ++k;
    const double t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    return ys[k] + t * (ys[k + 1] - ys[k]);
}

inline int mod_bins(int b) {
    int m = b % kCircBins;
    return m < 0 ? m + kCircBins : m;
}

}  // namespace detail

inline void validate(const SynthConfig& c) {
    if (!(c.vessel_length_mm > 0)) throw InvalidConfig("vessel_length_mm must be > 0");
    if (!(c.ivus_ed_spacing_mm > 0)) throw InvalidConfig("ivus_ed_spacing_mm must be > 0");
    if (!(c.oct_spacing_mm > 0)) throw InvalidConfig("oct_spacing_mm must be > 0");
    if (c.vessel_length_mm < c.ivus_ed_spacing_mm || c.vessel_length_mm < c.oct_spacing_mm) {
        throw InvalidConfig("vessel too short for the configured spacings");
    }
    if (c.lumen_area_control_points.empty()) {
        throw InvalidConfig("lumen_area_control_points must not be empty");
    }
    for (std::size_t i = 0; i < c.lumen_area_control_points.size(); ++i) {
        if (!(c.lumen_area_control_points[i].area_mm2 > 0)) {
            throw InvalidConfig("lumen control point area must be > 0");
        }
        if (i > 0 && c.lumen_area_control_points[i].position_mm <=
                         c.lumen_area_control_points[i - 1].position_mm) {
            throw InvalidConfig("lumen control points must have strictly increasing positions");
        }
    }
    if (c.eccentricity.amplitude < 0 || c.eccentricity.amplitude > 0.9) {
        throw InvalidConfig("eccentricity amplitude must be in [0, 0.9]");
    }
    for (const BranchSpec& b : c.side_branches) {
        if (!(b.extent_mm > 0)) throw InvalidConfig("side branch extent_mm must be > 0");
        if (!(b.arc_deg > 0) || b.arc_deg > 360) {
            throw InvalidConfig("side branch arc_deg must be in (0, 360]");
        }
        if (b.area < 0 || b.area > 1) throw InvalidConfig("side branch area must be in [0,1]");
    }
    for (const CalciumSpec& d : c.calcium_deposits) {
        if (d.end_mm < d.start_mm) throw InvalidConfig("calcium deposit end_mm < start_mm");
    }
    double prev_oct = 0.0, prev_ivus = 0.0;
    for (const WarpPoint& w : c.warp_control_points) {
        if (w.oct_mm <= prev_oct || w.ivus_mm <= prev_ivus) {
            throw InvalidConfig("warp control points must be strictly increasing in both coordinates");
        }
        if (w.oct_mm >= c.vessel_length_mm || w.ivus_mm >= c.vessel_length_mm) {
            throw InvalidConfig("warp control points must lie inside (0, vessel_length_mm)");
        }
        prev_oct = w.oct_mm;
        prev_ivus = w.ivus_mm;
    }
    for (std::size_t i = 1; i < c.rotation_control_points.size(); ++i) {
        if (c.rotation_control_points[i].position_mm <=
            c.rotation_control_points[i - 1].position_mm) {
            throw InvalidConfig("rotation control points must have strictly increasing positions");
        }
    }
    const NoiseLevels& nz = c.noise;
    if (nz.area_sigma_mm2 < 0 || nz.radius_sigma_mm < 0 || nz.side_branch_sigma < 0) {
        throw InvalidConfig("noise sigmas must be >= 0");
    }
    if (nz.calcium_flip_prob < 0 || nz.calcium_flip_prob > 1) {
        throw InvalidConfig("calcium_flip_prob must be in [0,1]");
    }
}

namespace detail {

/// The warp as knot lists including the pinned endpoints, ready for
/// piecewise_linear in either direction.
struct WarpCurve {
    std::vector<double> oct_mm;
    std::vector<double> ivus_mm;

    static WarpCurve from(const SynthConfig& c) {
        WarpCurve w;
        w.oct_mm.push_back(0.0);
        w.ivus_mm.push_back(0.0);
        for (const WarpPoint& p : c.warp_control_points) {
            w.oct_mm.push_back(p.oct_mm);
            w.ivus_mm.push_back(p.ivus_mm);
        }
        w.oct_mm.push_back(c.vessel_length_mm);
        w.ivus_mm.push_back(c.vessel_length_mm);
        return w;
    }

    double vessel_at(double oct_pos) const { return piecewise_linear(oct_mm, ivus_mm, oct_pos); }
    double oct_at(double vessel_pos) const { return piecewise_linear(ivus_mm, oct_mm, vessel_pos); }
};

inline double rotation_field(const SynthConfig& c, double v) {
    if (c.rotation_control_points.empty()) return 0.0;
    std::vector<double> xs, ys;
    xs.reserve(c.rotation_control_points.size());
    ys.reserve(c.rotation_control_points.size());
    for (const RotationPoint& p : c.rotation_control_points) {
        xs.push_back(p.position_mm);
        ys.push_back(p.rotation_deg);
    }
    return piecewise_linear(xs, ys, v);
}

/// Renders the anatomy at vessel coordinate v, noiseless and unrotated.
inline RawFrame render_frame(const SynthConfig& c, double v) {
    RawFrame f;
    std::vector<double> xs, ys;
    for (const LumenControlPoint& p : c.lumen_area_control_points) {
        xs.push_back(p.position_mm);
        ys.push_back(p.area_mm2);
    }
    f.lumen_area_mm2 = piecewise_linear(xs, ys, v);

    const double r0 = std::sqrt(f.lumen_area_mm2 / std::numbers::pi);
    const double phase_rad = (c.eccentricity.phase_deg +
                              c.eccentricity.phase_rate_deg_per_mm * v) *
                             std::numbers::pi / 180.0;
    f.lumen_radius_profile.resize(kCircBins);
    for (int b = 0; b < kCircBins; ++b) {
        const double theta = 2.0 * b * std::numbers::pi / 180.0;
        f.lumen_radius_profile[b] =
            r0 * (1.0 + c.eccentricity.amplitude * std::cos(theta - phase_rad));
    }

    // Pick the locally strongest branch; the footprint decays linearly
    // from the branch center to its longitudinal edges.
    const BranchSpec* best = nullptr;
    double best_area = 0.0;
    for (const BranchSpec& b : c.side_branches) {
        const double half = 0.5 * b.extent_mm;
        const double d = std::abs(v - b.position_mm);
        if (d > half) continue;
        const double local = b.area * (1.0 - d / half);
        if (local > best_area) {
            best_area = local;
            best = &b;
        }
    }
    if (best) {
        SideBranch sb;
        const double half_arc = 0.5 * best->arc_deg;
        if (best->arc_deg >= 360.0) {
            sb.bin_start = 0;
            sb.bin_end = kCircBins - 1;
        } else {
            sb.bin_start = mod_bins(static_cast<int>(std::llround((best->angle_deg - half_arc) / 2.0)));
            sb.bin_end = mod_bins(static_cast<int>(std::llround((best->angle_deg + half_arc) / 2.0)));
        }
        sb.area = best_area;
        f.side_branch = sb;
    }

    f.calcium_arc.assign(kCircBins, 0);
    for (const CalciumSpec& d : c.calcium_deposits) {
        if (v < d.start_mm || v > d.end_mm) continue;
        const int b0 = mod_bins(static_cast<int>(std::llround(d.angle_start_deg / 2.0)));
        const int b1 = mod_bins(static_cast<int>(std::llround(d.angle_end_deg / 2.0)));
        int b = b0;
        while (true) {
            f.calcium_arc[b] = 1;
            if (b == b1) break;
            b = (b + 1) % kCircBins;
        }
    }
    return f;
}

/// Displaces a frame counterclockwise by k bins: content that sat at bin t
/// moves to bin t+k.
inline void rotate_frame(RawFrame& f, int k) {
    k = mod_bins(k);
    if (k == 0) return;
    std::vector<double> radius(kCircBins);
    std::vector<std::uint8_t> calc(kCircBins);
    for (int t = 0; t < kCircBins; ++t) {
        radius[t] = f.lumen_radius_profile[mod_bins(t - k)];
        calc[t] = f.calcium_arc[mod_bins(t - k)];
    }
    f.lumen_radius_profile = std::move(radius);
    f.calcium_arc = std::move(calc);
    if (f.side_branch) {
        f.side_branch->bin_start = mod_bins(f.side_branch->bin_start + k);
        f.side_branch->bin_end = mod_bins(f.side_branch->bin_end + k);
    }
}

inline void apply_noise(RawFrame& f, const NoiseLevels& nz, SplitMix64& rng) {
    if (nz.area_sigma_mm2 > 0) {
        f.lumen_area_mm2 =
            std::max(0.05, f.lumen_area_mm2 + nz.area_sigma_mm2 * rng.next_gaussian());
    }
    if (nz.radius_sigma_mm > 0) {
        for (double& r : f.lumen_radius_profile) {
            r = std::max(0.05, r + nz.radius_sigma_mm * rng.next_gaussian());
        }
    }
    if (nz.side_branch_sigma > 0 && f.side_branch) {
        f.side_branch->area =
            std::clamp(f.side_branch->area + nz.side_branch_sigma * rng.next_gaussian(), 0.0, 1.0);
    }
    if (nz.calcium_flip_prob > 0) {
        for (auto& b : f.calcium_arc) {
            if (rng.next_double() < nz.calcium_flip_prob) b = b ? 0 : 1;
        }
    }
}

}  // namespace detail

/// Builds the matched pullback pair and its exact ground truth. Pure in
/// the config (seed included): the same config always yields the same
/// frames, byte for byte. The OCT pullback is resampled through the warp
/// and rotated by the field (quantized to whole 2-degree bins); ground
/// truth keeps the unquantized field.
inline SynthPair generate_pair(const SynthConfig& cfg) {
    validate(cfg);
    const detail::WarpCurve warp = detail::WarpCurve::from(cfg);
    const double L = cfg.vessel_length_mm;
    const int n = static_cast<int>(std::floor(L / cfg.ivus_ed_spacing_mm + 1e-9)) + 1;
    const int m = static_cast<int>(std::floor(L / cfg.oct_spacing_mm + 1e-9)) + 1;

    SynthPair out;
    out.ivus.modality = Modality::IVUS;
    out.ivus.frame_spacing_mm = cfg.ivus_ed_spacing_mm;
    out.oct.modality = Modality::OCT;
    out.oct.frame_spacing_mm = cfg.oct_spacing_mm;

    // Independent noise streams so regenerating one modality cannot
    // disturb the other.
    SplitMix64 ivus_rng(cfg.seed ^ 0x49565553ULL);
    SplitMix64 oct_rng(cfg.seed ^ 0x4F435400ULL);

    for (int i = 0; i < n; ++i) {
        const double v = i * cfg.ivus_ed_spacing_mm;
        RawFrame f = detail::render_frame(cfg, v);
        f.frame_index = i;
        f.position_mm = v;
        f.is_ed = true;
        detail::apply_noise(f, cfg.noise, ivus_rng);
        out.ivus.frames.push_back(std::move(f));
    }

    for (int j = 0; j < m; ++j) {
        const double p = j * cfg.oct_spacing_mm;
        const double v = warp.vessel_at(p);
        RawFrame f = detail::render_frame(cfg, v);
        f.frame_index = j;
        f.position_mm = p;
        f.is_ed = false;
        const double rot = detail::rotation_field(cfg, v);
        detail::rotate_frame(f, static_cast<int>(std::llround(rot / 2.0)));
        detail::apply_noise(f, cfg.noise, oct_rng);
        out.oct.frames.push_back(std::move(f));
    }

    out.truth.true_mapping.resize(n);
    out.truth.true_rotation.resize(n);
    for (int i = 0; i < n; ++i) {
        const double v = i * cfg.ivus_ed_spacing_mm;
        const double oct_index = warp.oct_at(v) / cfg.oct_spacing_mm;
        out.truth.true_mapping[i] =
            std::clamp(oct_index, 0.0, static_cast<double>(m - 1));
        out.truth.true_rotation[i] = wrap360(detail::rotation_field(cfg, v));
    }
    return out;
}

// --- configuration and ground-truth IO ---

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidConfig("synth config must be a JSON object");
    detail::require_keys(j,
                         {"vessel_length_mm", "ivus_ed_spacing_mm", "oct_spacing_mm",
                          "seed", "lumen_area_control_points", "eccentricity",
                          "side_branches", "calcium_deposits", "warp_control_points",
                          "rotation_control_points", "noise"},
                         "synth config");
    SynthConfig c;
    c.vessel_length_mm = detail::get_number(j, "vessel_length_mm", c.vessel_length_mm);
    c.ivus_ed_spacing_mm = detail::get_number(j, "ivus_ed_spacing_mm", c.ivus_ed_spacing_mm);
    c.oct_spacing_mm = detail::get_number(j, "oct_spacing_mm", c.oct_spacing_mm);
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer() && !j["seed"].is_number_unsigned()) {
            throw InvalidConfig("seed must be an integer");
        }
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("lumen_area_control_points")) {
        c.lumen_area_control_points.clear();
        for (const auto& p : j["lumen_area_control_points"]) {
            detail::require_keys(p, {"position_mm", "area_mm2"}, "lumen control point");
            c.lumen_area_control_points.push_back(
                {detail::get_number(p, "position_mm", 0.0),
                 detail::get_number(p, "area_mm2", 0.0)});
        }
    }
    if (j.contains("eccentricity")) {
        const auto& e = j["eccentricity"];
        detail::require_keys(e, {"amplitude", "phase_deg", "phase_rate_deg_per_mm"},
                             "eccentricity");
        c.eccentricity.amplitude = detail::get_number(e, "amplitude", c.eccentricity.amplitude);
        c.eccentricity.phase_deg = detail::get_number(e, "phase_deg", c.eccentricity.phase_deg);
        c.eccentricity.phase_rate_deg_per_mm =
            detail::get_number(e, "phase_rate_deg_per_mm", c.eccentricity.phase_rate_deg_per_mm);
    }
    if (j.contains("side_branches")) {
        for (const auto& b : j["side_branches"]) {
            detail::require_keys(b, {"position_mm", "angle_deg", "extent_mm", "arc_deg", "area"},
                                 "side branch");
            c.side_branches.push_back({detail::get_number(b, "position_mm", 0.0),
                                       detail::get_number(b, "angle_deg", 0.0),
                                       detail::get_number(b, "extent_mm", 2.0),
                                       detail::get_number(b, "arc_deg", 40.0),
                                       detail::get_number(b, "area", 0.5)});
        }
    }
    if (j.contains("calcium_deposits")) {
        for (const auto& d : j["calcium_deposits"]) {
            detail::require_keys(d, {"start_mm", "end_mm", "angle_start_deg", "angle_end_deg"},
                                 "calcium deposit");
            c.calcium_deposits.push_back({detail::get_number(d, "start_mm", 0.0),
                                          detail::get_number(d, "end_mm", 0.0),
                                          detail::get_number(d, "angle_start_deg", 0.0),
                                          detail::get_number(d, "angle_end_deg", 0.0)});
        }
    }
    if (j.contains("warp_control_points")) {
        for (const auto& w : j["warp_control_points"]) {
            detail::require_keys(w, {"oct_mm", "ivus_mm"}, "warp control point");
            c.warp_control_points.push_back({detail::get_number(w, "oct_mm", 0.0),
                                             detail::get_number(w, "ivus_mm", 0.0)});
        }
    }
    if (j.contains("rotation_control_points")) {
        for (const auto& r : j["rotation_control_points"]) {
            detail::require_keys(r, {"position_mm", "rotation_deg"}, "rotation control point");
            c.rotation_control_points.push_back({detail::get_number(r, "position_mm", 0.0),
                                                 detail::get_number(r, "rotation_deg", 0.0)});
        }
    }
    if (j.contains("noise")) {
        const auto& nz = j["noise"];
        detail::require_keys(
            nz, {"area_sigma_mm2", "radius_sigma_mm", "side_branch_sigma", "calcium_flip_prob"},
            "noise");
        c.noise.area_sigma_mm2 = detail::get_number(nz, "area_sigma_mm2", 0.0);
        c.noise.radius_sigma_mm = detail::get_number(nz, "radius_sigma_mm", 0.0);
        c.noise.side_branch_sigma = detail::get_number(nz, "side_branch_sigma", 0.0);
        c.noise.calcium_flip_prob = detail::get_number(nz, "calcium_flip_prob", 0.0);
    }
    validate(c);
    return c;
}

inline SynthConfig load_synth_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw InvalidConfig("config file is not valid JSON: " + path);
    return synth_config_from_json(j);
}

inline nlohmann::json ground_truth_to_json(const GroundTruth& g) {
    return nlohmann::json{{"true_mapping", g.true_mapping},
                          {"true_rotation", g.true_rotation}};
}

inline GroundTruth ground_truth_from_json(const nlohmann::json& j) {
    GroundTruth g;
    if (!j.is_object() || !j.contains("true_mapping") || !j.contains("true_rotation")) {
        throw InvalidConfig("ground truth file needs true_mapping and true_rotation");
    }
    g.true_mapping = j["true_mapping"].get<std::vector<double>>();
    g.true_rotation = j["true_rotation"].get<std::vector<double>>();
    return g;
}

}  // namespace coreg
