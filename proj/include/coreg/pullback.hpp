#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace coreg {

inline constexpr int kCircBins = 180;  // 2-degree directions around the lumen centre

enum class Modality { IVUS, OCT };

inline const char* to_string(Modality m) {
    return m == Modality::IVUS ? "IVUS" : "OCT";
}

/// Side branch reduced to its angular footprint plus a normalized area
/// (fraction of the maximum lumen area). bin_start..bin_end is circular
/// and inclusive, so a branch may wrap across bin 179 -> 0.
struct SideBranch {
    int bin_start = 0;
    int bin_end = 0;
    double area = 0.0;

    friend bool operator==(const SideBranch&, const SideBranch&) = default;
};

/// One cross-sectional frame's ingested features.
struct RawFrame {
    int frame_index = 0;
    double position_mm = 0.0;
    bool is_ed = false;  // end-diastolic flag; meaningful for IVUS only
    double lumen_area_mm2 = 0.0;
    std::vector<double> lumen_radius_profile;  // kCircBins entries, mm
    std::optional<SideBranch> side_branch;
    std::vector<std::uint8_t> calcium_arc;  // kCircBins entries, 0/1

    double calcium_fraction() const {
        if (calcium_arc.empty()) return 0.0;
        double c = 0.0;
        for (auto b : calcium_arc) c += (b != 0);
        return c / static_cast<double>(calcium_arc.size());
    }

    friend bool operator==(const RawFrame&, const RawFrame&) = default;
};

struct Pullback {
    Modality modality = Modality::IVUS;
    std::vector<RawFrame> frames;
    double frame_spacing_mm = 0.0;  // nominal, derived from positions at parse time

    std::size_t size() const { return frames.size(); }
};

enum class ParseErrorKind {
    MalformedRecord,
    EmptyPullback,
    NonMonotoneIndex,
    MissingEdFlags,
};

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrorKind kind, std::string msg)
        : std::runtime_error(std::move(msg)), kind_(kind) {}
    ParseErrorKind kind() const { return kind_; }

private:
    ParseErrorKind kind_;
};

/// One structural invariant violation, tied to the frame that broke it
/// (frame_index < 0 marks pullback-level problems).
struct Violation {
    ParseErrorKind kind;
    int frame_index;
    std::string detail;
};

/// Checks every TYPE invariant and returns the violations in frame order.
/// An empty result means the pullback is valid.
inline std::vector<Violation> validate(const Pullback& p) {
    std::vector<Violation> out;
    if (p.frames.size() < 2) {
        out.push_back({ParseErrorKind::EmptyPullback, -1,
                       "pullback has fewer than 2 frames"});
    }
    int ed_count = 0;
    for (std::size_t k = 0; k < p.frames.size(); ++k) {
        const RawFrame& f = p.frames[k];
        if (f.frame_index < 0) {
            out.push_back({ParseErrorKind::MalformedRecord, f.frame_index,
                           "negative frame_index"});
        }
        if (k > 0) {
            const RawFrame& prev = p.frames[k - 1];
            if (f.frame_index <= prev.frame_index) {
                out.push_back({ParseErrorKind::NonMonotoneIndex, f.frame_index,
                               "frame_index not strictly increasing"});
            }
            if (f.position_mm < prev.position_mm) {
                out.push_back({ParseErrorKind::NonMonotoneIndex, f.frame_index,
                               "position_mm decreases"});
            }
        }
        if (!(f.lumen_area_mm2 > 0.0)) {
            out.push_back({ParseErrorKind::MalformedRecord, f.frame_index,
                           "lumen_area_mm2 must be positive"});
        }
        if (f.lumen_radius_profile.size() != kCircBins) {
            out.push_back({ParseErrorKind::MalformedRecord, f.frame_index,
                           "lumen_radius_profile must have 180 entries"});
        } else {
            for (double r : f.lumen_radius_profile) {
                if (!(r > 0.0)) {
                    out.push_back({ParseErrorKind::MalformedRecord, f.frame_index,
                                   "lumen_radius_profile entry not positive"});
                    break;
                }
            }
        }
        if (f.calcium_arc.size() != kCircBins) {
            out.push_back({ParseErrorKind::MalformedRecord, f.frame_index,
                           "calcium_arc must have 180 entries"});
        }
        if (f.side_branch) {
            const SideBranch& sb = *f.side_branch;
            if (sb.bin_start < 0 || sb.bin_start >= kCircBins ||
                sb.bin_end < 0 || sb.bin_end >= kCircBins) {
                out.push_back({ParseErrorKind::MalformedRecord, f.frame_index,
                               "side_branch bin out of [0,179]"});
            }
            if (sb.area < 0.0) {
                out.push_back({ParseErrorKind::MalformedRecord, f.frame_index,
                               "side_branch area negative"});
            }
        }
        ed_count += f.is_ed;
    }
    if (p.modality == Modality::IVUS && ed_count < 2) {
        out.push_back({ParseErrorKind::MissingEdFlags, -1,
                       "IVUS pullback needs at least 2 ED-flagged frames"});
    }
    return out;
}

namespace detail {

inline const char* kFrameKeys[] = {"frame_index", "position_mm", "is_ed",
                                   "lumen_area_mm2", "lumen_radius_profile",
                                   "side_branch", "calcium_arc"};

inline RawFrame frame_from_json(const nlohmann::json& j, std::size_t line_no) {
    auto fail = [line_no](const std::string& what) -> ParseError {
        return ParseError(ParseErrorKind::MalformedRecord,
                          "line " + std::to_string(line_no) + ": " + what);
    };
    if (!j.is_object()) throw fail("record is not a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : kFrameKeys) known |= (it.key() == k);
        if (!known) throw fail("unknown key '" + it.key() + "'");
    }
    for (const char* k : kFrameKeys) {
        if (!j.contains(k)) throw fail(std::string("missing key '") + k + "'");
    }

    RawFrame f;
    try {
        if (!j["frame_index"].is_number_integer()) throw fail("frame_index must be an integer");
        f.frame_index = j["frame_index"].get<int>();
        if (!j["position_mm"].is_number()) throw fail("position_mm must be a number");
        f.position_mm = j["position_mm"].get<double>();
        if (!j["is_ed"].is_boolean()) throw fail("is_ed must be a boolean");
        f.is_ed = j["is_ed"].get<bool>();
        if (!j["lumen_area_mm2"].is_number()) throw fail("lumen_area_mm2 must be a number");
        f.lumen_area_mm2 = j["lumen_area_mm2"].get<double>();

        const auto& prof = j["lumen_radius_profile"];
        if (!prof.is_array() || prof.size() != kCircBins)
            throw fail("lumen_radius_profile must be an array of 180 numbers");
        f.lumen_radius_profile.reserve(kCircBins);
        for (const auto& v : prof) {
            if (!v.is_number()) throw fail("lumen_radius_profile entry not a number");
            f.lumen_radius_profile.push_back(v.get<double>());
        }

        const auto& sb = j["side_branch"];
        if (!sb.is_null()) {
            if (!sb.is_object()) throw fail("side_branch must be null or an object");
            for (auto it = sb.begin(); it != sb.end(); ++it) {
                if (it.key() != "bin_start" && it.key() != "bin_end" && it.key() != "area")
                    throw fail("unknown side_branch key '" + it.key() + "'");
            }
            if (!sb.contains("bin_start") || !sb.contains("bin_end") || !sb.contains("area"))
                throw fail("side_branch needs bin_start, bin_end, area");
            SideBranch b;
            if (!sb["bin_start"].is_number_integer() || !sb["bin_end"].is_number_integer())
                throw fail("side_branch bins must be integers");
            b.bin_start = sb["bin_start"].get<int>();
            b.bin_end = sb["bin_end"].get<int>();
            if (!sb["area"].is_number()) throw fail("side_branch area must be a number");
            b.area = sb["area"].get<double>();
            f.side_branch = b;
        }

        const auto& arc = j["calcium_arc"];
        if (!arc.is_array() || arc.size() != kCircBins)
            throw fail("calcium_arc must be an array of 180 values");
        f.calcium_arc.reserve(kCircBins);
        for (const auto& v : arc) {
            if (v.is_boolean()) {
                f.calcium_arc.push_back(v.get<bool>() ? 1 : 0);
            } else if (v.is_number_integer()) {
                int b = v.get<int>();
                if (b != 0 && b != 1) throw fail("calcium_arc entry must be 0 or 1");
                f.calcium_arc.push_back(static_cast<std::uint8_t>(b));
            } else {
                throw fail("calcium_arc entry must be 0/1");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw fail(e.what());
    }
    return f;
}

inline nlohmann::json frame_to_json(const RawFrame& f) {
    nlohmann::json j;
    j["frame_index"] = f.frame_index;
    j["position_mm"] = f.position_mm;
    j["is_ed"] = f.is_ed;
    j["lumen_area_mm2"] = f.lumen_area_mm2;
    j["lumen_radius_profile"] = f.lumen_radius_profile;
    if (f.side_branch) {
        j["side_branch"] = {{"bin_start", f.side_branch->bin_start},
                            {"bin_end", f.side_branch->bin_end},
                            {"area", f.side_branch->area}};
    } else {
        j["side_branch"] = nullptr;
    }
    nlohmann::json arc = nlohmann::json::array();
    for (auto b : f.calcium_arc) arc.push_back(static_cast<int>(b));
    j["calcium_arc"] = arc;
    return j;
}

}  // namespace detail

/// Parses a newline-delimited JSON feature file (one object per frame),
/// sorts records by frame_index and validates the result. Throws ParseError
/// on the first structural problem.
inline Pullback parse_pullback_stream(std::istream& in, Modality modality) {
    Pullback p;
    p.modality = modality;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ParseError(ParseErrorKind::MalformedRecord,
                             "line " + std::to_string(line_no) + ": invalid JSON");
        }
        p.frames.push_back(detail::frame_from_json(j, line_no));
    }
    if (p.frames.empty()) {
        throw ParseError(ParseErrorKind::EmptyPullback, "no frame records in input");
    }
    std::stable_sort(p.frames.begin(), p.frames.end(),
                     [](const RawFrame& a, const RawFrame& b) {
                         return a.frame_index < b.frame_index;
                     });
    auto violations = validate(p);
    if (!violations.empty()) {
        const Violation& v = violations.front();
        std::string where = v.frame_index >= 0
                                ? " (frame " + std::to_string(v.frame_index) + ")"
                                : "";
        throw ParseError(v.kind, v.detail + where);
    }
    if (p.frames.size() >= 2) {
        p.frame_spacing_mm = (p.frames.back().position_mm - p.frames.front().position_mm) /
                             static_cast<double>(p.frames.size() - 1);
    }
    return p;
}

inline Pullback parse_pullback(const std::string& path, Modality modality) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(ParseErrorKind::EmptyPullback, "cannot open file: " + path);
    }
    return parse_pullback_stream(in, modality);
}

/// Writes the NDJSON form read back by parse_pullback. Field-exact round
/// trip: doubles are emitted with shortest round-trip formatting.
inline void serialize_pullback(const Pullback& p, std::ostream& out) {
    for (const RawFrame& f : p.frames) {
        out << detail::frame_to_json(f).dump() << '\n';
    }
}

inline void serialize_pullback(const Pullback& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    serialize_pullback(p, out);
}

}  // namespace coreg
