#include <catch2/catch_amalgamated.hpp>

#include <coreg/pullback.hpp>

#include "helpers.hpp"

#include <sstream>
#include <string>

using namespace coreg;

namespace {

/// One syntactically valid NDJSON record with every key present.
std::string record(int index, double pos, bool ed = true) {
    RawFrame f = testutil::make_frame(index, pos, 9.0 + index, ed);
    return detail::frame_to_json(f).dump();
}

Pullback parse_text(const std::string& text, Modality m = Modality::IVUS) {
    std::istringstream in(text);
    return parse_pullback_stream(in, m);
}

}  // namespace

TEST_CASE("pullback serialization round-trips field-exact") {
    Pullback p = testutil::make_pullback(4, 0.5, 8.0, 0.37);
    p.frames[1].side_branch = SideBranch{160, 12, 0.35};  // wraps through 0
    p.frames[2].calcium_arc[17] = 1;
    p.frames[2].calcium_arc[18] = 1;
    p.frames[3].is_ed = false;
    p.frames[3].lumen_radius_profile[7] = 1.6180339887498949;

    std::ostringstream out;
    serialize_pullback(p, out);
    Pullback q = parse_text(out.str());

    REQUIRE(q.size() == p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const RawFrame &a = p.frames[i], &b = q.frames[i];
        CHECK(a.frame_index == b.frame_index);
        CHECK(a.position_mm == b.position_mm);
        CHECK(a.is_ed == b.is_ed);
        CHECK(a.lumen_area_mm2 == b.lumen_area_mm2);
        CHECK(a.lumen_radius_profile == b.lumen_radius_profile);
        CHECK(a.calcium_arc == b.calcium_arc);
        REQUIRE(a.side_branch.has_value() == b.side_branch.has_value());
        if (a.side_branch) {
            CHECK(a.side_branch->bin_start == b.side_branch->bin_start);
            CHECK(a.side_branch->bin_end == b.side_branch->bin_end);
            CHECK(a.side_branch->area == b.side_branch->area);
        }
    }
}

TEST_CASE("parse sorts records by frame_index") {
    const std::string text = record(2, 1.0) + "\n" + record(0, 0.0) + "\n" + record(1, 0.5) + "\n";
    Pullback p = parse_text(text);
    REQUIRE(p.size() == 3);
    CHECK(p.frames[0].frame_index == 0);
    CHECK(p.frames[1].frame_index == 1);
    CHECK(p.frames[2].frame_index == 2);
}

TEST_CASE("frame spacing is derived from first and last positions") {
    std::string text;
    for (int i = 0; i < 11; ++i) text += record(i, 0.4 * i) + "\n";
    Pullback p = parse_text(text, Modality::OCT);
    CHECK(p.frame_spacing_mm == Catch::Approx(0.4).margin(1e-12));
}

TEST_CASE("parse rejects malformed input") {
    SECTION("invalid JSON line") {
        REQUIRE_THROWS_AS(parse_text(record(0, 0.0) + "\n{not json\n"), ParseError);
    }
    SECTION("unknown record key") {
        std::string bad = record(0, 0.0);
        bad.insert(1, "\"lumen_aera_mm2\":3.0,");
        try {
            parse_text(bad + "\n" + record(1, 0.5) + "\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.kind() == ParseErrorKind::MalformedRecord);
            CHECK(std::string(e.what()).find("lumen_aera_mm2") != std::string::npos);
        }
    }
    SECTION("unknown side_branch key") {
        nlohmann::json j = nlohmann::json::parse(record(0, 0.0));
        j["side_branch"] = {{"bin_start", 3}, {"bin_end", 9}, {"area", 0.2}, {"ara", 1}};
        REQUIRE_THROWS_AS(parse_text(j.dump() + "\n" + record(1, 0.5) + "\n"), ParseError);
    }
    SECTION("missing key") {
        nlohmann::json j = nlohmann::json::parse(record(0, 0.0));
        j.erase("position_mm");
        REQUIRE_THROWS_AS(parse_text(j.dump() + "\n" + record(1, 0.5) + "\n"), ParseError);
    }
    SECTION("wrong radius profile length") {
        nlohmann::json j = nlohmann::json::parse(record(0, 0.0));
        j["lumen_radius_profile"].erase(0);
        REQUIRE_THROWS_AS(parse_text(j.dump() + "\n" + record(1, 0.5) + "\n"), ParseError);
    }
    SECTION("calcium entry outside {0,1}") {
        nlohmann::json j = nlohmann::json::parse(record(0, 0.0));
        j["calcium_arc"][4] = 2;
        REQUIRE_THROWS_AS(parse_text(j.dump() + "\n" + record(1, 0.5) + "\n"), ParseError);
    }
    SECTION("empty input") {
        try {
            parse_text("\n  \n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.kind() == ParseErrorKind::EmptyPullback);
        }
    }
    SECTION("duplicate frame_index") {
        try {
            parse_text(record(0, 0.0) + "\n" + record(0, 0.5) + "\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.kind() == ParseErrorKind::NonMonotoneIndex);
        }
    }
    SECTION("IVUS with fewer than 2 ED frames") {
        try {
            parse_text(record(0, 0.0, true) + "\n" + record(1, 0.5, false) + "\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.kind() == ParseErrorKind::MissingEdFlags);
        }
    }
    SECTION("OCT needs no ED flags") {
        std::string text = record(0, 0.0, false) + "\n" + record(1, 0.4, false) + "\n";
        REQUIRE_NOTHROW(parse_text(text, Modality::OCT));
    }
}

TEST_CASE("validate reports structural violations") {
    SECTION("single frame") {
        Pullback p = testutil::make_pullback(1);
        auto v = validate(p);
        REQUIRE_FALSE(v.empty());
        CHECK(v.front().kind == ParseErrorKind::EmptyPullback);
    }
    SECTION("decreasing position") {
        Pullback p = testutil::make_pullback(3);
        p.frames[2].position_mm = p.frames[1].position_mm - 0.1;
        auto v = validate(p);
        REQUIRE(v.size() == 1);
        CHECK(v.front().kind == ParseErrorKind::NonMonotoneIndex);
        CHECK(v.front().frame_index == 2);
    }
    SECTION("non-positive lumen area") {
        Pullback p = testutil::make_pullback(3);
        p.frames[1].lumen_area_mm2 = 0.0;
        auto v = validate(p);
        REQUIRE(v.size() == 1);
        CHECK(v.front().kind == ParseErrorKind::MalformedRecord);
    }
    SECTION("side branch bin out of range") {
        Pullback p = testutil::make_pullback(3);
        p.frames[0].side_branch = SideBranch{0, 180, 0.2};
        REQUIRE_FALSE(validate(p).empty());
    }
    SECTION("negative side branch area") {
        Pullback p = testutil::make_pullback(3);
        p.frames[0].side_branch = SideBranch{10, 20, -0.1};
        REQUIRE_FALSE(validate(p).empty());
    }
    SECTION("clean pullback has no violations") {
        CHECK(validate(testutil::make_pullback(5)).empty());
    }
}

TEST_CASE("calcium_fraction counts set bins") {
    RawFrame f = testutil::make_frame(0, 0.0, 9.0, true, 45);
    CHECK(f.calcium_fraction() == Catch::Approx(0.25).margin(1e-15));
    RawFrame g = testutil::make_frame(0, 0.0, 9.0);
    CHECK(g.calcium_fraction() == 0.0);
}
