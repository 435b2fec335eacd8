#include <catch2/catch_amalgamated.hpp>

#include <coreg/circumferential.hpp>
#include <coreg/oracle.hpp>
#include <coreg/prng.hpp>

#include "helpers.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace coreg;

namespace {

int circ_diff(int a, int b, int bins) {
    int d = std::abs(a - b) % bins;
    return std::min(d, bins - d);
}

RotationCostMatrix make_R(const std::vector<std::vector<double>>& rows) {
    RotationCostMatrix R;
    R.values = Matrix(rows.size(), rows[0].size());
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < rows[a].size(); ++b) R.values(a, b) = rows[a][b];
    return R;
}

std::vector<double> unit_positions(std::size_t n) {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<double>(i);
    return p;
}

}  // namespace

TEST_CASE("weighted_circular_ncc locks onto displacement") {
    const CircWeights w{};
    CircProfile a = testutil::make_profile(42);

    SECTION("self-correlation peaks at shift zero with value 1") {
        auto ncc = weighted_circular_ncc(a, a, w);
        REQUIRE(ncc.size() == 180);
        CHECK(ncc[0] == Catch::Approx(1.0).margin(1e-12));
        for (int s = 1; s < 180; ++s) REQUIRE(ncc[s] <= ncc[0] + 1e-12);
    }
    SECTION("counterclockwise displacement by 45 bins peaks at 45") {
        CircProfile b = testutil::rotate_profile(a, 45);
        auto ncc = weighted_circular_ncc(a, b, w);
        const auto it = std::max_element(ncc.begin(), ncc.end());
        CHECK(static_cast<int>(it - ncc.begin()) == 45);
        CHECK(*it == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("constant channels yield all zeros") {
        CircProfile c;
        c.radius_centered.assign(kCircBins, 0.0);
        c.side_branch.assign(kCircBins, 0.4);
        c.calcium.assign(kCircBins, 1.0);
        auto ncc = weighted_circular_ncc(c, c, w);
        for (double v : ncc) CHECK(v == 0.0);
    }
    SECTION("a single zero-variance channel contributes zero weight share") {
        CircProfile c = a;
        c.calcium.assign(kCircBins, 1.0);  // constant: no rotational signal
        auto ncc = weighted_circular_ncc(c, c, w);
        // sb and ecc still correlate perfectly; calcium contributes 0 of 2.1.
        CHECK(ncc[0] == Catch::Approx((w.w_sb + w.w_ecc) / (w.w_sb + w.w_calc + w.w_ecc))
                            .margin(1e-12));
    }
    SECTION("values stay inside [-1, 1]", "[property]") {
        SplitMix64 rng(77);
        for (int t = 0; t < 100; ++t) {
            CircProfile x = testutil::make_profile(rng.next_u64());
            CircProfile y = testutil::make_profile(rng.next_u64());
            for (double v : weighted_circular_ncc(x, y, w)) {
                REQUIRE(v >= -1.0);
                REQUIRE(v <= 1.0);
            }
        }
    }
}

TEST_CASE("select_anchors keeps frames with usable circumferential features") {
    auto frame = [](int idx, bool branch, int calcium_bins) {
        RawFrame f = testutil::make_frame(idx, idx * 0.5, 10.0, true, calcium_bins);
        if (branch) f.side_branch = SideBranch{10, 30, 0.4};
        return f;
    };
    std::vector<RawFrame> ivus = {frame(0, true, 0), frame(1, false, 0), frame(2, false, 20),
                                  frame(3, false, 9), frame(4, false, 20)};
    std::vector<RawFrame> oct = {frame(0, false, 0), frame(1, false, 0), frame(2, false, 20),
                                 frame(3, false, 9), frame(4, false, 0)};
    std::vector<const RawFrame*> pi, po;
    for (const auto& f : ivus) pi.push_back(&f);
    for (const auto& f : oct) po.push_back(&f);

    auto anchors = select_anchors({0, 1, 2, 3, 4}, {10, 11, 12, 13, 14}, pi, po, 0.05);

    // 0: branch in IVUS only -> anchor. 1: featureless -> dropped.
    // 2: calcium 20/180 = 0.111 in both -> anchor. 3: 9/180 = 0.05 -> anchor
    // (threshold inclusive). 4: calcium in IVUS only, min fraction 0 -> dropped.
    REQUIRE(anchors.size() == 3);
    CHECK(anchors[0].ivus_frame == 0);
    CHECK(anchors[0].oct_frame == 10);
    CHECK(anchors[0].has_side_branch);
    CHECK(anchors[1].ivus_frame == 2);
    CHECK_FALSE(anchors[1].has_side_branch);
    CHECK(anchors[1].calcium_fraction == Catch::Approx(20.0 / 180.0).margin(1e-12));
    CHECK(anchors[2].ivus_frame == 3);
    CHECK(anchors[2].position_mm == Catch::Approx(1.5).margin(1e-12));
}

TEST_CASE("rotation_cost_matrix fills rows and zeroes featureless anchors") {
    CircProfile p = testutil::make_profile(5);
    std::vector<CircProfile> profiles = {p, p};

    AnchorPair good;
    good.ivus_frame = 0;
    good.oct_frame = 0;
    good.has_side_branch = true;
    AnchorPair weak;
    weak.ivus_frame = 1;
    weak.oct_frame = 1;
    weak.has_side_branch = false;
    weak.calcium_fraction = 0.01;  // below threshold

    RotationCostMatrix R =
        rotation_cost_matrix({good, weak}, profiles, profiles, CircWeights{}, 0.05);

    REQUIRE(R.bins() == 180);
    REQUIRE(R.anchors() == 2);
    CHECK(R.values(0, 0) == Catch::Approx(1.0).margin(1e-12));
    int argmax = 0;
    for (int b = 1; b < 180; ++b)
        if (R.values(0, b) > R.values(0, argmax)) argmax = b;
    CHECK(argmax == 0);

    REQUIRE(R.zeroed_rows == std::vector<std::size_t>{1});
    for (int b = 0; b < 180; ++b) CHECK(R.values(1, b) == 0.0);
}

TEST_CASE("strict zeroing drops calcium-only data rows") {
    CircProfile p = testutil::make_profile(9);
    std::vector<CircProfile> profiles = {p};
    AnchorPair calcium_only;
    calcium_only.has_side_branch = false;
    calcium_only.calcium_fraction = 0.2;

    RotationCostMatrix permissive =
        rotation_cost_matrix({calcium_only}, profiles, profiles, CircWeights{}, 0.05, false);
    CHECK(permissive.zeroed_rows.empty());
    CHECK(permissive.values(0, 0) > 0.9);

    RotationCostMatrix strict =
        rotation_cost_matrix({calcium_only}, profiles, profiles, CircWeights{}, 0.05, true);
    REQUIRE(strict.zeroed_rows == std::vector<std::size_t>{0});
    for (int b = 0; b < 180; ++b) CHECK(strict.values(0, b) == 0.0);
}

TEST_CASE("rotation_path hand cases") {
    SECTION("single anchor returns its argmax, smallest bin on ties") {
        RotationCostMatrix R = make_R({{0.1, 0.2, 0.1, 0.9, 0.3, 0.2, 0.1, 0.9, 0.0, 0.0}});
        CHECK(rotation_path(R, 0.5, 30.0, unit_positions(1)) == std::vector<int>{3});
    }
    SECTION("lambda zero and a loose cap reduce to per-row argmax") {
        std::vector<std::vector<double>> rows(2, std::vector<double>(12, 0.0));
        rows[0][9] = 0.8;
        rows[1][1] = 0.6;
        RotationCostMatrix R = make_R(rows);
        CHECK(rotation_path(R, 0.0, 1e9, unit_positions(2)) == std::vector<int>{9, 1});
    }
    SECTION("equal-score final bins resolve to the smaller bin") {
        std::vector<std::vector<double>> rows(2, std::vector<double>(12, 0.0));
        rows[0][0] = 1.0;
        rows[1][2] = 0.8;
        rows[1][10] = 0.8;  // symmetric: |2-0| = |10-0| = 2 bins circularly
        RotationCostMatrix R = make_R(rows);
        CHECK(rotation_path(R, 0.05, 1e9, unit_positions(2)) == std::vector<int>{0, 2});
    }
    SECTION("equal-score predecessors resolve by smaller step then smaller bin") {
        std::vector<std::vector<double>> rows(2, std::vector<double>(12, 0.0));
        rows[0][1] = 0.5;
        rows[0][3] = 0.5;  // both one bin away from the row-1 peak at 2
        rows[1][2] = 1.0;
        RotationCostMatrix R = make_R(rows);
        CHECK(rotation_path(R, 0.05, 1e9, unit_positions(2)) == std::vector<int>{1, 2});
    }
    SECTION("the hard rate cap forbids distant peaks") {
        std::vector<std::vector<double>> rows(2, std::vector<double>(12, 0.0));
        rows[0][0] = 1.0;
        rows[1][6] = 0.9;
        RotationCostMatrix R = make_R(rows);
        // 12 bins -> 30 deg/bin; delta_max 60 deg/mm over a 1 mm gap caps the
        // step at 2 bins, so the two peaks cannot both be reached.
        CHECK(rotation_path(R, 0.01, 60.0, unit_positions(2)) == std::vector<int>{0, 0});
        // Uncapped, the joint gain beats the quadratic penalty.
        CHECK(rotation_path(R, 0.01, 1e9, unit_positions(2)) == std::vector<int>{0, 6});
    }
    SECTION("zeroed rows ride the smoothness term") {
        std::vector<std::vector<double>> rows(3, std::vector<double>(12, 0.0));
        rows[0][5] = 1.0;
        rows[2][5] = 1.0;
        RotationCostMatrix R = make_R(rows);
        R.zeroed_rows = {1};
        CHECK(rotation_path(R, 0.5, 1e9, unit_positions(3)) == std::vector<int>{5, 5, 5});
    }
}

TEST_CASE("rotation_path obeys the movement constraint", "[property]") {
    SplitMix64 rng(301);
    for (int t = 0; t < 100; ++t) {
        const int A = 2 + static_cast<int>(rng.uniform_below(5));
        const int bins = 180;
        RotationCostMatrix R;
        R.values = Matrix(A, bins);
        for (int a = 0; a < A; ++a)
            for (int b = 0; b < bins; ++b) R.values(a, b) = rng.uniform(-1.0, 1.0);
        std::vector<double> pos(A);
        double x = 0.0;
        for (int a = 0; a < A; ++a) {
            x += rng.uniform(0.3, 2.0);
            pos[a] = x;
        }
        const double lambda = rng.uniform(0.0, 1.0);
        const double delta_max = rng.uniform(4.0, 40.0);
        auto bins_out = rotation_path(R, lambda, delta_max, pos);
        REQUIRE(bins_out.size() == static_cast<std::size_t>(A));
        for (int a = 1; a < A; ++a) {
            const double gap = pos[a] - pos[a - 1];
            const double step_deg = circ_diff(bins_out[a], bins_out[a - 1], bins) * 2.0;
            REQUIRE(step_deg <= delta_max * gap + 1e-9);
        }
    }
}

TEST_CASE("rotation_path matches the exhaustive oracle on reduced instances") {
    SplitMix64 rng(555);
    for (int t = 0; t < 60; ++t) {
        const int A = 1 + static_cast<int>(rng.uniform_below(5));
        const int bins = 6 + static_cast<int>(rng.uniform_below(7));  // 6..12
        RotationCostMatrix R;
        R.values = Matrix(A, bins);
        for (int a = 0; a < A; ++a) {
            const bool zero_row = rng.next_double() < 0.15;
            for (int b = 0; b < bins; ++b) {
                R.values(a, b) = zero_row ? 0.0 : rng.uniform(-1.0, 1.0);
            }
            if (zero_row) R.zeroed_rows.push_back(a);
        }
        std::vector<double> pos(A);
        double x = 0.0;
        for (int a = 0; a < A; ++a) {
            x += rng.uniform(0.5, 1.5);
            pos[a] = x;
        }
        const double bin_deg = 360.0 / bins;
        const double lambda = rng.next_double();
        const double delta_max = rng.uniform(bin_deg * 0.8, bin_deg * bins);
        auto got = rotation_path(R, lambda, delta_max, pos);
        auto want = brute_force_rotation(R, lambda, delta_max, pos);
        REQUIRE(got == want);
        R.zeroed_rows.clear();
    }
}

TEST_CASE("shifting the cost matrix shifts the recovered path", "[property]") {
    SplitMix64 rng(808);
    for (int t = 0; t < 100; ++t) {
        const int A = 2 + static_cast<int>(rng.uniform_below(4));
        const int bins = 180;
        RotationCostMatrix R;
        R.values = Matrix(A, bins);
        for (int a = 0; a < A; ++a)
            for (int b = 0; b < bins; ++b) R.values(a, b) = rng.uniform(-1.0, 1.0);
        const int k = static_cast<int>(rng.uniform_below(bins));

        RotationCostMatrix S;  // S[a][b] = R[a][(b - k) mod bins]
        S.values = Matrix(A, bins);
        for (int a = 0; a < A; ++a)
            for (int b = 0; b < bins; ++b)
                S.values(a, b) = R.values(a, ((b - k) % bins + bins) % bins);

        auto pos = unit_positions(A);
        auto base = rotation_path(R, 0.3, 1e9, pos);
        auto shifted = rotation_path(S, 0.3, 1e9, pos);
        for (int a = 0; a < A; ++a) REQUIRE(shifted[a] == (base[a] + k) % bins);
    }
}

TEST_CASE("rotating the OCT profiles shifts each cost row") {
    SplitMix64 rng(909);
    CircProfile pi = testutil::make_profile(rng.next_u64());
    CircProfile po = testutil::make_profile(rng.next_u64());
    AnchorPair a;
    a.has_side_branch = true;
    const CircWeights w{};

    RotationCostMatrix R0 = rotation_cost_matrix({a}, {pi}, {po}, w, 0.05);
    for (int k : {1, 17, 45, 90, 179}) {
        CircProfile rot = testutil::rotate_profile(po, k);
        RotationCostMatrix Rk = rotation_cost_matrix({a}, {pi}, {rot}, w, 0.05);
        for (int b = 0; b < 180; ++b) {
            REQUIRE(Rk.values(0, (b + k) % 180) ==
                    Catch::Approx(R0.values(0, b)).margin(1e-9));
        }
    }
}

TEST_CASE("interpolate_rotations is linear in unwrapped angle space") {
    auto make_anchor = [](int frame) {
        AnchorPair a;
        a.ivus_frame = frame;
        return a;
    };
    std::vector<int> frames;
    for (int i = 0; i <= 10; ++i) frames.push_back(i);

    SECTION("midpoint between plain angles") {
        auto out = interpolate_rotations({make_anchor(0), make_anchor(10)}, {0.0, 20.0}, frames);
        CHECK(out[5] == Catch::Approx(10.0).margin(1e-12));
        CHECK(out[0] == Catch::Approx(0.0).margin(1e-12));
        CHECK(out[10] == Catch::Approx(20.0).margin(1e-12));
    }
    SECTION("interpolation crosses 0/360 through the short way") {
        auto out = interpolate_rotations({make_anchor(0), make_anchor(10)}, {350.0, 10.0}, frames);
        CHECK(out[5] == Catch::Approx(0.0).margin(1e-12));
        CHECK(out[2] == Catch::Approx(354.0).margin(1e-12));
        CHECK(out[8] == Catch::Approx(6.0).margin(1e-12));
    }
    SECTION("frames outside the anchor span clamp to the nearest anchor") {
        auto out = interpolate_rotations({make_anchor(4), make_anchor(6)}, {40.0, 44.0}, frames);
        CHECK(out[0] == Catch::Approx(40.0).margin(1e-12));
        CHECK(out[1] == Catch::Approx(40.0).margin(1e-12));
        CHECK(out[9] == Catch::Approx(44.0).margin(1e-12));
        CHECK(out[5] == Catch::Approx(42.0).margin(1e-12));
    }
    SECTION("all outputs fall in [0, 360)") {
        auto out = interpolate_rotations({make_anchor(0), make_anchor(10)}, {300.0, 40.0}, frames);
        for (double v : out) {
            REQUIRE(v >= 0.0);
            REQUIRE(v < 360.0);
        }
    }
}

TEST_CASE("angle helpers wrap correctly") {
    CHECK(wrap360(360.0) == 0.0);
    CHECK(wrap360(-10.0) == Catch::Approx(350.0).margin(1e-12));
    CHECK(wrap360(725.0) == Catch::Approx(5.0).margin(1e-12));
    CHECK(signed_angle_diff(180.0) == 180.0);
    CHECK(signed_angle_diff(181.0) == Catch::Approx(-179.0).margin(1e-12));
    CHECK(signed_angle_diff(-180.0) == 180.0);
    CHECK(signed_angle_diff(-90.0) == Catch::Approx(-90.0).margin(1e-12));
}
