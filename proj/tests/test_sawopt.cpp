#include "logsaw/sawopt.hpp"
#include "logsaw/error.hpp"

#include "helpers.hpp"
#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace logsaw;
using namespace logsaw::test;

namespace {

SawingPattern centered_square(double side) {
    SawingPattern p;
    p.name = "square";
    p.boards.push_back({0, 0, side, side});
    return p;
}

KnotFunction delta_knot_fn(double theta_deg, double delta = 1.0) {
    KnotFunction fn;
    fn.delta_deg = delta;
    fn.samples.assign(static_cast<std::size_t>(std::round(360.0 / delta)), 0.0);
    fn.samples[static_cast<std::size_t>(std::round(theta_deg / delta)) % fn.samples.size()] =
        1.0 / delta;
    fn.normalized = true;
    return fn;
}

// direct transcription of C(a) = sum f_k(theta - a) f_p(theta) dtheta
double oracle_objective(const KnotFunction& fk, const PatternFunction& fp, int shift) {
    const int n = fk.size();
    double acc = 0;
    for (int c = 0; c < n; ++c) acc += fk.samples[((c - shift) % n + n) % n] * fp.samples[c];
    return acc * fk.delta_deg;
}

int oracle_argmin(const KnotFunction& fk, const PatternFunction& fp, int n_candidates,
                  int stride) {
    int best = 0;
    double best_val = oracle_objective(fk, fp, 0);
    for (int j = 1; j < n_candidates; ++j) {
        const double v = oracle_objective(fk, fp, j * stride);
        if (v < best_val) {
            best_val = v;
            best = j;
        }
    }
    return best;
}

} // namespace

TEST_SUITE_BEGIN("sawopt");

TEST_CASE("corner angles of a centered square") {
    const auto angles = corner_angles(centered_square(100));
    REQUIRE(angles.size() == 4);
    std::vector<double> sorted = angles;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted[0] == doctest::Approx(45.0));
    CHECK(sorted[1] == doctest::Approx(135.0));
    CHECK(sorted[2] == doctest::Approx(225.0));
    CHECK(sorted[3] == doctest::Approx(315.0));
}

TEST_CASE("corner angles of an offset board") {
    SawingPattern p;
    p.boards.push_back({0, 50, 100, 100});
    auto angles = corner_angles(p);
    std::sort(angles.begin(), angles.end());
    // corners (+-50, 0) and (+-50, 100)
    CHECK(angles[0] == doctest::Approx(0.0));
    CHECK(angles[1] == doctest::Approx(63.43494882292201));
    CHECK(angles[2] == doctest::Approx(116.56505117707799));
    CHECK(angles[3] == doctest::Approx(180.0));
}

TEST_CASE("shared corners appear once per board") {
    SawingPattern p;
    p.boards.push_back({0, 25, 100, 50});
    p.boards.push_back({0, -25, 100, 50}); // shares the y=0 face
    CHECK(corner_angles(p).size() == 8);
}

TEST_CASE("a corner at the origin is degenerate") {
    SawingPattern p;
    p.boards.push_back({25, 25, 50, 50});
    CHECK_THROWS_AS(corner_angles(p), Error);
}

TEST_CASE("pattern function of an empty corner set is zero") {
    const PatternFunction fn = pattern_function({}, 5.0, 1.0);
    for (double v : fn.samples) CHECK(v == 0.0);
}

TEST_CASE("pattern function peak matches the Gaussian density") {
    const PatternFunction fn = pattern_function({90.0}, 5.0, 1.0);
    // 1 / (5 sqrt(2 pi))
    CHECK(fn.samples[90] == doctest::Approx(0.07978845608028654).epsilon(1e-12));
    CHECK(fn.samples[270] < 1e-10);
    const auto mx = std::max_element(fn.samples.begin(), fn.samples.end());
    CHECK(static_cast<int>(mx - fn.samples.begin()) == 90);
}

TEST_CASE("pattern function wraps the angular distance") {
    const PatternFunction fn = pattern_function({0.0}, 10.0, 1.0);
    CHECK(fn.samples[355] == doctest::Approx(fn.samples[5]).epsilon(1e-12));
    CHECK(fn.samples[350] == doctest::Approx(fn.samples[10]).epsilon(1e-12));
}

TEST_CASE("knot function of a zero map is zero and unnormalized") {
    ProbabilityMap pmap;
    pmap.theta_bins = 360;
    pmap.l_bins = 10;
    pmap.l_extent_mm = 100;
    pmap.values.assign(3600, 0.0);
    const KnotFunction fn = knot_function(pmap);
    CHECK_FALSE(fn.normalized);
    for (double v : fn.samples) CHECK(v == 0.0);
}

TEST_CASE("knot function concentrates a single column") {
    ProbabilityMap pmap;
    pmap.theta_bins = 360;
    pmap.l_bins = 20;
    pmap.l_extent_mm = 100;
    pmap.values.assign(static_cast<std::size_t>(360) * 20, 0.0);
    for (int r = 0; r < 20; ++r) pmap.at(r, 120) = 1.0;
    const KnotFunction fn = knot_function(pmap);
    CHECK(fn.normalized);
    for (int c = 0; c < 360; ++c)
        if (c != 120) CHECK(fn.samples[c] == 0.0);
    CHECK(fn.samples[120] == doctest::Approx(1.0)); // delta: integral 1 over 1 deg
}

TEST_CASE("knot function of a uniform map is constant 1/360") {
    ProbabilityMap pmap;
    pmap.theta_bins = 360;
    pmap.l_bins = 15;
    pmap.l_extent_mm = 100;
    pmap.values.assign(static_cast<std::size_t>(360) * 15, 0.7);
    const KnotFunction fn = knot_function(pmap);
    double integral = 0;
    for (double v : fn.samples) {
        CHECK(v == doctest::Approx(1.0 / 360.0).epsilon(1e-12));
        integral += v * fn.delta_deg;
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("symmetry order detection") {
    CHECK(pattern_symmetry_order(corner_angles(centered_square(100))) == 4);
    SawingPattern two;
    two.boards.push_back({0, 27, 100, 50});
    two.boards.push_back({0, -27, 100, 50});
    CHECK(pattern_symmetry_order(corner_angles(two)) == 2);
    SawingPattern lopsided;
    lopsided.boards.push_back({30, 10, 40, 20});
    CHECK(pattern_symmetry_order(corner_angles(lopsided)) == 1);
}

TEST_CASE("zero knot function returns angle 0 with a flat curve") {
    KnotFunction fk;
    fk.delta_deg = 1.0;
    fk.samples.assign(360, 0.0);
    const PatternFunction fp = pattern_function(corner_angles(centered_square(100)), 5.0, 1.0);
    const AngleResult result = optimize_angle(fk, fp, 1.0);
    CHECK(result.angle_deg == 0.0);
    CHECK(result.objective == 0.0);
    CHECK(result.symmetry_period_deg == doctest::Approx(90.0));
    for (double v : result.objective_curve) CHECK(v == 0.0);
}

TEST_CASE("single knot avoids the square corners") {
    const KnotFunction fk = delta_knot_fn(0.0);
    const PatternFunction fp = pattern_function(corner_angles(centered_square(100)), 5.0, 1.0);
    const AngleResult result = optimize_angle(fk, fp, 1.0);
    // within the 90-degree period both 0 and 90 minimize; tie-break -> 0
    CHECK(result.angle_deg == 0.0);
    CHECK(result.symmetry_period_deg == doctest::Approx(90.0));
    // oracle agreement at 0.1 degree resolution on the refined grid
    const PatternFunction fp_fine =
        pattern_function(corner_angles(centered_square(100)), 5.0, 1.0);
    const AngleResult fine = optimize_angle(fk, fp_fine, 0.1);
    CHECK(fine.angle_deg == doctest::Approx(0.0));
}

TEST_CASE("two knots at 0 and 90 stay away from corners; C(45) is maximal") {
    KnotFunction fk;
    fk.delta_deg = 1.0;
    fk.samples.assign(360, 0.0);
    fk.samples[0] = 0.5;
    fk.samples[90] = 0.5;
    const PatternFunction fp = pattern_function(corner_angles(centered_square(100)), 5.0, 1.0);
    const AngleResult result = optimize_angle(fk, fp, 1.0);
    CHECK(result.angle_deg == 0.0);
    const auto mx = std::max_element(result.objective_curve.begin(), result.objective_curve.end());
    CHECK(static_cast<int>(mx - result.objective_curve.begin()) == 45);
}

TEST_CASE("grid mismatch is rejected") {
    KnotFunction fk;
    fk.delta_deg = 2.0;
    fk.samples.assign(180, 0.0);
    const PatternFunction fp = pattern_function({45.0}, 5.0, 1.0);
    CHECK_THROWS_AS(optimize_angle(fk, fp, 1.0), Error);
}

TEST_CASE("argmin matches exhaustive search on random functions") {
    Rng rng(79);
    for (int trial = 0; trial < 100; ++trial) {
        KnotFunction fk;
        fk.delta_deg = 1.0;
        fk.samples.resize(360);
        for (double& v : fk.samples) v = rng.uniform();
        std::vector<double> corners;
        const int n_corners = static_cast<int>(rng.uniform_int(1, 8));
        for (int c = 0; c < n_corners; ++c) corners.push_back(rng.uniform(0.0, 360.0));
        const PatternFunction fp = pattern_function(corners, rng.uniform(2.0, 15.0), 1.0);

        const AngleResult result = optimize_angle(fk, fp, 1.0, 1);
        const int expected = oracle_argmin(fk, fp, 360, 1);
        CHECK(result.angle_deg == static_cast<double>(expected));
        CHECK(result.objective == oracle_objective(fk, fp, expected));
    }
}

TEST_CASE("rotating the knot function shifts the optimum exactly") {
    Rng rng(83);
    KnotFunction fk;
    fk.delta_deg = 1.0;
    fk.samples.resize(360);
    for (double& v : fk.samples) v = rng.uniform();
    PatternFunction fp = pattern_function({10.0, 200.0, 335.0}, 6.0, 1.0);

    const AngleResult base = optimize_angle(fk, fp, 1.0, 1);
    const int delta = 37;
    KnotFunction rotated;
    rotated.delta_deg = 1.0;
    rotated.samples.resize(360);
    for (int c = 0; c < 360; ++c) rotated.samples[(c + delta) % 360] = fk.samples[c];
    const AngleResult moved = optimize_angle(rotated, fp, 1.0, 1);

    // knots moved up by delta need delta less shift: C_rot(a) = C(a + delta)
    for (int a = 0; a < 360; ++a)
        CHECK(moved.objective_curve[a] == base.objective_curve[(a + delta) % 360]);
    CHECK(moved.angle_deg == std::fmod(base.angle_deg - delta + 360.0, 360.0));
}

TEST_CASE("scaling either function leaves the argmin unchanged") {
    Rng rng(89);
    KnotFunction fk;
    fk.delta_deg = 1.0;
    fk.samples.resize(360);
    for (double& v : fk.samples) v = rng.uniform();
    // asymmetric corner set: a symmetric one would leave near-tied minima
    // whose ulp-level ordering the scaling could flip
    const PatternFunction fp = pattern_function({30.0, 150.0, 271.0}, 7.0, 1.0);
    const AngleResult base = optimize_angle(fk, fp, 1.0, 1);

    KnotFunction scaled = fk;
    for (double& v : scaled.samples) v *= 123.5;
    const AngleResult result = optimize_angle(scaled, fp, 1.0, 1);
    CHECK(result.angle_deg == base.angle_deg);
    CHECK(result.objective == doctest::Approx(123.5 * base.objective).epsilon(1e-12));
}

TEST_CASE("objective curve has the pattern's k-fold period") {
    for (int k : {2, 4}) {
        SawingPattern pattern;
        if (k == 4) {
            pattern = centered_square(100);
        } else {
            pattern.boards.push_back({0, 27, 100, 50});
            pattern.boards.push_back({0, -27, 100, 50});
        }
        Rng rng(91 + static_cast<std::uint64_t>(k));
        KnotFunction fk;
        fk.delta_deg = 1.0;
        fk.samples.resize(360);
        for (double& v : fk.samples) v = rng.uniform();
        const PatternFunction fp = pattern_function(corner_angles(pattern), 6.0, 1.0);
        const AngleResult full = optimize_angle(fk, fp, 1.0, 1);
        const int period = 360 / k;
        for (int a = 0; a < 360; ++a) {
            const double diff = std::abs(full.objective_curve[a] -
                                         full.objective_curve[(a + period) % 360]);
            CHECK(diff <= 1e-12);
        }
    }
}

TEST_SUITE_END();
