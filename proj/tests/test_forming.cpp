#include "doctest.h"

#include "invabc/csv.hpp"
#include "invabc/errors.hpp"
#include "invabc/forming.hpp"
#include "invabc/rng.hpp"

#include <cmath>
#include <filesystem>
#include <vector>

using namespace invabc;
using namespace invabc::sim;

namespace {

// direct transcription of the zone rule table
Zone ref_zone(double e1, double e2, const Flc& f) {
    const double phis = f.crack_base + f.crack_slope * std::abs(e2);
    const double phiw = f.wrinkle_slope * e2;
    const double ths = phis - f.margin;
    const double thw = phiw + f.margin;
    const double floor_e1 = thw + f.stretch_margin;
    if (e1 > phis) return Zone::Crack;
    if (ths < e1 && e1 <= phis) return Zone::RiskOfCrack;
    if (thw <= e1 && e1 <= ths && e1 >= floor_e1) return Zone::Safe;
    if (thw <= e1 && e1 <= ths) return Zone::InsufficientStretch;
    if (phiw <= e1 && e1 < thw) return Zone::WrinkleTendency;
    return Zone::Wrinkles;
}

StrainField make_field(std::size_t g, const std::vector<double>& e1, const std::vector<double>& e2,
                       double h0 = 0.8) {
    StrainField f;
    f.grid = g;
    f.h0 = h0;
    f.eps1 = e1;
    f.eps2 = e2;
    f.thickness.resize(g * g);
    for (std::size_t e = 0; e < g * g; ++e) f.thickness[e] = h0 * std::exp(-(e1[e] + e2[e]));
    return f;
}

StrainField random_field(std::size_t g, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> e1(g * g), e2(g * g);
    for (auto& v : e2) v = rng.uniform(-0.15, 0.15);
    for (std::size_t e = 0; e < g * g; ++e) e1[e] = rng.uniform(-0.2, 0.5);
    return make_field(g, e1, e2);
}

std::vector<double> mid_theta(std::size_t d) { return std::vector<double>(d, 0.5); }

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "invabc_forming_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("simulation is deterministic and respects the thickness relation") {
    SimConfig cfg;
    const std::vector<double> theta{0.3, 0.6, 0.8, 0.4, 0.5, 0.7};
    StrainField a = simulate(theta, cfg);
    StrainField b = simulate(theta, cfg);
    CHECK(a.eps1 == b.eps1);
    CHECK(a.eps2 == b.eps2);
    CHECK(a.thickness == b.thickness);
    CHECK(a.grid == cfg.grid);

    for (std::size_t e = 0; e < a.thickness.size(); ++e)
        CHECK(a.thickness[e] == a.h0 * std::exp(-(a.eps1[e] + a.eps2[e])));
}

TEST_CASE("zero bump amplitude flattens the major strain") {
    SimConfig cfg;
    StrainField f = simulate({0.5, 0.5, 0.0, 0.2, 0.8, 0.3}, cfg);
    for (double v : f.eps1) CHECK(v == f.eps1.front());
    StrainField g = simulate({0.5, 0.5, 1.0, 0.2, 0.8, 0.3}, cfg);
    bool varies = false;
    for (double v : g.eps1) varies = varies || v != g.eps1.front();
    CHECK(varies);
}

TEST_CASE("simulation is continuous in theta") {
    SimConfig cfg;
    const std::vector<double> theta = mid_theta(6);
    StrainField base = simulate(theta, cfg);
    for (std::size_t d = 0; d < 6; ++d) {
        auto bumped = theta;
        bumped[d] += 1e-6;
        StrainField f = simulate(bumped, cfg);
        double worst = 0.0;
        for (std::size_t e = 0; e < f.eps1.size(); ++e) {
            worst = std::max(worst, std::abs(f.eps1[e] - base.eps1[e]));
            worst = std::max(worst, std::abs(f.eps2[e] - base.eps2[e]));
            worst = std::max(worst, std::abs(f.thickness[e] - base.thickness[e]));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("extra parameters beyond six act as small ramps") {
    SimConfig cfg6;
    SimConfig cfg8 = cfg6;
    cfg8.lo.assign(8, 0.0);
    cfg8.hi.assign(8, 1.0);

    StrainField base = simulate(mid_theta(6), cfg6);
    StrainField neutral = simulate(mid_theta(8), cfg8);
    CHECK(neutral.eps1 == base.eps1);
    CHECK(neutral.eps2 == base.eps2);

    auto skew = mid_theta(8);
    skew[6] = 1.0;
    StrainField shifted = simulate(skew, cfg8);
    bool differs = false;
    for (std::size_t e = 0; e < shifted.eps1.size(); ++e)
        differs = differs || shifted.eps1[e] != base.eps1[e];
    CHECK(differs);
    CHECK(shifted.eps2 == base.eps2);
}

TEST_CASE("simulation validates theta and configuration") {
    SimConfig cfg;
    CHECK_THROWS_AS((void)simulate({0.5, 0.5, 0.5, 0.5, 0.5}, cfg), ShapeError);
    CHECK_THROWS_AS((void)simulate({1.5, 0.5, 0.5, 0.5, 0.5, 0.5}, cfg), ConfigError);
    CHECK_THROWS_AS((void)simulate({-0.1, 0.5, 0.5, 0.5, 0.5, 0.5}, cfg), ConfigError);

    SimConfig narrow;
    narrow.lo.assign(5, 0.0);
    narrow.hi.assign(5, 1.0);
    CHECK_THROWS_AS((void)simulate(mid_theta(5), narrow), ConfigError);

    SimConfig flat;
    flat.hi[2] = flat.lo[2];
    CHECK_THROWS_AS((void)simulate(mid_theta(6), flat), ConfigError);
}

TEST_CASE("classification hits every zone on crafted strains") {
    Flc flc; // phi_s(0) = 0.30, phi_w(0) = 0, band [0.05, 0.25], floor 0.07
    StrainField row = make_field(1, {0.35}, {0.0});
    CHECK(classify_elements(row, flc).labels[0] == Zone::Crack);
    row = make_field(1, {0.27}, {0.0});
    CHECK(classify_elements(row, flc).labels[0] == Zone::RiskOfCrack);
    row = make_field(1, {0.10}, {0.0});
    CHECK(classify_elements(row, flc).labels[0] == Zone::Safe);
    row = make_field(1, {0.06}, {0.0});
    CHECK(classify_elements(row, flc).labels[0] == Zone::InsufficientStretch);
    row = make_field(1, {0.02}, {0.0});
    CHECK(classify_elements(row, flc).labels[0] == Zone::WrinkleTendency);
    row = make_field(1, {-0.05}, {0.0});
    CHECK(classify_elements(row, flc).labels[0] == Zone::Wrinkles);

    // midpoint of the inset band is SAFE
    row = make_field(1, {0.15}, {0.0});
    CHECK(classify_elements(row, flc).labels[0] == Zone::Safe);
    // just above the crack curve
    row = make_field(1, {0.31}, {0.0});
    CHECK(classify_elements(row, flc).labels[0] == Zone::Crack);
}

TEST_CASE("classification agrees with the rule-table transcription") {
    Flc flc;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        StrainField f = random_field(9, seed);
        ZoneLabelGrid got = classify_elements(f, flc);
        for (std::size_t e = 0; e < got.labels.size(); ++e)
            CHECK(got.labels[e] == ref_zone(f.eps1[e], f.eps2[e], flc));
    }
}

TEST_CASE("classification rejects collapsing bands") {
    StrainField f = make_field(1, {0.1}, {0.0});
    Flc wide;
    wide.margin = 0.2; // band [0.2, 0.1] is empty
    CHECK_THROWS_AS((void)classify_elements(f, wide), ConfigError);
    Flc crossing;
    crossing.crack_base = -1.0;
    CHECK_THROWS_AS((void)classify_elements(f, crossing), ConfigError);
}

TEST_CASE("rendering upscales labels block-wise and masks outside pixels") {
    ZoneLabelGrid labels;
    labels.grid = 4;
    labels.labels.assign(16, Zone::Safe);
    labels.labels[1 * 4 + 2] = Zone::Crack;
    const ZoneColors colors = SimConfig::default_zone_colors();

    DiskMask everywhere{0.5, 0.5, 10.0};
    img::RgbImage im = render_fld_image(labels, colors, 8, 8, everywhere);
    std::size_t red = 0, green = 0;
    for (std::size_t py = 0; py < 8; ++py)
        for (std::size_t px = 0; px < 8; ++px) {
            const std::uint8_t* p = im.px(py, px);
            if (p[0] == 255 && p[1] == 0) {
                ++red;
                CHECK(py / 2 == 1);
                CHECK(px / 2 == 2);
            }
            if (p[0] == 0 && p[1] == 255 && p[2] == 0) ++green;
        }
    CHECK(red == 4);
    CHECK(green == 60);

    ZoneLabelGrid safe;
    safe.grid = 1;
    safe.labels = {Zone::Safe};
    img::RgbImage masked = render_fld_image(safe, colors, 64, 64, DiskMask{});
    const std::uint8_t* corner = masked.px(0, 0);
    CHECK(int(corner[0]) == 255);
    CHECK(int(corner[1]) == 255);
    const std::uint8_t* center = masked.px(32, 32);
    CHECK(int(center[0]) == 0);
    CHECK(int(center[1]) == 255);

    img::RgbImage again = render_fld_image(safe, colors, 64, 64, DiskMask{});
    CHECK(again.pixels == masked.pixels);
}

TEST_CASE("thinning objective evaluates the power mean of thinning rates") {
    StrainField flat = make_field(2, {0.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0});
    CHECK(thinning_objective(flat, 2) == 0.0);

    StrainField one;
    one.grid = 1;
    one.h0 = 0.8;
    one.eps1 = {0.0};
    one.eps2 = {0.0};
    one.thickness = {0.72};
    CHECK(thinning_objective(one, 2) == doctest::Approx(0.1).epsilon(1e-12));

    StrainField four;
    four.grid = 2;
    four.h0 = 0.8;
    four.eps1.assign(4, 0.0);
    four.eps2.assign(4, 0.0);
    four.thickness.assign(4, 0.72);
    CHECK(thinning_objective(four, 2) == doctest::Approx(std::sqrt(4.0) * 0.1).epsilon(1e-12));
    CHECK(thinning_objective(four, 4) ==
          doctest::Approx(std::pow(4.0, 0.25) * 0.1).epsilon(1e-12));

    CHECK_THROWS_AS((void)thinning_objective(one, 3), ConfigError);
    CHECK_THROWS_AS((void)thinning_objective(one, 0), ConfigError);
    one.h0 = 0.0;
    CHECK_THROWS_AS((void)thinning_objective(one, 2), NumericError);
}

TEST_CASE("thinning objective is monotone in each deviation") {
    StrainField f = random_field(5, 77);
    const double base = thinning_objective(f, 2);
    StrainField worse = f;
    worse.thickness[7] = f.h0 + 2.0 * (f.thickness[7] - f.h0);
    CHECK(thinning_objective(worse, 2) > base);

    // higher powers cannot exceed the quadratic aggregate
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
        StrainField g = random_field(4, seed);
        CHECK(thinning_objective(g, 6) <= thinning_objective(g, 2) + 1e-15);
    }
}

TEST_CASE("fld objective measures distance to the inset band") {
    Flc flc; // at e2 = 0: band [0.05, 0.25]
    StrainField inside = make_field(1, {0.15}, {0.0});
    CHECK(fld_objective(inside, flc, 2) == 0.0);

    StrainField above = make_field(1, {0.45}, {0.0});
    CHECK(fld_objective(above, flc, 2) == doctest::Approx(0.2).epsilon(1e-12));

    StrainField below = make_field(1, {-0.25}, {0.0});
    CHECK(fld_objective(below, flc, 2) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("fld objective vanishes exactly when the band holds every element") {
    Flc flc;
    flc.stretch_margin = 0.0;
    for (std::uint64_t seed = 20; seed < 30; ++seed) {
        StrainField f = random_field(6, seed);
        ZoneLabelGrid labels = classify_elements(f, flc);
        bool bad = false;
        for (Zone z : labels.labels)
            bad = bad || z == Zone::Crack || z == Zone::RiskOfCrack ||
                  z == Zone::WrinkleTendency || z == Zone::Wrinkles;
        CHECK((fld_objective(f, flc, 2) == 0.0) == !bad);
    }
}

TEST_CASE("defect counting sees planted labels and ignores layout") {
    ZoneLabelGrid labels;
    labels.grid = 4;
    labels.labels.assign(16, Zone::Safe);
    DefectCounts zero = count_defects(labels);
    CHECK(zero.crack == 0);
    CHECK(zero.wrinkles == 0);

    labels.labels[0] = labels.labels[5] = labels.labels[9] = Zone::Crack;
    for (std::size_t e : {2u, 3u, 7u, 11u, 14u}) labels.labels[e] = Zone::Wrinkles;
    DefectCounts got = count_defects(labels);
    CHECK(got.crack == 3);
    CHECK(got.wrinkles == 5);

    ZoneLabelGrid t;
    t.grid = 4;
    t.labels.resize(16);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) t.labels[j * 4 + i] = labels.labels[i * 4 + j];
    DefectCounts swapped = count_defects(t);
    CHECK(swapped.crack == got.crack);
    CHECK(swapped.wrinkles == got.wrinkles);
}

TEST_CASE("field csv round trips exactly") {
    StrainField f = random_field(3, 99);
    const auto path = temp_file("field.csv");
    write_field_csv(f, path.string());
    csv::Table t = csv::read(path.string());
    REQUIRE(t.rows.size() == 9);
    REQUIRE(t.header.size() == 5);
    for (std::size_t e = 0; e < 9; ++e) {
        CHECK(t.rows[e][2] == f.eps1[e]);
        CHECK(t.rows[e][3] == f.eps2[e]);
        CHECK(t.rows[e][4] == f.thickness[e]);
    }
}

TEST_CASE("canonical config text is stable and sensitive") {
    SimConfig cfg;
    const std::string a = canonical_text(cfg);
    CHECK(a == canonical_text(cfg));
    CHECK(a.find("e2_amp=0.12") != std::string::npos);
    CHECK(a.find("grid=32") != std::string::npos);
    CHECK(a.find("mask_radius=0.45") != std::string::npos);
    SimConfig other = cfg;
    other.flc.margin = 0.06;
    CHECK(canonical_text(other) != a);
}
