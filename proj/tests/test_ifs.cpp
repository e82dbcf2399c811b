#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "frax/ifs.hpp"
#include "frax/rng.hpp"
#include "oracles.hpp"

using namespace frax;

namespace {

IfsSystem make_system(const std::vector<Mat2>& mats, const std::vector<Vec2>& trans) {
    IfsSystem sys;
    for (std::size_t i = 0; i < mats.size(); ++i)
        sys.maps.push_back(AffineMap::from_parts(mats[i], trans[i]));
    sys.probs = sampling_probabilities(sys.maps);
    return sys;
}

IfsSystem uniform_scale_system(int n, double s) {
    std::vector<Mat2> mats(n, Mat2{s, 0.0, 0.0, s});
    std::vector<Vec2> trans(n);
    for (int i = 0; i < n; ++i) trans[i] = {0.1 * i, -0.1 * i};
    return make_system(mats, trans);
}

}  // namespace

TEST_CASE("closed-form singular values match an SVD oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 2000; ++trial) {
        Mat2 m{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
               rng.uniform(-3.0, 3.0)};
        const auto [s1, s2] = singular_values(m);
        const auto [o1, o2] = oracle::svd_singular_values(m);
        REQUIRE(s1 >= s2);
        REQUIRE(s2 >= 0.0);
        REQUIRE(std::fabs(s1 - o1) < 1e-9);
        REQUIRE(std::fabs(s2 - o2) < 1e-9);
    }
}

TEST_CASE("singular values handle degenerate matrices") {
    const auto [z1, z2] = singular_values({0, 0, 0, 0});
    CHECK(z1 == 0.0);
    CHECK(z2 == 0.0);

    // Rank one.
    const auto [r1, r2] = singular_values({1, 2, 2, 4});
    CHECK(r1 == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(r2 == doctest::Approx(0.0).scale(1).epsilon(1e-12));

    // Pure rotation and reflection both have unit singular values.
    const double c = std::cos(0.7), s = std::sin(0.7);
    for (const Mat2 m : {Mat2{c, -s, s, c}, Mat2{c, s, s, -c}}) {
        const auto [u1, u2] = singular_values(m);
        CHECK(u1 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(u2 == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("geometry statistic sums sigma1 + 2 sigma2 over the maps") {
    // Three maps diag(0.8, 0.3): alpha = 3 * (0.8 + 0.6) = 4.2.
    IfsSystem sys = make_system({{0.8, 0, 0, 0.3}, {0.8, 0, 0, 0.3}, {0.8, 0, 0, 0.3}},
                                {{0, 0}, {0.5, 0}, {0, 0.5}});
    CHECK(compute_alpha(sys) == doctest::Approx(4.2).epsilon(1e-12));

    const GeometryGate g = good_geometry(sys);
    CHECK(g.n == 3);
    CHECK(g.lower == 4.0);
    CHECK(g.upper == 4.5);
    CHECK(g.accepted);
}

TEST_CASE("geometry statistic is invariant to map order and rotation") {
    Rng rng(11);
    std::vector<Mat2> mats;
    std::vector<Vec2> trans;
    for (int i = 0; i < 5; ++i) {
        mats.push_back({rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6),
                        rng.uniform(-0.6, 0.6)});
        trans.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
    }
    IfsSystem sys = make_system(mats, trans);
    const double alpha = compute_alpha(sys);

    std::reverse(mats.begin(), mats.end());
    std::reverse(trans.begin(), trans.end());
    CHECK(compute_alpha(make_system(mats, trans)) == doctest::Approx(alpha).epsilon(1e-12));

    // Singular values, hence alpha, ignore orthogonal factors.
    const double c = std::cos(1.1), s = std::sin(1.1);
    for (auto& m : mats) {
        const Mat2 r{c, -s, s, c};
        m = Mat2{r.a11 * m.a11 + r.a12 * m.a21, r.a11 * m.a12 + r.a12 * m.a22,
                 r.a21 * m.a11 + r.a22 * m.a21, r.a21 * m.a12 + r.a22 * m.a22};
    }
    CHECK(compute_alpha(make_system(mats, trans)) == doctest::Approx(alpha).epsilon(1e-9));
}

TEST_CASE("acceptance band bounds are strict") {
    // Classic three-map half-scale gasket: alpha = 3 * 1.5 = 4.5, exactly the
    // upper bound for N=3, so it must be rejected.
    IfsSystem gasket = uniform_scale_system(3, 0.5);
    GeometryGate g = good_geometry(gasket);
    CHECK(g.alpha == 4.5);
    CHECK(g.upper == 4.5);
    CHECK_FALSE(g.accepted);

    // diag(0.75, 0.5) twice: alpha = 2 * 1.75 = 3.5, exactly the lower bound
    // for N=2, also rejected.
    IfsSystem low = make_system({{0.75, 0, 0, 0.5}, {0.75, 0, 0, 0.5}}, {{0, 0}, {1, 0}});
    g = good_geometry(low);
    CHECK(g.alpha == 3.5);
    CHECK(g.lower == 3.5);
    CHECK_FALSE(g.accepted);

    // Just inside either bound is accepted.
    IfsSystem in1 = make_system({{0.76, 0, 0, 0.5}, {0.75, 0, 0, 0.5}}, {{0, 0}, {1, 0}});
    CHECK(good_geometry(in1).accepted);
    IfsSystem in2 = make_system({{0.99, 0, 0, 0.5}, {0.99, 0, 0, 0.5}}, {{0, 0}, {1, 0}});
    CHECK(good_geometry(in2).alpha == doctest::Approx(3.98));
    CHECK(good_geometry(in2).accepted);
}

TEST_CASE("acceptance band tracks the map count") {
    for (int n = 2; n <= 8; ++n) {
        IfsSystem sys = uniform_scale_system(n, 0.5);
        const GeometryGate g = good_geometry(sys);
        CHECK(g.lower == 0.5 * (5.0 + n));
        CHECK(g.upper == 0.5 * (6.0 + n));
        CHECK(g.upper - g.lower == 0.5);
    }
}

TEST_CASE("selection probabilities follow the determinants") {
    IfsSystem sys = make_system({{0.5, 0, 0, 0.5}, {0.5, 0, 0, 0.25}, {-0.5, 0, 0, 0.5}},
                                {{0, 0}, {0, 0}, {0, 0}});
    // |det| = 0.25, 0.125, 0.25 -> probabilities 0.4, 0.2, 0.4.
    CHECK(sys.probs[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(sys.probs[1] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(sys.probs[2] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("selection probabilities fall back to uniform for singular maps") {
    std::vector<AffineMap> maps;
    maps.push_back(AffineMap::from_parts({0.5, 0, 0, 0}, {0, 0}));
    maps.push_back(AffineMap::from_parts({0, 0, 0.5, 0}, {1, 0}));
    maps.push_back(AffineMap::from_parts({0.25, 0.25, 0.25, 0.25}, {0, 1}));
    const auto probs = sampling_probabilities(maps);
    for (const double p : probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("sampled systems satisfy every structural invariant") {
    int n_counts[9] = {};
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const IfsSystem sys = sample_system(seed);
        REQUIRE_NOTHROW(validate_system(sys));
        REQUIRE(sys.seed == seed);
        const int n = sys.size();
        REQUIRE(n >= 2);
        REQUIRE(n <= 8);
        ++n_counts[n];

        const GeometryGate g = good_geometry(sys);
        REQUIRE(g.accepted);

        double psum = 0.0;
        for (const auto& m : sys.maps) {
            REQUIRE(m.sigma1 > 0.0);
            REQUIRE(m.sigma1 < 1.0);
            REQUIRE(m.sigma2 > 0.0);
            REQUIRE(m.sigma2 <= m.sigma1);
            const auto [o1, o2] = oracle::svd_singular_values(m.linear);
            REQUIRE(std::fabs(m.sigma1 - o1) < 1e-9);
            REQUIRE(std::fabs(m.sigma2 - o2) < 1e-9);
            REQUIRE(std::fabs(m.translation.x) <= 1.0);
            REQUIRE(std::fabs(m.translation.y) <= 1.0);
        }
        for (const double p : sys.probs) psum += p;
        REQUIRE(psum == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Every admissible map count shows up across 500 seeds.
    for (int n = 2; n <= 8; ++n) CHECK(n_counts[n] > 0);
}

TEST_CASE("sampling is deterministic in the seed") {
    const IfsSystem a = sample_system(42);
    const IfsSystem b = sample_system(42);
    REQUIRE(a.size() == b.size());
    for (int i = 0; i < a.size(); ++i) {
        CHECK(a.maps[i].linear.a11 == b.maps[i].linear.a11);
        CHECK(a.maps[i].linear.a12 == b.maps[i].linear.a12);
        CHECK(a.maps[i].linear.a21 == b.maps[i].linear.a21);
        CHECK(a.maps[i].linear.a22 == b.maps[i].linear.a22);
        CHECK(a.maps[i].translation.x == b.maps[i].translation.x);
        CHECK(a.maps[i].translation.y == b.maps[i].translation.y);
        CHECK(a.probs[i] == b.probs[i]);
    }
    const IfsSystem c = sample_system(43);
    const bool differs = a.size() != c.size() || a.maps[0].linear.a11 != c.maps[0].linear.a11;
    CHECK(differs);
}

TEST_CASE("validate_system rejects broken systems") {
    IfsSystem ok = sample_system(7);

    IfsSystem too_few = ok;
    too_few.maps.resize(1);
    too_few.probs.resize(1);
    CHECK_THROWS_AS(validate_system(too_few), std::invalid_argument);

    IfsSystem bad_probs = ok;
    bad_probs.probs[0] += 0.25;
    CHECK_THROWS_AS(validate_system(bad_probs), std::invalid_argument);

    IfsSystem bad_cache = ok;
    bad_cache.maps[0].sigma1 += 0.01;
    CHECK_THROWS_AS(validate_system(bad_cache), std::invalid_argument);

    IfsSystem expanding = make_system({{1.2, 0, 0, 0.5}, {0.5, 0, 0, 0.5}}, {{0, 0}, {1, 0}});
    CHECK_THROWS_AS(validate_system(expanding), std::invalid_argument);
}

TEST_CASE("ifs records round-trip exactly") {
    for (const std::uint64_t seed : {1ULL, 42ULL, 9999ULL}) {
        const IfsSystem sys = sample_system(seed);
        const std::string line = format_ifs_record(sys);
        const IfsSystem back = parse_ifs_record(line);
        REQUIRE(back.seed == sys.seed);
        REQUIRE(back.size() == sys.size());
        for (int i = 0; i < sys.size(); ++i) {
            CHECK(back.maps[i].linear.a11 == sys.maps[i].linear.a11);
            CHECK(back.maps[i].linear.a12 == sys.maps[i].linear.a12);
            CHECK(back.maps[i].linear.a21 == sys.maps[i].linear.a21);
            CHECK(back.maps[i].linear.a22 == sys.maps[i].linear.a22);
            CHECK(back.maps[i].translation.x == sys.maps[i].translation.x);
            CHECK(back.maps[i].translation.y == sys.maps[i].translation.y);
            CHECK(back.probs[i] == sys.probs[i]);
            // Reparsed singular values are recomputed, not copied.
            CHECK(std::fabs(back.maps[i].sigma1 - sys.maps[i].sigma1) < 1e-12);
            CHECK(std::fabs(back.maps[i].sigma2 - sys.maps[i].sigma2) < 1e-12);
        }
        REQUIRE_NOTHROW(validate_system(back));
    }
}

TEST_CASE("ifs record parsing rejects malformed lines") {
    const std::string good = format_ifs_record(sample_system(3));
    CHECK_THROWS_WITH_AS(parse_ifs_record(""), "ifs record: malformed header fields",
                         std::runtime_error);
    CHECK_THROWS_AS(parse_ifs_record("5 1 1 0.5 0 0 0.5 0 0 1"), std::runtime_error);
    CHECK_THROWS_AS(parse_ifs_record(good.substr(0, good.size() / 2)), std::runtime_error);
    CHECK_THROWS_AS(parse_ifs_record(good + " 0.25"), std::runtime_error);

    // det_probs flag out of range, then inconsistent with the matrices.
    CHECK_THROWS_AS(parse_ifs_record("5 2 2 0.5 0 0 0.5 0 0 0.5 0.5 0 0 0.5 1 0 0.5"),
                    std::runtime_error);
    CHECK_THROWS_AS(parse_ifs_record("5 2 0 0.5 0 0 0.5 0 0 0.5 0.5 0 0 0.5 1 0 0.5"),
                    std::runtime_error);

    // Probabilities not proportional to the determinants.
    CHECK_THROWS_AS(parse_ifs_record("5 2 1 0.5 0 0 0.5 0 0 0.9 0.5 0 0 0.5 1 0 0.1"),
                    std::runtime_error);
}

TEST_CASE("ifs files persist whole collections and report bad lines") {
    const auto dir = std::filesystem::temp_directory_path() / "frax_ifs_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "codes.txt";

    std::vector<IfsSystem> systems;
    for (std::uint64_t seed = 100; seed < 110; ++seed) systems.push_back(sample_system(seed));
    write_ifs_file(path, systems);

    const std::vector<IfsSystem> back = read_ifs_file(path);
    REQUIRE(back.size() == systems.size());
    for (std::size_t i = 0; i < systems.size(); ++i) {
        CHECK(back[i].seed == systems[i].seed);
        CHECK(back[i].size() == systems[i].size());
        CHECK(back[i].maps[0].linear.a11 == systems[i].maps[0].linear.a11);
    }

    std::ofstream(path, std::ios::app) << "not a record\n";
    try {
        read_ifs_file(path);
        FAIL("expected error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find(":11:") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("uniform-probability records round-trip through the fallback flag") {
    // Two singular maps: det sum is zero, so probabilities are the uniform
    // fallback and the record must carry det_probs=0.
    IfsSystem sys;
    sys.maps.push_back(AffineMap::from_parts({0.5, 0, 0, 0}, {0, 0}));
    sys.maps.push_back(AffineMap::from_parts({0, 0, 0, 0.5}, {1, 0}));
    sys.probs = sampling_probabilities(sys.maps);
    sys.seed = 77;
    const std::string line = format_ifs_record(sys);
    CHECK(line.substr(0, 7) == "77 2 0 ");
    const IfsSystem back = parse_ifs_record(line);
    CHECK(back.probs[0] == 0.5);
    CHECK(back.probs[1] == 0.5);
}
