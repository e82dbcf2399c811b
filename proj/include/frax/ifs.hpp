#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace frax {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

struct Mat2 {
    // Row-major: [a11 a12; a21 a22].
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    double det() const { return a11 * a22 - a12 * a21; }

    Vec2 apply(Vec2 v) const { return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y}; }
};

// Closed-form singular values of a 2x2 matrix, largest first.
std::pair<double, double> singular_values(const Mat2& A);

struct AffineMap {
    Mat2 linear;
    Vec2 translation;
    // Cached singular values of `linear`, sigma1 >= sigma2 >= 0.
    double sigma1 = 0.0, sigma2 = 0.0;

    static AffineMap from_parts(const Mat2& A, const Vec2& b);

    Vec2 apply(Vec2 v) const {
        return {linear.a11 * v.x + linear.a12 * v.y + translation.x,
                linear.a21 * v.x + linear.a22 * v.y + translation.y};
    }
};

struct IfsSystem {
    std::vector<AffineMap> maps;
    std::vector<double> probs;
    std::uint64_t seed = 0;

    int size() const { return static_cast<int>(maps.size()); }
};

struct GeometryGate {
    int n = 0;
    double alpha = 0.0;
    double lower = 0.0, upper = 0.0;
    bool accepted = false;
};

// Per-map selection probabilities proportional to |det A_i|; uniform when the
// determinants are collectively negligible (sum below 1e-12).
std::vector<double> sampling_probabilities(const std::vector<AffineMap>& maps);

// alpha = sum_i (sigma1_i + 2 sigma2_i), the geometry statistic gating samplers.
double compute_alpha(const IfsSystem& system);

// Acceptance band (5+N)/2 < alpha < (6+N)/2, both bounds strict.
GeometryGate good_geometry(const IfsSystem& system);

// Draws one system: N uniform on {2..8}, maps built as U diag(s1,s2) V^T with
// rotations plus optional reflections and singular values in (0,1), whole map
// sets redrawn until the geometry gate accepts. Throws after 10000 rejections.
IfsSystem sample_system(std::uint64_t seed);

// Checks invariants needed before iterating: 2..8 maps, probabilities forming
// a distribution consistent with the determinants, cached singular values
// matching the matrices, and contraction (sigma1 < 1). Throws on violation.
void validate_system(const IfsSystem& system);

// One-line text record: seed N det_probs, then per map a11 a12 a21 a22 b1 b2 p.
std::string format_ifs_record(const IfsSystem& system);
IfsSystem parse_ifs_record(std::string_view line);

void write_ifs_file(const std::filesystem::path& path, const std::vector<IfsSystem>& systems);
std::vector<IfsSystem> read_ifs_file(const std::filesystem::path& path);

}  // namespace frax
