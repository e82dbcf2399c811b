#include "frax/ifs.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "frax/config.hpp"
#include "frax/rng.hpp"

namespace frax {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr int kMaxRejections = 10000;
constexpr double kDetFloor = 1e-12;

Mat2 rotation(double theta, bool reflect) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    // Optional reflection flips the second column: R(theta) * diag(1, -1).
    if (reflect) return {c, s, s, -c};
    return {c, -s, s, c};
}

Mat2 mat_mul(const Mat2& a, const Mat2& b) {
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
            a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}

AffineMap draw_map(Rng& rng) {
    const double theta_u = rng.uniform() * kTwoPi;
    const bool refl_u = rng.coin();
    const double theta_v = rng.uniform() * kTwoPi;
    const bool refl_v = rng.coin();
    const double s_a = rng.uniform_open();
    const double s_b = rng.uniform_open();
    const double sigma1 = std::max(s_a, s_b);
    const double sigma2 = std::min(s_a, s_b);

    const Mat2 u = rotation(theta_u, refl_u);
    const Mat2 v = rotation(theta_v, refl_v);
    const Mat2 sv = {sigma1 * v.a11, sigma1 * v.a21, sigma2 * v.a12, sigma2 * v.a22};
    AffineMap m;
    m.linear = mat_mul(u, sv);
    m.translation = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    m.sigma1 = sigma1;
    m.sigma2 = sigma2;
    return m;
}

double alpha_of(const std::vector<AffineMap>& maps) {
    double alpha = 0.0;
    for (const auto& m : maps) alpha += m.sigma1 + 2.0 * m.sigma2;
    return alpha;
}

}  // namespace

std::pair<double, double> singular_values(const Mat2& A) {
    const double q1 = A.a11 * A.a11 + A.a12 * A.a12 + A.a21 * A.a21 + A.a22 * A.a22;
    const double h1 = A.a11 * A.a11 + A.a12 * A.a12 - A.a21 * A.a21 - A.a22 * A.a22;
    const double h2 = A.a11 * A.a21 + A.a12 * A.a22;
    const double q2 = std::sqrt(h1 * h1 + 4.0 * h2 * h2);
    const double s1 = std::sqrt(0.5 * (q1 + q2));
    const double s2 = std::sqrt(std::max(0.0, 0.5 * (q1 - q2)));
    return {s1, s2};
}

AffineMap AffineMap::from_parts(const Mat2& A, const Vec2& b) {
    AffineMap m;
    m.linear = A;
    m.translation = b;
    const auto [s1, s2] = singular_values(A);
    m.sigma1 = s1;
    m.sigma2 = s2;
    return m;
}

std::vector<double> sampling_probabilities(const std::vector<AffineMap>& maps) {
    std::vector<double> probs(maps.size());
    double total = 0.0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        probs[i] = std::fabs(maps[i].linear.det());
        total += probs[i];
    }
    if (total < kDetFloor) {
        const double uniform = 1.0 / static_cast<double>(maps.size());
        for (auto& p : probs) p = uniform;
        return probs;
    }
    for (auto& p : probs) p /= total;
    return probs;
}

double compute_alpha(const IfsSystem& system) { return alpha_of(system.maps); }

GeometryGate good_geometry(const IfsSystem& system) {
    GeometryGate g;
    g.n = system.size();
    g.alpha = compute_alpha(system);
    g.lower = 0.5 * (5.0 + g.n);
    g.upper = 0.5 * (6.0 + g.n);
    g.accepted = g.lower < g.alpha && g.alpha < g.upper;
    return g;
}

IfsSystem sample_system(std::uint64_t seed) {
    Rng rng(seed);
    const int n = 2 + static_cast<int>(rng.below(7));
    const double lower = 0.5 * (5.0 + n);
    const double upper = 0.5 * (6.0 + n);

    std::vector<AffineMap> maps;
    maps.reserve(n);
    for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
        maps.clear();
        for (int i = 0; i < n; ++i) maps.push_back(draw_map(rng));
        const double alpha = alpha_of(maps);
        if (lower < alpha && alpha < upper) {
            IfsSystem sys;
            sys.maps = std::move(maps);
            sys.probs = sampling_probabilities(sys.maps);
            sys.seed = seed;
            return sys;
        }
    }
    throw std::runtime_error("sample_system: geometry gate rejected " +
                             std::to_string(kMaxRejections) + " candidates for seed " +
                             std::to_string(seed) + " (n=" + std::to_string(n) + ")");
}

void validate_system(const IfsSystem& system) {
    const int n = system.size();
    if (n < 2 || n > 8)
        throw std::invalid_argument("ifs system: map count " + std::to_string(n) +
                                    " outside [2, 8]");
    if (system.probs.size() != system.maps.size())
        throw std::invalid_argument("ifs system: " + std::to_string(system.probs.size()) +
                                    " probabilities for " + std::to_string(n) + " maps");
    double sum = 0.0;
    for (double p : system.probs) {
        if (!(p >= 0.0)) throw std::invalid_argument("ifs system: negative probability");
        sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("ifs system: probabilities sum to " + format_double(sum));
    const std::vector<double> expected = sampling_probabilities(system.maps);
    for (int i = 0; i < n; ++i) {
        if (std::fabs(system.probs[i] - expected[i]) > 1e-9)
            throw std::invalid_argument("ifs system: probability " + std::to_string(i) +
                                        " inconsistent with determinants");
        const auto [s1, s2] = singular_values(system.maps[i].linear);
        if (std::fabs(system.maps[i].sigma1 - s1) > 1e-9 ||
            std::fabs(system.maps[i].sigma2 - s2) > 1e-9)
            throw std::invalid_argument("ifs system: cached singular values of map " +
                                        std::to_string(i) + " do not match the matrix");
        if (!(system.maps[i].sigma1 < 1.0))
            throw std::invalid_argument("ifs system: map " + std::to_string(i) +
                                        " is not a contraction (sigma1=" +
                                        format_double(system.maps[i].sigma1) + ")");
    }
}

std::string format_ifs_record(const IfsSystem& system) {
    double det_sum = 0.0;
    for (const auto& m : system.maps) det_sum += std::fabs(m.linear.det());
    const int det_probs = det_sum < kDetFloor ? 0 : 1;

    std::string line = std::to_string(system.seed) + " " + std::to_string(system.size()) + " " +
                       std::to_string(det_probs);
    for (int i = 0; i < system.size(); ++i) {
        const AffineMap& m = system.maps[i];
        for (double v : {m.linear.a11, m.linear.a12, m.linear.a21, m.linear.a22, m.translation.x,
                         m.translation.y, system.probs[i]}) {
            line += ' ';
            line += format_double(v);
        }
    }
    return line;
}

IfsSystem parse_ifs_record(std::string_view line) {
    std::istringstream in{std::string(line)};
    IfsSystem sys;
    int n = 0, det_probs = 0;
    if (!(in >> sys.seed >> n >> det_probs))
        throw std::runtime_error("ifs record: malformed header fields");
    if (n < 2 || n > 8)
        throw std::runtime_error("ifs record: map count " + std::to_string(n) + " outside [2, 8]");
    if (det_probs != 0 && det_probs != 1)
        throw std::runtime_error("ifs record: det_probs flag must be 0 or 1");

    for (int i = 0; i < n; ++i) {
        double f[7];
        for (double& v : f) {
            if (!(in >> v))
                throw std::runtime_error("ifs record: truncated at map " + std::to_string(i));
        }
        sys.maps.push_back(AffineMap::from_parts({f[0], f[1], f[2], f[3]}, {f[4], f[5]}));
        sys.probs.push_back(f[6]);
    }
    std::string extra;
    if (in >> extra) throw std::runtime_error("ifs record: trailing data '" + extra + "'");

    double det_sum = 0.0;
    for (const auto& m : sys.maps) det_sum += std::fabs(m.linear.det());
    if ((det_sum < kDetFloor) == (det_probs == 1))
        throw std::runtime_error("ifs record: det_probs flag inconsistent with matrices");
    const std::vector<double> expected = sampling_probabilities(sys.maps);
    for (int i = 0; i < n; ++i) {
        if (std::fabs(sys.probs[i] - expected[i]) > 1e-9)
            throw std::runtime_error("ifs record: probability " + std::to_string(i) +
                                     " inconsistent with determinants");
    }
    return sys;
}

void write_ifs_file(const std::filesystem::path& path, const std::vector<IfsSystem>& systems) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write ifs file " + path.string());
    for (const auto& sys : systems) out << format_ifs_record(sys) << '\n';
    if (!out) throw std::runtime_error("write failed for ifs file " + path.string());
}

std::vector<IfsSystem> read_ifs_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ifs file " + path.string());
    std::vector<IfsSystem> systems;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            systems.push_back(parse_ifs_record(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " +
                                     e.what());
        }
    }
    return systems;
}

}  // namespace frax
