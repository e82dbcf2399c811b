#include "frax/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "frax/rng.hpp"
#include "frax/worker_pool.hpp"

namespace frax {

namespace {

constexpr double kDegenerateExtent = 1e-12;

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    h = h - std::floor(h);
    const double hh = h * 6.0;
    const int sector = std::min(5, static_cast<int>(hh));
    const double f = hh - sector;
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

}  // namespace

RenderStyle parse_render_style(const std::string& name) {
    if (name == "density-gray") return RenderStyle::density_gray;
    if (name == "binary") return RenderStyle::binary;
    if (name == "colored") return RenderStyle::colored;
    throw std::invalid_argument("unknown render style '" + name + "'");
}

Background parse_background(const std::string& name) {
    if (name == "black") return Background::black;
    if (name == "gradient") return Background::gradient;
    throw std::invalid_argument("unknown background '" + name + "'");
}

std::string to_string(RenderStyle style) {
    switch (style) {
        case RenderStyle::density_gray: return "density-gray";
        case RenderStyle::binary: return "binary";
        case RenderStyle::colored: return "colored";
    }
    return "?";
}

std::string to_string(Background bg) {
    return bg == Background::black ? "black" : "gradient";
}

void RenderConfig::validate() const {
    if (width < 16 || height < 16)
        throw std::invalid_argument("render config: resolution must be at least 16x16");
    if (burn_in < 0) throw std::invalid_argument("render config: negative burn_in");
    if (points <= burn_in)
        throw std::invalid_argument("render config: points must exceed burn_in");
    if (supersample < 1 || supersample > 8)
        throw std::invalid_argument("render config: supersample must be in [1, 8]");
    if (!(scale > 0.0)) throw std::invalid_argument("render config: scale must be positive");
    if (!std::isfinite(rotate_deg))
        throw std::invalid_argument("render config: rotation must be finite");
}

std::vector<Vec2> iterate_points(const IfsSystem& system, long points, long burn_in,
                                 std::uint64_t render_seed) {
    validate_system(system);
    if (burn_in < 0 || points <= burn_in)
        throw std::invalid_argument("iterate_points: points must exceed burn_in >= 0");

    const int n = system.size();
    double cdf[8];
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += system.probs[i];
        cdf[i] = acc;
    }
    cdf[n - 1] = 1.0;

    double max_b = 0.0, max_s1 = 0.0;
    for (const auto& m : system.maps) {
        max_b = std::max(max_b, std::hypot(m.translation.x, m.translation.y));
        max_s1 = std::max(max_s1, m.sigma1);
    }
    const double bound = max_b / (1.0 - max_s1);
    const double bound2 = bound * bound * (1.0 + 1e-9) + 1e-12;

    Rng rng(render_seed);
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(points - burn_in));
    Vec2 x{0.0, 0.0};
    for (long it = 0; it < points; ++it) {
        const double u = rng.uniform();
        int pick = n - 1;
        for (int i = 0; i < n; ++i) {
            if (u < cdf[i]) {
                pick = i;
                break;
            }
        }
        x = system.maps[pick].apply(x);
        if (x.x * x.x + x.y * x.y > bound2)
            throw std::logic_error("iterate_points: trajectory escaped contraction bound");
        if (it >= burn_in) out.push_back(x);
    }
    return out;
}

RenderedAttractor rasterize(const std::vector<Vec2>& points, const RenderConfig& config) {
    config.validate();
    if (points.empty()) throw std::invalid_argument("rasterize: empty point set");

    RenderedAttractor out;
    Vec2 lo = points[0], hi = points[0];
    for (const Vec2& p : points) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }
    out.bbox_min = lo;
    out.bbox_max = hi;

    const int w = config.width, h = config.height;
    const int ss = config.supersample;
    const int sw = w * ss, sh = h * ss;
    const double ext_x = hi.x - lo.x;
    const double ext_y = hi.y - lo.y;

    std::vector<std::uint32_t> counts(static_cast<std::size_t>(sw) * sh, 0);

    if (ext_x < kDegenerateExtent && ext_y < kDegenerateExtent) {
        out.degenerate = true;
        // Centre supersample block of the centre pixel.
        const int cx = (w / 2) * ss + ss / 2;
        const int cy = (h / 2) * ss + ss / 2;
        counts[static_cast<std::size_t>(cy) * sw + cx] = static_cast<std::uint32_t>(points.size());
    } else {
        double fit = 1e300;
        if (ext_x >= kDegenerateExtent) fit = std::min(fit, 0.9 * sw / ext_x);
        if (ext_y >= kDegenerateExtent) fit = std::min(fit, 0.9 * sh / ext_y);
        const double mid_x = 0.5 * (lo.x + hi.x);
        const double mid_y = 0.5 * (lo.y + hi.y);
        const double cx = 0.5 * sw, cy = 0.5 * sh;

        // Frame-centre augmentation: flip, then rotate, then scale.
        const double theta = config.rotate_deg * (3.14159265358979323846 / 180.0);
        const double cs = std::cos(theta) * config.scale;
        const double sn = std::sin(theta) * config.scale;
        const double fx = config.hflip ? -1.0 : 1.0;

        for (const Vec2& p : points) {
            const double px = (p.x - mid_x) * fit * fx;
            const double py = (p.y - mid_y) * fit;
            const double ax = cs * px - sn * py + cx;
            const double ay = sn * px + cs * py + cy;
            const int ix = static_cast<int>(std::floor(ax));
            const int iy = static_cast<int>(std::floor(ay));
            if (ix < 0 || iy < 0 || ix >= sw || iy >= sh) continue;
            ++counts[static_cast<std::size_t>(iy) * sw + ix];
        }
    }

    std::uint32_t max_count = 0;
    for (std::uint32_t c : counts) max_count = std::max(max_count, c);

    // Per final pixel: total hits in its supersample block, and the mean of
    // the log tone-mapped block for antialiased grays.
    std::vector<std::uint64_t> block_hits(static_cast<std::size_t>(w) * h, 0);
    std::vector<double> gray(static_cast<std::size_t>(w) * h, 0.0);
    const double log_norm = max_count > 0 ? 255.0 / std::log1p(static_cast<double>(max_count)) : 0.0;
    for (int sy = 0; sy < sh; ++sy) {
        const int fy = sy / ss;
        for (int sx = 0; sx < sw; ++sx) {
            const std::uint32_t c = counts[static_cast<std::size_t>(sy) * sw + sx];
            if (c == 0) continue;
            const std::size_t fi = static_cast<std::size_t>(fy) * w + sx / ss;
            block_hits[fi] += c;
            gray[fi] += std::log1p(static_cast<double>(c)) * log_norm;
        }
    }
    const double inv_block = 1.0 / (ss * ss);
    double gray_max = 0.0;
    for (double& g : gray) {
        g *= inv_block;
        gray_max = std::max(gray_max, g);
    }
    // Restore the full range lost to box averaging.
    const double stretch = gray_max > 0.0 ? 255.0 / gray_max : 0.0;

    std::size_t occupied = 0;
    Image8 img(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t fi = static_cast<std::size_t>(y) * w + x;
            std::uint8_t* px = &img.at(x, y, 0);
            if (block_hits[fi] > 0) {
                ++occupied;
                if (config.style == RenderStyle::binary) {
                    px[0] = px[1] = px[2] = 255;
                } else {
                    const double g = std::min(255.0, gray[fi] * stretch);
                    if (config.style == RenderStyle::colored && config.hue >= 0.0) {
                        double r, gg, b;
                        hsv_to_rgb(config.hue, 0.85, g / 255.0, r, gg, b);
                        px[0] = static_cast<std::uint8_t>(std::lround(r * 255.0));
                        px[1] = static_cast<std::uint8_t>(std::lround(gg * 255.0));
                        px[2] = static_cast<std::uint8_t>(std::lround(b * 255.0));
                    } else {
                        const auto v = static_cast<std::uint8_t>(std::lround(g));
                        px[0] = px[1] = px[2] = v;
                    }
                }
            } else if (config.background == Background::gradient &&
                       config.style != RenderStyle::binary) {
                const auto v = static_cast<std::uint8_t>(std::lround(80.0 * y / (h - 1)));
                px[0] = px[1] = px[2] = v;
            }
        }
    }
    out.occupancy = static_cast<double>(occupied) / (static_cast<double>(w) * h);
    out.image = std::move(img);
    return out;
}

RenderedAttractor render(const IfsSystem& system, const RenderConfig& config,
                         std::uint64_t render_seed) {
    const std::vector<Vec2> pts = iterate_points(system, config.points, config.burn_in, render_seed);
    RenderedAttractor out = rasterize(pts, config);
    out.system_seed = system.seed;
    out.render_seed = render_seed;
    return out;
}

std::vector<RenderedAttractor> render_batch(const std::vector<RenderJob>& jobs, unsigned workers) {
    std::vector<RenderedAttractor> results(jobs.size());
    parallel_for(jobs.size(), workers, [&](std::size_t i) {
        results[i] = render(*jobs[i].system, jobs[i].config, jobs[i].render_seed);
    });
    return results;
}

}  // namespace frax
