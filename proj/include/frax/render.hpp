#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "frax/ifs.hpp"
#include "frax/image.hpp"

namespace frax {

enum class RenderStyle { density_gray, binary, colored };
enum class Background { black, gradient };

RenderStyle parse_render_style(const std::string& name);
Background parse_background(const std::string& name);
std::string to_string(RenderStyle style);
std::string to_string(Background bg);

struct RenderConfig {
    int width = 256, height = 256;
    long points = 100000;   // total chaos-game iterations
    long burn_in = 100;     // leading iterations discarded
    RenderStyle style = RenderStyle::density_gray;
    Background background = Background::black;
    int supersample = 1;
    // colored style only: hue in [0,1); negative renders neutral gray.
    double hue = -1.0;
    // Render-time augmentation, applied about the frame centre after the
    // attractor is fitted to the frame: flip, then rotate, then scale.
    double rotate_deg = 0.0;
    double scale = 1.0;
    bool hflip = false;

    void validate() const;
};

struct RenderedAttractor {
    Image8 image;  // always 3-channel
    Vec2 bbox_min, bbox_max;
    double occupancy = 0.0;  // fraction of pixels hit by at least one point
    bool degenerate = false;
    std::uint64_t system_seed = 0;
    std::uint64_t render_seed = 0;
};

// Runs the chaos game: starts at the origin, repeatedly applies a map drawn
// by the system's probabilities, and returns the points after burn-in. Every
// point is checked against the contraction bound max|b| / (1 - max sigma1).
std::vector<Vec2> iterate_points(const IfsSystem& system, long points, long burn_in,
                                 std::uint64_t render_seed);

// Maps the point cloud into the central 90% of the frame (aspect preserved),
// accumulates per-pixel hit counts at supersampled resolution, tone-maps
// log(1 + count) to 8 bits and box-downsamples. A collapsed bounding box
// (extent below 1e-12 in both axes) produces a single centred dot and sets
// the degenerate flag.
RenderedAttractor rasterize(const std::vector<Vec2>& points, const RenderConfig& config);

RenderedAttractor render(const IfsSystem& system, const RenderConfig& config,
                         std::uint64_t render_seed);

struct RenderJob {
    const IfsSystem* system = nullptr;
    RenderConfig config;
    std::uint64_t render_seed = 0;
};

// Renders jobs in parallel; results are ordered by job index regardless of
// the worker count.
std::vector<RenderedAttractor> render_batch(const std::vector<RenderJob>& jobs, unsigned workers);

}  // namespace frax
