#pragma once

#include <vector>

namespace frax {

// Dense per-pixel anomaly scores at image resolution. The image-level score
// is the maximum of the smoothed map.
struct AnomalyMap {
    int width = 0, height = 0;
    std::vector<double> scores;
    double image_score = 0.0;

    double at(int x, int y) const { return scores[static_cast<std::size_t>(y) * width + x]; }
};

}  // namespace frax
