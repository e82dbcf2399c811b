#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "frax/image.hpp"

namespace frax {

enum class FeatureSource { builtin_random, imported };

// Dense feature grid at one pyramid level; data is row-major, channel-last.
struct FeatureTensor {
    int level = 0;
    int grid_h = 0, grid_w = 0, dim = 0;
    std::vector<float> data;
    FeatureSource source = FeatureSource::builtin_random;

    float& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * grid_w + x) * dim + c];
    }
    float at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * grid_w + x) * dim + c];
    }
    std::size_t cells() const { return static_cast<std::size_t>(grid_h) * grid_w; }
};

struct LevelSelection {
    std::vector<int> levels;  // strictly ascending subset of {1,2,3,4}

    void validate() const;
    static LevelSelection parse(const std::string& text);  // e.g. "1,2"
    std::string to_string() const;
};

// Seed-derived random-filter pyramid. The image (square, side 64/128/256) is
// pushed through a stride-2 stem and four stride-2 stages of 3x3 convolutions
// with ReLU and no bias, so level j has grid side/2^(j+1) and 32*2^(j-1)
// channels. Filters depend only on extractor_seed and accumulation order is
// fixed, so feature bytes are reproducible everywhere.
std::vector<FeatureTensor> extract_builtin(const Image8& image, const LevelSelection& selection,
                                           std::uint64_t extractor_seed);

// Nearest-neighbour upsample of every tensor to the finest grid present,
// then channel concatenation in ascending level order.
FeatureTensor fuse(const std::vector<FeatureTensor>& tensors);

void write_feature_file(const std::filesystem::path& path,
                        const std::vector<FeatureTensor>& tensors);
std::vector<FeatureTensor> read_feature_file(const std::filesystem::path& path);

}  // namespace frax
