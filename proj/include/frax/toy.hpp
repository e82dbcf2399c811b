#pragma once

#include <cstdint>
#include <filesystem>

namespace frax {

// Procedural anomaly-detection benchmark in the class/train/test/ground_truth
// folder layout: three regular textures (stripes, checks, low-frequency
// waves), each with jittered phase, amplitude and pixel noise; defect images
// carry a high-contrast square spot or a straight line with exact masks.
struct ToyConfig {
    int num_classes = 3;          // capped at 3 distinct textures
    int train_per_class = 40;
    int test_good_per_class = 20;
    int test_defect_per_class = 20;  // split evenly between spot and line
    int image_size = 128;
    std::uint64_t seed = 7;

    void validate() const;
};

void generate_toy_dataset(const ToyConfig& config, const std::filesystem::path& root);

}  // namespace frax
