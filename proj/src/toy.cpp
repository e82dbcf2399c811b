#include "frax/toy.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "frax/image.hpp"
#include "frax/rng.hpp"

namespace frax {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

const char* kClassNames[3] = {"stripe", "check", "wave"};

Image8 texture_image(int cls, int size, Rng& rng) {
    const double phase_a = rng.uniform() * 0.5;
    const double phase_b = rng.uniform() * 0.5;
    const double amp = 1.0 + 0.1 * (rng.uniform() - 0.5);
    Image8 img(size, size, 1);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = static_cast<double>(x) / size;
            const double v = static_cast<double>(y) / size;
            double t;
            switch (cls) {
                case 0:
                    t = std::sin(kTau * 6.0 * v + phase_a);
                    break;
                case 1:
                    t = std::sin(kTau * 5.0 * u + phase_a) * std::sin(kTau * 5.0 * v + phase_b);
                    break;
                default:
                    t = std::sin(kTau * 2.0 * u + phase_a) * std::cos(kTau * 3.0 * v + phase_b);
                    break;
            }
            double value = 128.0 + 80.0 * amp * t + rng.normal() * 3.0;
            value = std::min(255.0, std::max(0.0, value));
            img.at(x, y, 0) = static_cast<std::uint8_t>(std::lround(value));
        }
    }
    return img;
}

// Plants a defect, returns the exact mask. Spot: filled square pushed to the
// intensity extreme opposite the local texture. Line: straight full-span bar.
Image8 plant_defect(Image8& img, bool spot, Rng& rng) {
    const int size = img.width;
    Image8 mask(size, size, 1);
    if (spot) {
        const int side = size / 6 + static_cast<int>(rng.below(size / 12 + 1));
        const int margin = size / 10;
        const int x0 = margin + static_cast<int>(rng.below(size - side - 2 * margin));
        const int y0 = margin + static_cast<int>(rng.below(size - side - 2 * margin));
        for (int y = y0; y < y0 + side; ++y) {
            for (int x = x0; x < x0 + side; ++x) {
                img.at(x, y, 0) = img.at(x, y, 0) < 128 ? 235 : 20;
                mask.at(x, y, 0) = 255;
            }
        }
    } else {
        const int thickness = 6 + static_cast<int>(rng.below(3));
        const bool horizontal = rng.coin();
        const int margin = size / 10;
        const int offset = margin + static_cast<int>(rng.below(size - thickness - 2 * margin));
        for (int k = 0; k < size; ++k) {
            for (int t = 0; t < thickness; ++t) {
                const int x = horizontal ? k : offset + t;
                const int y = horizontal ? offset + t : k;
                img.at(x, y, 0) = img.at(x, y, 0) < 128 ? 235 : 20;
                mask.at(x, y, 0) = 255;
            }
        }
    }
    return mask;
}

std::string file_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d.png", index);
    return buf;
}

}  // namespace

void ToyConfig::validate() const {
    if (num_classes < 1 || num_classes > 3)
        throw std::invalid_argument("toy config: num_classes must be in [1, 3]");
    if (train_per_class < 2)
        throw std::invalid_argument("toy config: need at least 2 training images per class");
    if (test_good_per_class < 1 || test_defect_per_class < 2)
        throw std::invalid_argument("toy config: need test images of both kinds per class");
    if (image_size != 64 && image_size != 128 && image_size != 256)
        throw std::invalid_argument("toy config: image_size must be 64, 128 or 256");
}

void generate_toy_dataset(const ToyConfig& config, const std::filesystem::path& root) {
    config.validate();
    namespace fs = std::filesystem;

    for (int cls = 0; cls < config.num_classes; ++cls) {
        const fs::path base = root / kClassNames[cls];
        std::error_code ec;
        for (const char* sub :
             {"train/good", "test/good", "test/spot", "test/line", "ground_truth/spot",
              "ground_truth/line"}) {
            fs::create_directories(base / sub, ec);
            if (ec)
                throw std::runtime_error("toy: cannot create " + (base / sub).string() + ": " +
                                         ec.message());
        }

        Rng rng(derive_seed(config.seed, 0x70 + cls));
        for (int i = 0; i < config.train_per_class; ++i) {
            write_png(base / "train/good" / file_name(i), texture_image(cls, config.image_size, rng));
        }
        for (int i = 0; i < config.test_good_per_class; ++i) {
            write_png(base / "test/good" / file_name(i), texture_image(cls, config.image_size, rng));
        }
        const int spots = (config.test_defect_per_class + 1) / 2;
        for (int i = 0; i < config.test_defect_per_class; ++i) {
            const bool spot = i < spots;
            const char* type = spot ? "spot" : "line";
            const int idx = spot ? i : i - spots;
            Image8 img = texture_image(cls, config.image_size, rng);
            const Image8 mask = plant_defect(img, spot, rng);
            const std::string name = file_name(idx);
            const std::string stem = name.substr(0, name.size() - 4);
            write_png(base / "test" / type / name, img);
            write_png(base / "ground_truth" / type / (stem + "_mask.png"), mask);
        }
    }
}

}  // namespace frax
