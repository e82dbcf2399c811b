#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace frax {

// 8-bit image, row-major, channels interleaved. channels is 1 (gray) or 3 (RGB).
struct Image8 {
    int width = 0, height = 0, channels = 1;
    std::vector<std::uint8_t> pixels;

    Image8() = default;
    Image8(int w, int h, int c)
        : width(w), height(h), channels(c),
          pixels(static_cast<std::size_t>(w) * h * c, 0) {}

    std::uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t size_bytes() const { return pixels.size(); }
};

// Reads a PNG or BMP file, producing a 1- or 3-channel image.
Image8 read_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image8& image);

Image8 to_gray(const Image8& image);
Image8 to_rgb(const Image8& image);

Image8 resize_bilinear(const Image8& image, int width, int height);
Image8 resize_nearest(const Image8& image, int width, int height);

}  // namespace frax
