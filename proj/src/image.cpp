#include "frax/image.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "frax/bytes.hpp"

namespace frax {

namespace {

struct FileCloser {
    FILE* f;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

Image8 read_png(const std::filesystem::path& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open image " + path.string());
    FileCloser closer{f};

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png: failed to allocate read struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png: failed to allocate info struct");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: failed to decode " + path.string());
    }
    png_init_io(png, f);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: unsupported channel count in " + path.string());
    }

    Image8 img(static_cast<int>(w), static_cast<int>(h), channels);
    std::vector<png_bytep> rows(h);
    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

// Uncompressed BMP: 8-bit palette, 24-bit BGR and 32-bit BGRA variants.
Image8 read_bmp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    try {
        ByteReader r(data.data(), data.size());
        if (r.u8() != 'B' || r.u8() != 'M') r.fail("not a BMP file");
        r.u32();  // file size
        r.u32();  // reserved
        const std::uint32_t pixel_offset = r.u32();
        const std::uint32_t header_size = r.u32();
        if (header_size < 40) r.fail("unsupported BMP header");
        const std::int32_t w = static_cast<std::int32_t>(r.u32());
        const std::int32_t h_raw = static_cast<std::int32_t>(r.u32());
        r.u16();  // planes
        const std::uint16_t bpp = r.u16();
        const std::uint32_t compression = r.u32();
        if (compression != 0) r.fail("compressed BMP not supported");
        if (w <= 0 || h_raw == 0) r.fail("invalid BMP dimensions");
        const bool top_down = h_raw < 0;
        const std::int32_t h = top_down ? -h_raw : h_raw;

        std::uint8_t palette[256][3];
        if (bpp == 8) {
            r.u32();  // image size
            r.u32();
            r.u32();  // resolution
            const std::uint32_t colors_raw = r.u32();
            r.u32();  // important colors
            const std::uint32_t colors = colors_raw == 0 ? 256 : colors_raw;
            if (colors > 256) r.fail("invalid BMP palette size");
            ByteReader pal(data.data(), data.size());
            for (std::uint32_t i = 0; i < 14 + header_size; ++i) pal.u8();
            for (std::uint32_t i = 0; i < colors; ++i) {
                palette[i][2] = pal.u8();
                palette[i][1] = pal.u8();
                palette[i][0] = pal.u8();
                pal.u8();
            }
        } else if (bpp != 24 && bpp != 32) {
            r.fail("unsupported BMP bit depth " + std::to_string(bpp));
        }

        const std::size_t row_bytes = (static_cast<std::size_t>(w) * bpp / 8 + 3) & ~std::size_t{3};
        if (data.size() < pixel_offset + row_bytes * h)
            throw ParseError(data.size(), "BMP pixel data truncated");

        Image8 img(w, h, 3);
        for (std::int32_t y = 0; y < h; ++y) {
            const std::int32_t src_y = top_down ? y : h - 1 - y;
            const std::uint8_t* row = data.data() + pixel_offset + row_bytes * src_y;
            for (std::int32_t x = 0; x < w; ++x) {
                if (bpp == 8) {
                    const std::uint8_t idx = row[x];
                    img.at(x, y, 0) = palette[idx][0];
                    img.at(x, y, 1) = palette[idx][1];
                    img.at(x, y, 2) = palette[idx][2];
                } else {
                    const std::uint8_t* px = row + x * (bpp / 8);
                    img.at(x, y, 0) = px[2];
                    img.at(x, y, 1) = px[1];
                    img.at(x, y, 2) = px[0];
                }
            }
        }
        return img;
    } catch (const ParseError& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

}  // namespace

Image8 read_image(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw std::runtime_error("cannot open image " + path.string());
    char sig[2] = {0, 0};
    probe.read(sig, 2);
    probe.close();
    if (sig[0] == 'B' && sig[1] == 'M') return read_bmp(path);
    return read_png(path);
}

void write_png(const std::filesystem::path& path, const Image8& image) {
    if (image.channels != 1 && image.channels != 3)
        throw std::invalid_argument("write_png: channels must be 1 or 3");
    if (image.width <= 0 || image.height <= 0)
        throw std::invalid_argument("write_png: empty image");
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot create " + path.string());
    FileCloser closer{f};

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png: failed to allocate write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png: failed to allocate info struct");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: failed to encode " + path.string());
    }
    png_init_io(png, f);
    png_set_IHDR(png, info, image.width, image.height, 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    for (int y = 0; y < image.height; ++y)
        png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image8 to_gray(const Image8& image) {
    if (image.channels == 1) return image;
    Image8 out(image.width, image.height, 1);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const double v = 0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) +
                             0.114 * image.at(x, y, 2);
            out.at(x, y, 0) = static_cast<std::uint8_t>(std::lround(v));
        }
    }
    return out;
}

Image8 to_rgb(const Image8& image) {
    if (image.channels == 3) return image;
    Image8 out(image.width, image.height, 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const std::uint8_t v = image.at(x, y, 0);
            out.at(x, y, 0) = v;
            out.at(x, y, 1) = v;
            out.at(x, y, 2) = v;
        }
    }
    return out;
}

Image8 resize_bilinear(const Image8& image, int width, int height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("resize: invalid target size");
    if (width == image.width && height == image.height) return image;
    Image8 out(width, height, image.channels);
    const double sx = static_cast<double>(image.width) / width;
    const double sy = static_cast<double>(image.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        y0 = std::max(0, std::min(image.height - 1, y0));
        const int y1 = std::max(0, std::min(image.height - 1, y0 + 1));
        for (int x = 0; x < width; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            x0 = std::max(0, std::min(image.width - 1, x0));
            const int x1 = std::max(0, std::min(image.width - 1, x0 + 1));
            for (int c = 0; c < image.channels; ++c) {
                const double v = (1 - wy) * ((1 - wx) * image.at(x0, y0, c) + wx * image.at(x1, y0, c)) +
                                 wy * ((1 - wx) * image.at(x0, y1, c) + wx * image.at(x1, y1, c));
                out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::min(255.0, std::max(0.0, v))));
            }
        }
    }
    return out;
}

Image8 resize_nearest(const Image8& image, int width, int height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("resize: invalid target size");
    if (width == image.width && height == image.height) return image;
    Image8 out(width, height, image.channels);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(image.height - 1,
                                static_cast<int>((y + 0.5) * image.height / height));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(image.width - 1,
                                    static_cast<int>((x + 0.5) * image.width / width));
            for (int c = 0; c < image.channels; ++c) out.at(x, y, c) = image.at(sx, sy, c);
        }
    }
    return out;
}

}  // namespace frax
