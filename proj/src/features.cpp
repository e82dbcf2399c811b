#include "frax/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "frax/bytes.hpp"
#include "frax/rng.hpp"

namespace frax {

namespace {

constexpr int kStageChannels[5] = {32, 32, 64, 128, 256};  // stem, then levels 1..4

// 3x3 stride-2 same-padding convolution with ReLU and no bias. Weights are
// laid out [tap][in][out] and each output accumulator runs over taps and
// input channels in a fixed serial order; the compilation unit is built with
// contraction disabled, so results are bit-identical across platforms.
void conv3x3_s2_relu(const std::vector<float>& in, int in_h, int in_w, int in_c,
                     const std::vector<float>& weights, int out_c, std::vector<float>& out,
                     int& out_h, int& out_w) {
    out_h = (in_h + 1) / 2;
    out_w = (in_w + 1) / 2;
    out.assign(static_cast<std::size_t>(out_h) * out_w * out_c, 0.0f);
    std::vector<float> acc(out_c);
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            std::fill(acc.begin(), acc.end(), 0.0f);
            for (int ky = 0; ky < 3; ++ky) {
                const int iy = 2 * oy + ky - 1;
                if (iy < 0 || iy >= in_h) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const int ix = 2 * ox + kx - 1;
                    if (ix < 0 || ix >= in_w) continue;
                    const float* src = &in[(static_cast<std::size_t>(iy) * in_w + ix) * in_c];
                    const float* w =
                        &weights[static_cast<std::size_t>(ky * 3 + kx) * in_c * out_c];
                    for (int ic = 0; ic < in_c; ++ic) {
                        const float x = src[ic];
                        const float* wc = w + static_cast<std::size_t>(ic) * out_c;
                        for (int oc = 0; oc < out_c; ++oc) acc[oc] += x * wc[oc];
                    }
                }
            }
            float* dst = &out[(static_cast<std::size_t>(oy) * out_w + ox) * out_c];
            for (int oc = 0; oc < out_c; ++oc) dst[oc] = acc[oc] > 0.0f ? acc[oc] : 0.0f;
        }
    }
}

std::vector<float> stage_weights(std::uint64_t extractor_seed, int stage, int in_c, int out_c) {
    Rng rng(derive_seed(extractor_seed, SEED_FILTER_BANK, stage));
    const float scale = std::sqrt(2.0f / (9.0f * static_cast<float>(in_c)));
    std::vector<float> w(static_cast<std::size_t>(9) * in_c * out_c);
    for (auto& v : w) v = static_cast<float>(rng.normal()) * scale;
    return w;
}

}  // namespace

void LevelSelection::validate() const {
    if (levels.empty()) throw std::invalid_argument("level selection: empty");
    int prev = 0;
    for (int j : levels) {
        if (j < 1 || j > 4)
            throw std::invalid_argument("level selection: level " + std::to_string(j) +
                                        " outside [1, 4]");
        if (j <= prev)
            throw std::invalid_argument("level selection: levels must be strictly ascending");
        prev = j;
    }
}

LevelSelection LevelSelection::parse(const std::string& text) {
    LevelSelection sel;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok.empty()) throw std::invalid_argument("level selection: empty entry in '" + text + "'");
        std::size_t pos = 0;
        int v;
        try {
            v = std::stoi(tok, &pos);
        } catch (const std::exception&) {
            throw std::invalid_argument("level selection: invalid level '" + tok + "'");
        }
        if (pos != tok.size())
            throw std::invalid_argument("level selection: invalid level '" + tok + "'");
        sel.levels.push_back(v);
    }
    sel.validate();
    return sel;
}

std::string LevelSelection::to_string() const {
    std::string s;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(levels[i]);
    }
    return s;
}

std::vector<FeatureTensor> extract_builtin(const Image8& image, const LevelSelection& selection,
                                           std::uint64_t extractor_seed) {
    selection.validate();
    if (image.width != image.height ||
        (image.width != 64 && image.width != 128 && image.width != 256))
        throw std::invalid_argument("extract: image must be square with side 64, 128 or 256, got " +
                                    std::to_string(image.width) + "x" +
                                    std::to_string(image.height));

    const Image8 rgb = to_rgb(image);
    std::vector<float> cur(rgb.pixels.size());
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = rgb.pixels[i] / 255.0f;
    int h = rgb.height, w = rgb.width, c = 3;

    const int max_level = selection.levels.back();
    std::vector<FeatureTensor> out;
    for (int stage = 0; stage <= max_level; ++stage) {
        const int out_c = kStageChannels[stage];
        const std::vector<float> weights = stage_weights(extractor_seed, stage, c, out_c);
        std::vector<float> next;
        int nh, nw;
        conv3x3_s2_relu(cur, h, w, c, weights, out_c, next, nh, nw);
        cur = std::move(next);
        h = nh;
        w = nw;
        c = out_c;
        if (stage >= 1 &&
            std::find(selection.levels.begin(), selection.levels.end(), stage) !=
                selection.levels.end()) {
            FeatureTensor t;
            t.level = stage;
            t.grid_h = h;
            t.grid_w = w;
            t.dim = c;
            t.data = cur;
            t.source = FeatureSource::builtin_random;
            out.push_back(std::move(t));
        }
    }
    return out;
}

FeatureTensor fuse(const std::vector<FeatureTensor>& tensors) {
    if (tensors.empty()) throw std::invalid_argument("fuse: no tensors");
    std::vector<const FeatureTensor*> sorted;
    for (const auto& t : tensors) sorted.push_back(&t);
    std::sort(sorted.begin(), sorted.end(),
              [](const FeatureTensor* a, const FeatureTensor* b) { return a->level < b->level; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i]->level == sorted[i - 1]->level)
            throw std::invalid_argument("fuse: duplicate level " +
                                        std::to_string(sorted[i]->level));
    }

    const int th = sorted.front()->grid_h;
    const int tw = sorted.front()->grid_w;
    for (const auto* t : sorted) {
        if (t->grid_h > th || t->grid_w > tw)
            throw std::invalid_argument("fuse: coarser level has finer grid");
        if (t->grid_h < 1 || t->grid_w < 1 || t->dim < 1)
            throw std::invalid_argument("fuse: empty tensor");
    }

    FeatureTensor fused;
    fused.level = sorted.front()->level;
    fused.grid_h = th;
    fused.grid_w = tw;
    fused.source = sorted.front()->source;
    int dim = 0;
    for (const auto* t : sorted) dim += t->dim;
    fused.dim = dim;
    fused.data.assign(static_cast<std::size_t>(th) * tw * dim, 0.0f);

    int offset = 0;
    for (const auto* t : sorted) {
        for (int y = 0; y < th; ++y) {
            const int sy = std::min(t->grid_h - 1, y * t->grid_h / th);
            for (int x = 0; x < tw; ++x) {
                const int sx = std::min(t->grid_w - 1, x * t->grid_w / tw);
                const float* src = &t->data[(static_cast<std::size_t>(sy) * t->grid_w + sx) * t->dim];
                float* dst = &fused.data[(static_cast<std::size_t>(y) * tw + x) * dim + offset];
                for (int cc = 0; cc < t->dim; ++cc) dst[cc] = src[cc];
            }
        }
        offset += t->dim;
    }
    return fused;
}

void write_feature_file(const std::filesystem::path& path,
                        const std::vector<FeatureTensor>& tensors) {
    if (tensors.empty() || tensors.size() > 255)
        throw std::invalid_argument("feature file: level count must be in [1, 255]");
    int prev = 0;
    for (const auto& t : tensors) {
        if (t.level <= prev)
            throw std::invalid_argument("feature file: levels must be strictly ascending");
        prev = t.level;
        if (t.level < 1 || t.level > 4 || t.grid_h < 1 || t.grid_w < 1 || t.dim < 1 ||
            t.data.size() != t.cells() * static_cast<std::size_t>(t.dim))
            throw std::invalid_argument("feature file: malformed tensor at level " +
                                        std::to_string(t.level));
    }
    ByteWriter wtr;
    wtr.bytes("FTNS", 4);
    wtr.u8(1);
    wtr.u8(static_cast<std::uint8_t>(tensors.size()));
    for (const auto& t : tensors) {
        wtr.u8(static_cast<std::uint8_t>(t.level));
        wtr.u16(static_cast<std::uint16_t>(t.grid_h));
        wtr.u16(static_cast<std::uint16_t>(t.grid_w));
        wtr.u32(static_cast<std::uint32_t>(t.dim));
        for (float v : t.data) wtr.f32(v);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write feature file " + path.string());
    out.write(reinterpret_cast<const char*>(wtr.data().data()),
              static_cast<std::streamsize>(wtr.size()));
    if (!out) throw std::runtime_error("write failed for feature file " + path.string());
}

std::vector<FeatureTensor> read_feature_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open feature file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    ByteReader r(bytes.data(), bytes.size());

    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "FTNS", 4) != 0) throw ParseError(0, "bad magic, not a feature file");
    const std::uint8_t version = r.u8();
    if (version != 1) throw ParseError(4, "unsupported version " + std::to_string(version));
    const std::size_t count_pos = r.pos();
    const std::uint8_t count = r.u8();
    if (count == 0) throw ParseError(count_pos, "level count is zero");

    std::vector<FeatureTensor> tensors;
    int prev = 0;
    for (int i = 0; i < count; ++i) {
        FeatureTensor t;
        const std::size_t level_pos = r.pos();
        t.level = r.u8();
        if (t.level < 1 || t.level > 4)
            throw ParseError(level_pos, "level " + std::to_string(t.level) + " outside [1, 4]");
        if (t.level <= prev) throw ParseError(level_pos, "levels must be strictly ascending");
        prev = t.level;
        t.grid_h = r.u16();
        t.grid_w = r.u16();
        const std::size_t dim_pos = r.pos();
        t.dim = static_cast<int>(r.u32());
        if (t.grid_h < 1 || t.grid_w < 1 || t.dim < 1 || t.dim > (1 << 20))
            throw ParseError(dim_pos, "invalid tensor shape");
        const std::size_t n = t.cells() * static_cast<std::size_t>(t.dim);
        t.data.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t vpos = r.pos();
            t.data[k] = r.f32();
            if (!std::isfinite(t.data[k])) throw ParseError(vpos, "non-finite feature value");
        }
        t.source = FeatureSource::imported;
        tensors.push_back(std::move(t));
    }
    if (!r.done()) throw ParseError(r.pos(), "trailing bytes after last tensor");
    return tensors;
}

}  // namespace frax
