#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "frax/config.hpp"
#include "frax/ifs.hpp"
#include "frax/render.hpp"
#include "frax/sha256.hpp"

namespace frax {

// Full recipe for a streamed dataset. Everything that affects sample bytes
// lives here, so the canonical config hash identifies the dataset exactly.
struct DatasetSpec {
    std::uint32_t num_classes = 1000;
    std::uint32_t systems_per_class = 100;
    std::uint64_t samples_per_epoch = 1000000;
    int resolution = 256;
    std::uint64_t master_seed = 0;

    RenderStyle style = RenderStyle::density_gray;
    Background background = Background::black;
    long points = 100000;
    long burn_in = 100;
    int supersample = 1;

    double aug_rotate_min = -180.0, aug_rotate_max = 180.0;
    double aug_scale_min = 0.8, aug_scale_max = 1.1;
    bool aug_hflip = true;

    void validate() const;
    KvConfig to_config() const;
    static DatasetSpec from_config(const KvConfig& cfg);

    // SHA-256 of the canonical key=value form.
    Digest spec_hash() const;
};

// Seed of the IFS system backing member `member` of class `class_id`.
std::uint64_t member_system_seed(const DatasetSpec& spec, std::uint32_t class_id,
                                 std::uint32_t member);

// Samples every class member once, in parallel, verifying the geometry gate
// accepts each within the attempt cap. Returns the number of systems.
std::uint64_t enumerate_codes(const DatasetSpec& spec, unsigned workers,
                              const std::function<void(const IfsSystem&)>& sink = nullptr);

struct Sample {
    Image8 image;
    std::uint32_t class_id = 0;
    std::uint64_t system_seed = 0;
    std::uint64_t render_seed = 0;
};

// Deterministic random-access view of one training epoch: sample i is a pure
// function of (spec, epoch, i). Class and member indices, the render seed and
// the augmentation parameters are all derived from the master seed.
class EpochStream {
public:
    EpochStream(const DatasetSpec& spec, std::uint32_t epoch, int resolution = 0);

    std::uint64_t size() const { return spec_.samples_per_epoch; }
    std::uint32_t label_at(std::uint64_t index) const;
    Sample at(std::uint64_t index) const;
    std::vector<Sample> range(std::uint64_t start, std::uint64_t count, unsigned workers) const;

    const DatasetSpec& spec() const { return spec_; }

private:
    DatasetSpec spec_;
    std::uint32_t epoch_;
    int resolution_;
};

struct ManifestRow {
    std::string path;  // relative to the manifest directory
    std::uint32_t class_id = 0;
    std::uint64_t system_seed = 0;
    std::uint64_t render_seed = 0;
    std::string sha256_hex;
};

struct Manifest {
    std::vector<ManifestRow> rows;

    void write(const std::filesystem::path& path) const;
    static Manifest read(const std::filesystem::path& path);
};

// Renders images_per_class PNGs per class under out_dir/class_XXXX/, writes
// manifest.csv, dataset.conf and ifs_codes.txt. Rendering is resumable: rows
// whose file already exists with a matching checksum are kept as-is.
Manifest export_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir,
                        std::uint32_t images_per_class, unsigned workers);

}  // namespace frax
