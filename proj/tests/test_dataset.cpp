#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "frax/dataset.hpp"
#include "frax/rng.hpp"

using namespace frax;
namespace fs = std::filesystem;

namespace {

DatasetSpec small_spec() {
    DatasetSpec spec;
    spec.num_classes = 4;
    spec.systems_per_class = 3;
    spec.samples_per_epoch = 1000;
    spec.resolution = 32;
    spec.master_seed = 99;
    spec.points = 3000;
    spec.burn_in = 100;
    return spec;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("dataset spec validation") {
    DatasetSpec ok = small_spec();
    CHECK_NOTHROW(ok.validate());

    DatasetSpec s = ok;
    s.num_classes = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.num_classes = 70000;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.resolution = 8;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.points = s.burn_in;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.aug_scale_min = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = ok;
    s.aug_rotate_max = s.aug_rotate_min - 1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("dataset spec round-trips through its config form") {
    DatasetSpec spec = small_spec();
    spec.style = RenderStyle::colored;
    spec.background = Background::gradient;
    spec.supersample = 2;
    spec.aug_rotate_min = -45.0;
    spec.aug_rotate_max = 45.0;
    spec.aug_hflip = false;

    const DatasetSpec back = DatasetSpec::from_config(spec.to_config());
    CHECK(back.num_classes == spec.num_classes);
    CHECK(back.systems_per_class == spec.systems_per_class);
    CHECK(back.samples_per_epoch == spec.samples_per_epoch);
    CHECK(back.resolution == spec.resolution);
    CHECK(back.master_seed == spec.master_seed);
    CHECK(back.style == spec.style);
    CHECK(back.background == spec.background);
    CHECK(back.points == spec.points);
    CHECK(back.burn_in == spec.burn_in);
    CHECK(back.supersample == spec.supersample);
    CHECK(back.aug_rotate_min == spec.aug_rotate_min);
    CHECK(back.aug_rotate_max == spec.aug_rotate_max);
    CHECK(back.aug_scale_min == spec.aug_scale_min);
    CHECK(back.aug_scale_max == spec.aug_scale_max);
    CHECK(back.aug_hflip == spec.aug_hflip);

    // An empty config yields the defaults.
    const DatasetSpec defaults = DatasetSpec::from_config(KvConfig{});
    CHECK(defaults.num_classes == 1000);
    CHECK(defaults.systems_per_class == 100);
    CHECK(defaults.resolution == 256);
}

TEST_CASE("spec hash pins every recipe field") {
    const DatasetSpec spec = small_spec();
    CHECK(spec.spec_hash() == spec.spec_hash());

    DatasetSpec other = spec;
    other.master_seed += 1;
    CHECK(spec.spec_hash() != other.spec_hash());
    other = spec;
    other.points += 1;
    CHECK(spec.spec_hash() != other.spec_hash());
    other = spec;
    other.style = RenderStyle::binary;
    CHECK(spec.spec_hash() != other.spec_hash());
    other = spec;
    other.aug_hflip = false;
    CHECK(spec.spec_hash() != other.spec_hash());
}

TEST_CASE("member system seeds are distinct across the class grid") {
    const DatasetSpec spec = small_spec();
    std::set<std::uint64_t> seeds;
    for (std::uint32_t c = 0; c < 50; ++c)
        for (std::uint32_t m = 0; m < 20; ++m) seeds.insert(member_system_seed(spec, c, m));
    CHECK(seeds.size() == 50 * 20);

    DatasetSpec reseeded = spec;
    reseeded.master_seed += 1;
    CHECK(member_system_seed(spec, 0, 0) != member_system_seed(reseeded, 0, 0));
}

TEST_CASE("enumerate_codes visits the whole grid in class-major order") {
    const DatasetSpec spec = small_spec();
    std::vector<std::uint64_t> seeds;
    const std::uint64_t total =
        enumerate_codes(spec, 2, [&](const IfsSystem& sys) { seeds.push_back(sys.seed); });
    REQUIRE(total == 12);
    REQUIRE(seeds.size() == 12);
    std::size_t i = 0;
    for (std::uint32_t c = 0; c < spec.num_classes; ++c)
        for (std::uint32_t m = 0; m < spec.systems_per_class; ++m)
            CHECK(seeds[i++] == member_system_seed(spec, c, m));

    CHECK(enumerate_codes(spec, 2) == 12);
}

TEST_CASE("epoch labels are deterministic and roughly uniform") {
    const DatasetSpec spec = small_spec();
    const EpochStream stream(spec, 0);
    CHECK(stream.size() == 1000);

    std::vector<int> counts(spec.num_classes, 0);
    for (std::uint64_t i = 0; i < stream.size(); ++i) {
        const std::uint32_t c = stream.label_at(i);
        REQUIRE(c < spec.num_classes);
        ++counts[c];
        REQUIRE(stream.label_at(i) == c);
    }
    // Expected 250 per class; binomial sigma ~ 13.7, allow 4 sigma.
    for (const int c : counts) CHECK(std::abs(c - 250) < 55);

    CHECK_THROWS_AS(stream.label_at(1000), std::out_of_range);
}

TEST_CASE("epoch samples are pure functions of spec, epoch and index") {
    const DatasetSpec spec = small_spec();
    const EpochStream e0(spec, 0);
    const EpochStream e0_again(spec, 0);
    const EpochStream e1(spec, 1);

    const Sample a = e0.at(17);
    const Sample b = e0_again.at(17);
    CHECK(a.class_id == b.class_id);
    CHECK(a.system_seed == b.system_seed);
    CHECK(a.render_seed == b.render_seed);
    REQUIRE(a.image.pixels == b.image.pixels);

    CHECK(a.class_id == e0.label_at(17));
    CHECK(a.image.width == 32);
    CHECK(a.image.height == 32);
    CHECK(a.image.channels == 3);

    // Some member of the labelled class produced the system seed.
    bool member_found = false;
    for (std::uint32_t m = 0; m < spec.systems_per_class; ++m)
        member_found = member_found || member_system_seed(spec, a.class_id, m) == a.system_seed;
    CHECK(member_found);

    const Sample c = e1.at(17);
    CHECK(a.render_seed != c.render_seed);
    CHECK(a.image.pixels != c.image.pixels);
}

TEST_CASE("epoch stream honors a resolution override") {
    const DatasetSpec spec = small_spec();
    const EpochStream hi(spec, 0, 64);
    const Sample s = hi.at(3);
    CHECK(s.image.width == 64);
    CHECK(s.image.height == 64);
    // The pipeline upstream of rasterization is unchanged.
    CHECK(s.class_id == EpochStream(spec, 0).at(3).class_id);
    CHECK(s.render_seed == EpochStream(spec, 0).at(3).render_seed);
}

TEST_CASE("epoch ranges are identical at any worker count") {
    const DatasetSpec spec = small_spec();
    const EpochStream stream(spec, 2);
    const auto serial = stream.range(40, 12, 1);
    const auto threaded = stream.range(40, 12, 4);
    REQUIRE(serial.size() == 12);
    REQUIRE(threaded.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(serial[i].class_id == threaded[i].class_id);
        REQUIRE(serial[i].image.pixels == threaded[i].image.pixels);
        const Sample single = stream.at(40 + i);
        REQUIRE(single.image.pixels == serial[i].image.pixels);
    }

    CHECK_THROWS_AS(stream.range(995, 10, 1), std::out_of_range);
    CHECK_THROWS_AS(stream.range(~0ULL - 5, 10, 1), std::out_of_range);
}

TEST_CASE("manifest files round-trip and reject corrupt rows") {
    const fs::path dir = fresh_dir("frax_manifest_test");
    Manifest m;
    m.rows.push_back({"class_0000/img_00000.png", 0, 111, 222, std::string(64, 'a')});
    m.rows.push_back({"class_0001/img_00001.png", 1, 333, 444, std::string(64, 'b')});
    const fs::path path = dir / "manifest.csv";
    m.write(path);

    const Manifest back = Manifest::read(path);
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[0].path == m.rows[0].path);
    CHECK(back.rows[0].class_id == 0);
    CHECK(back.rows[1].system_seed == 333);
    CHECK(back.rows[1].sha256_hex == std::string(64, 'b'));

    std::ofstream(path, std::ios::app) << "only,two,fields\n";
    try {
        Manifest::read(path);
        FAIL("expected error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find(":4:") != std::string::npos);
    }

    std::ofstream(path) << "wrong,header\n";
    CHECK_THROWS_AS(Manifest::read(path), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("export writes a complete, verifiable, resumable tree") {
    DatasetSpec spec = small_spec();
    spec.num_classes = 2;
    spec.systems_per_class = 2;
    const fs::path dir = fresh_dir("frax_export_test");

    const Manifest m = export_dataset(spec, dir, 3, 2);
    REQUIRE(m.rows.size() == 6);
    CHECK(fs::exists(dir / "manifest.csv"));
    CHECK(fs::exists(dir / "dataset.conf"));
    CHECK(fs::exists(dir / "ifs_codes.txt"));

    for (const auto& row : m.rows) {
        const fs::path file = dir / row.path;
        REQUIRE(fs::exists(file));
        CHECK(Sha256::hex(Sha256::hash_file(file.string())) == row.sha256_hex);
    }
    CHECK(m.rows[0].path == "class_0000/img_00000.png");
    CHECK(m.rows[3].path == "class_0001/img_00000.png");
    CHECK(m.rows[3].class_id == 1);

    // The sidecar config reproduces the spec.
    const DatasetSpec conf = DatasetSpec::from_config(KvConfig::parse_file(dir / "dataset.conf"));
    CHECK(conf.spec_hash() == spec.spec_hash());

    // The code list parses, validates and matches the member seeds.
    const std::vector<IfsSystem> codes = read_ifs_file(dir / "ifs_codes.txt");
    REQUIRE(codes.size() == 4);
    std::size_t k = 0;
    for (std::uint32_t c = 0; c < 2; ++c)
        for (std::uint32_t mm = 0; mm < 2; ++mm) {
            CHECK(codes[k].seed == member_system_seed(spec, c, mm));
            CHECK_NOTHROW(validate_system(codes[k]));
            ++k;
        }

    // Re-export reuses every file untouched.
    const auto mtime = fs::last_write_time(dir / m.rows[2].path);
    const Manifest again = export_dataset(spec, dir, 3, 2);
    REQUIRE(again.rows.size() == 6);
    CHECK(fs::last_write_time(dir / m.rows[2].path) == mtime);
    for (std::size_t i = 0; i < 6; ++i) CHECK(again.rows[i].sha256_hex == m.rows[i].sha256_hex);

    // Deleting one file and corrupting another forces just those two back
    // through the renderer, reproducing identical bytes.
    fs::remove(dir / m.rows[1].path);
    std::ofstream(dir / m.rows[4].path, std::ios::binary) << "corrupt";
    const Manifest fixed = export_dataset(spec, dir, 3, 2);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(fixed.rows[i].sha256_hex == m.rows[i].sha256_hex);
        CHECK(Sha256::hex(Sha256::hash_file((dir / fixed.rows[i].path).string())) ==
              fixed.rows[i].sha256_hex);
    }
    fs::remove_all(dir);
}

TEST_CASE("export refuses an unusable output directory") {
    const fs::path dir = fresh_dir("frax_export_bad");
    std::ofstream(dir / "blocker") << "file";
    DatasetSpec spec = small_spec();
    spec.num_classes = 1;
    CHECK_THROWS_AS(export_dataset(spec, dir / "blocker" / "nested", 1, 1), std::runtime_error);
    CHECK_THROWS_AS(export_dataset(spec, dir, 0, 1), std::invalid_argument);
    fs::remove_all(dir);
}
