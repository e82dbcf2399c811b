#include "frax/dataset.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "frax/rng.hpp"
#include "frax/worker_pool.hpp"

namespace frax {

namespace {

std::string class_dir_name(std::uint32_t class_id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "class_%04u", class_id);
    return buf;
}

std::string image_file_name(std::uint32_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%05u.png", index);
    return buf;
}

}  // namespace

void DatasetSpec::validate() const {
    if (num_classes < 1 || num_classes > 65535)
        throw std::invalid_argument("dataset spec: num_classes must be in [1, 65535]");
    if (systems_per_class < 1)
        throw std::invalid_argument("dataset spec: systems_per_class must be at least 1");
    if (samples_per_epoch < 1)
        throw std::invalid_argument("dataset spec: samples_per_epoch must be at least 1");
    if (resolution < 16 || resolution > 4096)
        throw std::invalid_argument("dataset spec: resolution must be in [16, 4096]");
    if (burn_in < 0 || points <= burn_in)
        throw std::invalid_argument("dataset spec: points must exceed burn_in >= 0");
    if (supersample < 1 || supersample > 8)
        throw std::invalid_argument("dataset spec: supersample must be in [1, 8]");
    if (!(aug_scale_min > 0.0) || aug_scale_max < aug_scale_min)
        throw std::invalid_argument("dataset spec: invalid augmentation scale range");
    if (aug_rotate_max < aug_rotate_min)
        throw std::invalid_argument("dataset spec: invalid augmentation rotation range");
}

KvConfig DatasetSpec::to_config() const {
    KvConfig cfg;
    cfg.set_u64("num_classes", num_classes);
    cfg.set_u64("systems_per_class", systems_per_class);
    cfg.set_u64("samples_per_epoch", samples_per_epoch);
    cfg.set_i64("resolution", resolution);
    cfg.set_u64("master_seed", master_seed);
    cfg.set("style", to_string(style));
    cfg.set("background", to_string(background));
    cfg.set_i64("points", points);
    cfg.set_i64("burn_in", burn_in);
    cfg.set_i64("supersample", supersample);
    cfg.set_double("aug_rotate_min", aug_rotate_min);
    cfg.set_double("aug_rotate_max", aug_rotate_max);
    cfg.set_double("aug_scale_min", aug_scale_min);
    cfg.set_double("aug_scale_max", aug_scale_max);
    cfg.set_bool("aug_hflip", aug_hflip);
    return cfg;
}

DatasetSpec DatasetSpec::from_config(const KvConfig& cfg) {
    DatasetSpec spec;
    spec.num_classes = static_cast<std::uint32_t>(cfg.get_u64("num_classes", spec.num_classes));
    spec.systems_per_class =
        static_cast<std::uint32_t>(cfg.get_u64("systems_per_class", spec.systems_per_class));
    spec.samples_per_epoch = cfg.get_u64("samples_per_epoch", spec.samples_per_epoch);
    spec.resolution = static_cast<int>(cfg.get_i64("resolution", spec.resolution));
    spec.master_seed = cfg.get_u64("master_seed", spec.master_seed);
    spec.style = parse_render_style(cfg.get("style", to_string(spec.style)));
    spec.background = parse_background(cfg.get("background", to_string(spec.background)));
    spec.points = cfg.get_i64("points", spec.points);
    spec.burn_in = cfg.get_i64("burn_in", spec.burn_in);
    spec.supersample = static_cast<int>(cfg.get_i64("supersample", spec.supersample));
    spec.aug_rotate_min = cfg.get_double("aug_rotate_min", spec.aug_rotate_min);
    spec.aug_rotate_max = cfg.get_double("aug_rotate_max", spec.aug_rotate_max);
    spec.aug_scale_min = cfg.get_double("aug_scale_min", spec.aug_scale_min);
    spec.aug_scale_max = cfg.get_double("aug_scale_max", spec.aug_scale_max);
    spec.aug_hflip = cfg.get_bool("aug_hflip", spec.aug_hflip);
    spec.validate();
    return spec;
}

Digest DatasetSpec::spec_hash() const { return Sha256::hash(to_config().to_text()); }

std::uint64_t member_system_seed(const DatasetSpec& spec, std::uint32_t class_id,
                                 std::uint32_t member) {
    return derive_seed(spec.master_seed, SEED_CLASS_MEMBER, class_id, member);
}

std::uint64_t enumerate_codes(const DatasetSpec& spec, unsigned workers,
                              const std::function<void(const IfsSystem&)>& sink) {
    spec.validate();
    const std::uint64_t total =
        static_cast<std::uint64_t>(spec.num_classes) * spec.systems_per_class;
    if (sink) {
        // Streaming consumers get systems in (class, member) order.
        for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
            std::vector<IfsSystem> row(spec.systems_per_class);
            parallel_for(spec.systems_per_class, workers, [&](std::size_t m) {
                row[m] = sample_system(
                    member_system_seed(spec, c, static_cast<std::uint32_t>(m)));
            });
            for (const auto& sys : row) sink(sys);
        }
    } else {
        parallel_for(total, workers, [&](std::size_t i) {
            const auto c = static_cast<std::uint32_t>(i / spec.systems_per_class);
            const auto m = static_cast<std::uint32_t>(i % spec.systems_per_class);
            sample_system(member_system_seed(spec, c, m));
        });
    }
    return total;
}

EpochStream::EpochStream(const DatasetSpec& spec, std::uint32_t epoch, int resolution)
    : spec_(spec), epoch_(epoch), resolution_(resolution > 0 ? resolution : spec.resolution) {
    spec_.validate();
}

std::uint32_t EpochStream::label_at(std::uint64_t index) const {
    if (index >= spec_.samples_per_epoch)
        throw std::out_of_range("epoch stream: sample index out of range");
    Rng rng(derive_seed(spec_.master_seed, SEED_EPOCH_CLASS, epoch_, index));
    return static_cast<std::uint32_t>(rng.below(spec_.num_classes));
}

Sample EpochStream::at(std::uint64_t index) const {
    const std::uint32_t class_id = label_at(index);

    Rng rng(derive_seed(spec_.master_seed, SEED_EPOCH_MEMBER, epoch_, index));
    const auto member = static_cast<std::uint32_t>(rng.below(spec_.systems_per_class));
    const std::uint64_t system_seed = member_system_seed(spec_, class_id, member);
    const IfsSystem system = sample_system(system_seed);

    const std::uint64_t render_seed =
        derive_seed(spec_.master_seed, SEED_EPOCH_RENDER, epoch_, index);

    Rng aug(derive_seed(spec_.master_seed, SEED_EPOCH_AUGMENT, epoch_, index));
    RenderConfig rc;
    rc.width = rc.height = resolution_;
    rc.points = spec_.points;
    rc.burn_in = spec_.burn_in;
    rc.style = spec_.style;
    rc.background = spec_.background;
    rc.supersample = spec_.supersample;
    rc.rotate_deg = aug.uniform(spec_.aug_rotate_min, spec_.aug_rotate_max);
    rc.scale = aug.uniform(spec_.aug_scale_min, spec_.aug_scale_max);
    rc.hflip = spec_.aug_hflip && aug.coin();
    if (spec_.style == RenderStyle::colored) rc.hue = aug.uniform();

    Sample s;
    s.image = render(system, rc, render_seed).image;
    s.class_id = class_id;
    s.system_seed = system_seed;
    s.render_seed = render_seed;
    return s;
}

std::vector<Sample> EpochStream::range(std::uint64_t start, std::uint64_t count,
                                       unsigned workers) const {
    if (start + count < start || start + count > spec_.samples_per_epoch)
        throw std::out_of_range("epoch stream: range exceeds samples_per_epoch");
    std::vector<Sample> out(count);
    parallel_for(count, workers, [&](std::size_t i) { out[i] = at(start + i); });
    return out;
}

void Manifest::write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
    out << "path,class_id,system_seed,render_seed,sha256\n";
    for (const auto& r : rows)
        out << r.path << ',' << r.class_id << ',' << r.system_seed << ',' << r.render_seed << ','
            << r.sha256_hex << '\n';
    if (!out) throw std::runtime_error("write failed for manifest " + path.string());
}

Manifest Manifest::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path.string());
    Manifest m;
    std::string line;
    if (!std::getline(in, line) || line != "path,class_id,system_seed,render_seed,sha256")
        throw std::runtime_error(path.string() + ": bad manifest header");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ManifestRow r;
        std::istringstream ss(line);
        std::string field;
        if (!std::getline(ss, r.path, ','))
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad row");
        try {
            if (!std::getline(ss, field, ',')) throw std::runtime_error("missing class_id");
            r.class_id = static_cast<std::uint32_t>(parse_u64(field, "class_id"));
            if (!std::getline(ss, field, ',')) throw std::runtime_error("missing system_seed");
            r.system_seed = parse_u64(field, "system_seed");
            if (!std::getline(ss, field, ',')) throw std::runtime_error("missing render_seed");
            r.render_seed = parse_u64(field, "render_seed");
            if (!std::getline(ss, r.sha256_hex)) throw std::runtime_error("missing sha256");
            if (r.sha256_hex.size() != 64) throw std::runtime_error("bad sha256 field");
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " +
                                     e.what());
        }
        m.rows.push_back(std::move(r));
    }
    return m;
}

Manifest export_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir,
                        std::uint32_t images_per_class, unsigned workers) {
    spec.validate();
    if (images_per_class < 1)
        throw std::invalid_argument("export: images_per_class must be at least 1");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw std::runtime_error("export: cannot create " + out_dir.string() + ": " +
                                 ec.message());

    const std::filesystem::path manifest_path = out_dir / "manifest.csv";
    std::map<std::string, ManifestRow> existing;
    if (std::filesystem::exists(manifest_path)) {
        for (auto& r : Manifest::read(manifest_path).rows) existing[r.path] = std::move(r);
    }

    struct Planned {
        std::string rel;
        std::uint32_t class_id, image_index;
        bool reuse = false;
        ManifestRow row;
    };
    std::vector<Planned> plan;
    plan.reserve(static_cast<std::size_t>(spec.num_classes) * images_per_class);
    for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
        const std::string dir = class_dir_name(c);
        std::filesystem::create_directories(out_dir / dir, ec);
        if (ec)
            throw std::runtime_error("export: cannot create " + (out_dir / dir).string() + ": " +
                                     ec.message());
        for (std::uint32_t k = 0; k < images_per_class; ++k) {
            Planned p;
            p.rel = dir + "/" + image_file_name(k);
            p.class_id = c;
            p.image_index = k;
            auto it = existing.find(p.rel);
            if (it != existing.end() && std::filesystem::exists(out_dir / p.rel) &&
                Sha256::hex(Sha256::hash_file((out_dir / p.rel).string())) ==
                    it->second.sha256_hex) {
                p.reuse = true;
                p.row = it->second;
            }
            plan.push_back(std::move(p));
        }
    }

    parallel_for(plan.size(), workers, [&](std::size_t i) {
        Planned& p = plan[i];
        if (p.reuse) return;
        const std::uint32_t member = p.image_index % spec.systems_per_class;
        const std::uint64_t system_seed = member_system_seed(spec, p.class_id, member);
        const IfsSystem system = sample_system(system_seed);

        Rng rng(derive_seed(spec.master_seed, SEED_EXPORT_RENDER, p.class_id, p.image_index));
        const std::uint64_t render_seed = rng.next();
        RenderConfig rc;
        rc.width = rc.height = spec.resolution;
        rc.points = spec.points;
        rc.burn_in = spec.burn_in;
        rc.style = spec.style;
        rc.background = spec.background;
        rc.supersample = spec.supersample;
        rc.rotate_deg = rng.uniform(spec.aug_rotate_min, spec.aug_rotate_max);
        rc.scale = rng.uniform(spec.aug_scale_min, spec.aug_scale_max);
        rc.hflip = spec.aug_hflip && rng.coin();
        if (spec.style == RenderStyle::colored) rc.hue = rng.uniform();

        const RenderedAttractor ra = render(system, rc, render_seed);
        const std::filesystem::path file = out_dir / p.rel;
        try {
            write_png(file, ra.image);
        } catch (const std::exception& e) {
            throw std::runtime_error("export: failed to write " + file.string() + ": " + e.what());
        }
        p.row = {p.rel, p.class_id, system_seed, render_seed,
                 Sha256::hex(Sha256::hash_file(file.string()))};
    });

    Manifest manifest;
    manifest.rows.reserve(plan.size());
    for (auto& p : plan) manifest.rows.push_back(std::move(p.row));
    manifest.write(manifest_path);

    spec.to_config().write_file(out_dir / "dataset.conf");
    {
        std::ofstream codes(out_dir / "ifs_codes.txt");
        if (!codes) throw std::runtime_error("export: cannot write ifs_codes.txt");
        enumerate_codes(spec, workers,
                        [&](const IfsSystem& sys) { codes << format_ifs_record(sys) << '\n'; });
        if (!codes) throw std::runtime_error("export: write failed for ifs_codes.txt");
    }
    return manifest;
}

}  // namespace frax
