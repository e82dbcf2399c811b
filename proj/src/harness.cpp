#include "frax/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "frax/image.hpp"
#include "frax/metrics.hpp"
#include "frax/rng.hpp"
#include "frax/sha256.hpp"
#include "frax/worker_pool.hpp"

namespace frax {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".png" || ext == ".PNG" || ext == ".bmp" || ext == ".BMP";
}

std::vector<fs::path> list_images(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::string rel_to(const fs::path& root, const fs::path& p) {
    return fs::relative(p, root).generic_string();
}

const std::map<std::string, std::string>& known_categories() {
    static const std::map<std::string, std::string> table = {
        {"carpet", "textures"},     {"grid", "textures"},
        {"leather", "textures"},    {"tile", "textures"},
        {"wood", "textures"},       {"bottle", "objects"},
        {"cable", "objects"},       {"capsule", "objects"},
        {"hazelnut", "objects"},    {"metal_nut", "objects"},
        {"pill", "objects"},        {"screw", "objects"},
        {"toothbrush", "objects"},  {"transistor", "objects"},
        {"zipper", "objects"},      {"pcb1", "pcb"},
        {"pcb2", "pcb"},            {"pcb3", "pcb"},
        {"pcb4", "pcb"},            {"macaroni1", "multi-instance"},
        {"macaroni2", "multi-instance"}, {"capsules", "multi-instance"},
        {"candle", "multi-instance"},    {"cashew", "single-instance"},
        {"chewinggum", "single-instance"}, {"fryum", "single-instance"},
        {"pipe_fryum", "single-instance"},
    };
    return table;
}

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

Image8 binarize_mask(const Image8& mask) {
    Image8 out(mask.width, mask.height, 1);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            bool set = false;
            for (int c = 0; c < mask.channels; ++c) set = set || mask.at(x, y, c) != 0;
            out.at(x, y, 0) = set ? 255 : 0;
        }
    }
    return out;
}

}  // namespace

DatasetLayout load_dataset(const fs::path& root) {
    std::vector<std::string> problems;
    if (!fs::exists(root)) {
        throw std::runtime_error("dataset validation failed:\n - root " + root.string() +
                                 " does not exist");
    }
    if (!fs::is_directory(root)) {
        throw std::runtime_error("dataset validation failed:\n - root " + root.string() +
                                 " is not a directory");
    }

    DatasetLayout layout;
    layout.root = root;

    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && entry.path().filename().string()[0] != '.')
            class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) problems.push_back("root contains no class directories");

    for (const auto& cdir : class_dirs) {
        LayoutClass cls;
        cls.name = cdir.filename().string();

        const fs::path train_dir = cdir / "train" / "good";
        if (!fs::is_directory(train_dir)) {
            problems.push_back(cls.name + ": missing " + rel_to(root, train_dir));
        } else {
            for (const auto& p : list_images(train_dir))
                cls.train.push_back({p, rel_to(root, p), {}});
            if (cls.train.empty())
                problems.push_back(cls.name + ": no training images in " +
                                   rel_to(root, train_dir));
        }

        const fs::path test_dir = cdir / "test";
        if (!fs::is_directory(test_dir)) {
            problems.push_back(cls.name + ": missing " + rel_to(root, test_dir));
        } else {
            std::vector<fs::path> group_dirs;
            for (const auto& entry : fs::directory_iterator(test_dir))
                if (entry.is_directory()) group_dirs.push_back(entry.path());
            std::sort(group_dirs.begin(), group_dirs.end());
            if (group_dirs.empty())
                problems.push_back(cls.name + ": no test groups in " + rel_to(root, test_dir));

            for (const auto& gdir : group_dirs) {
                TestGroup group;
                group.defect_type = gdir.filename().string();
                const bool anomalous = group.defect_type != "good";
                for (const auto& p : list_images(gdir)) {
                    TestImage ti{p, rel_to(root, p), {}};
                    if (anomalous) {
                        const std::string stem = p.stem().string();
                        const fs::path gt_dir = cdir / "ground_truth" / group.defect_type;
                        const fs::path with_suffix = gt_dir / (stem + "_mask.png");
                        const fs::path plain = gt_dir / (stem + ".png");
                        if (fs::exists(with_suffix))
                            ti.mask_path = with_suffix;
                        else if (fs::exists(plain))
                            ti.mask_path = plain;
                        else
                            problems.push_back(cls.name + ": missing mask " +
                                               rel_to(root, with_suffix) + " for test image " +
                                               ti.rel);
                    }
                    group.images.push_back(std::move(ti));
                }
                if (group.images.empty())
                    problems.push_back(cls.name + ": empty test group " + rel_to(root, gdir));
                cls.test_groups.push_back(std::move(group));
            }
        }
        layout.classes.push_back(std::move(cls));
    }

    if (!problems.empty()) {
        std::string msg = "dataset validation failed:";
        for (const auto& p : problems) msg += "\n - " + p;
        throw std::runtime_error(msg);
    }
    return layout;
}

std::string default_category(const std::string& class_name) {
    const auto& table = known_categories();
    auto it = table.find(class_name);
    return it == table.end() ? "other" : it->second;
}

std::string to_string(AdMethod method) {
    return method == AdMethod::gaussian ? "gaussian" : "coreset";
}

AdMethod parse_method(const std::string& name) {
    if (name == "gaussian") return AdMethod::gaussian;
    if (name == "coreset") return AdMethod::coreset;
    throw std::invalid_argument("unknown method '" + name + "' (expected gaussian or coreset)");
}

void EvalConfig::validate() const {
    selection.validate();
    if (builtin_extractor) {
        if (image_size != 64 && image_size != 128 && image_size != 256)
            throw std::invalid_argument(
                "eval config: image_size must be 64, 128 or 256 for the builtin extractor");
    } else {
        if (imported_dir.empty())
            throw std::invalid_argument("eval config: imported extractor needs imported_dir");
        if (image_size < 16)
            throw std::invalid_argument("eval config: image_size must be at least 16");
    }
    if (epsilon < 0.0) throw std::invalid_argument("eval config: negative epsilon");
    if (sigma_blur < 0.0) throw std::invalid_argument("eval config: negative sigma_blur");
    if (!(coreset_ratio > 0.0) || coreset_ratio > 1.0)
        throw std::invalid_argument("eval config: coreset_ratio must be in (0, 1]");
    if (neighbor_k < 1) throw std::invalid_argument("eval config: neighbor_k must be at least 1");
    if (!(fpr_limit > 0.0) || fpr_limit > 1.0)
        throw std::invalid_argument("eval config: fpr_limit must be in (0, 1]");
    if (max_channels < 0) throw std::invalid_argument("eval config: negative max_channels");
}

KvConfig EvalConfig::to_config() const {
    KvConfig cfg;
    cfg.set("method", to_string(method));
    cfg.set("levels", selection.to_string());
    cfg.set("extractor", builtin_extractor ? "builtin" : "imported");
    cfg.set_u64("extractor_seed", extractor_seed);
    if (!builtin_extractor) cfg.set("imported_dir", imported_dir.string());
    cfg.set_i64("image_size", image_size);
    cfg.set_double("epsilon", epsilon);
    cfg.set_double("sigma_blur", sigma_blur);
    cfg.set_double("coreset_ratio", coreset_ratio);
    cfg.set_i64("neighbor_k", neighbor_k);
    cfg.set_double("fpr_limit", fpr_limit);
    cfg.set_i64("max_channels", max_channels);
    for (const auto& [cls, cat] : categories) cfg.set("category:" + cls, cat);
    return cfg;
}

EvalConfig EvalConfig::from_config(const KvConfig& cfg) {
    EvalConfig ec;
    ec.method = parse_method(cfg.get("method", to_string(ec.method)));
    ec.selection = LevelSelection::parse(cfg.get("levels", ec.selection.to_string()));
    const std::string extractor = cfg.get("extractor", "builtin");
    if (extractor == "builtin")
        ec.builtin_extractor = true;
    else if (extractor == "imported")
        ec.builtin_extractor = false;
    else
        throw std::invalid_argument("eval config: extractor must be builtin or imported");
    ec.extractor_seed = cfg.get_u64("extractor_seed", ec.extractor_seed);
    ec.imported_dir = cfg.get("imported_dir", "");
    ec.image_size = static_cast<int>(cfg.get_i64("image_size", ec.image_size));
    ec.epsilon = cfg.get_double("epsilon", ec.epsilon);
    ec.sigma_blur = cfg.get_double("sigma_blur", ec.sigma_blur);
    ec.coreset_ratio = cfg.get_double("coreset_ratio", ec.coreset_ratio);
    ec.neighbor_k = static_cast<int>(cfg.get_i64("neighbor_k", ec.neighbor_k));
    ec.fpr_limit = cfg.get_double("fpr_limit", ec.fpr_limit);
    ec.max_channels = static_cast<int>(cfg.get_i64("max_channels", ec.max_channels));
    for (const auto& [k, v] : cfg.values()) {
        if (k.rfind("category:", 0) == 0) ec.categories[k.substr(9)] = v;
    }
    ec.validate();
    return ec;
}

std::string EvalConfig::fingerprint(const fs::path& root) const {
    const std::string text = to_config().to_text() + "root=" + root.string() + "\n";
    return Sha256::hex(Sha256::hash(text));
}

FeatureTensor features_for(const EvalConfig& config, const TestImage& image) {
    if (config.builtin_extractor) {
        Image8 img = read_image(image.path);
        img = resize_bilinear(img, config.image_size, config.image_size);
        return fuse(extract_builtin(img, config.selection, config.extractor_seed));
    }
    fs::path feat = config.imported_dir / image.rel;
    feat.replace_extension(".ftns");
    if (!fs::exists(feat))
        throw std::runtime_error("missing feature file " + feat.string() + " for image " +
                                 image.rel);
    const std::vector<FeatureTensor> all = read_feature_file(feat);
    std::vector<FeatureTensor> picked;
    for (int level : config.selection.levels) {
        const auto it = std::find_if(all.begin(), all.end(),
                                     [&](const FeatureTensor& t) { return t.level == level; });
        if (it == all.end())
            throw std::runtime_error("feature file " + feat.string() + " lacks level " +
                                     std::to_string(level));
        picked.push_back(*it);
    }
    return fuse(picked);
}

namespace {

std::vector<int> channel_subset_for(const EvalConfig& config, int dim) {
    if (config.max_channels <= 0 || dim <= config.max_channels) return {};
    std::vector<int> idx(dim);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(config.extractor_seed, SEED_CHANNEL_SUBSET, dim));
    for (int i = 0; i < config.max_channels; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(dim - i)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(config.max_channels);
    std::sort(idx.begin(), idx.end());
    return idx;
}

FeatureTensor apply_subset(const FeatureTensor& t, const std::vector<int>& subset) {
    if (subset.empty()) return t;
    FeatureTensor out;
    out.level = t.level;
    out.grid_h = t.grid_h;
    out.grid_w = t.grid_w;
    out.dim = static_cast<int>(subset.size());
    out.source = t.source;
    out.data.resize(t.cells() * subset.size());
    for (std::size_t cell = 0; cell < t.cells(); ++cell) {
        const float* src = &t.data[cell * t.dim];
        float* dst = &out.data[cell * subset.size()];
        for (std::size_t c = 0; c < subset.size(); ++c) dst[c] = src[subset[c]];
    }
    return out;
}

}  // namespace

ClassModel fit_class(const LayoutClass& cls, const EvalConfig& config) {
    config.validate();
    if (cls.train.size() < 2)
        throw std::runtime_error(cls.name + ": need at least 2 training images, found " +
                                 std::to_string(cls.train.size()));

    std::vector<FeatureTensor> train(cls.train.size());
    parallel_for(cls.train.size(), config.workers, [&](std::size_t i) {
        train[i] = features_for(config, cls.train[i]);
    });

    ClassModel model;
    model.method = config.method;
    model.channel_subset = channel_subset_for(config, train.front().dim);
    if (!model.channel_subset.empty()) {
        for (auto& t : train) t = apply_subset(t, model.channel_subset);
    }
    model.grid_h = train.front().grid_h;
    model.grid_w = train.front().grid_w;
    model.dim = train.front().dim;

    if (config.method == AdMethod::gaussian) {
        model.gaussian = GaussianBank::fit(train, config.epsilon, config.workers);
    } else {
        model.coreset = CoresetBank::fit(train, config.coreset_ratio, config.neighbor_k);
    }
    return model;
}

AnomalyMap score_image(const ClassModel& model, const TestImage& image,
                       const EvalConfig& config) {
    FeatureTensor t = features_for(config, image);
    t = apply_subset(t, model.channel_subset);
    ScoreConfig sc;
    sc.image_size = config.image_size;
    sc.sigma_blur = config.sigma_blur;
    if (model.method == AdMethod::gaussian) return model.gaussian->score(t, sc);
    return model.coreset->score(t, sc);
}

EvalReport run_eval(const DatasetLayout& layout, const EvalConfig& config) {
    config.validate();
    EvalReport report;
    report.fingerprint = config.fingerprint(layout.root);

    for (const LayoutClass& cls : layout.classes) {
        ClassResult row;
        row.name = cls.name;
        auto cat_it = config.categories.find(cls.name);
        row.category = cat_it != config.categories.end() ? cat_it->second
                                                         : default_category(cls.name);
        try {
            const ClassModel model = fit_class(cls, config);

            std::vector<const TestImage*> images;
            std::vector<int> labels;
            for (const TestGroup& group : cls.test_groups) {
                const int label = group.defect_type == "good" ? 0 : 1;
                for (const TestImage& ti : group.images) {
                    images.push_back(&ti);
                    labels.push_back(label);
                }
            }

            std::vector<AnomalyMap> maps(images.size());
            parallel_for(images.size(), config.workers, [&](std::size_t i) {
                maps[i] = score_image(model, *images[i], config);
            });

            std::vector<Image8> masks(images.size());
            for (std::size_t i = 0; i < images.size(); ++i) {
                if (labels[i] == 0) {
                    masks[i] = Image8(config.image_size, config.image_size, 1);
                } else {
                    const Image8 m = read_image(images[i]->mask_path);
                    masks[i] = binarize_mask(
                        resize_nearest(m, config.image_size, config.image_size));
                }
            }

            std::vector<double> image_scores(images.size());
            for (std::size_t i = 0; i < images.size(); ++i) image_scores[i] = maps[i].image_score;

            row.image_auroc = auroc(image_scores, labels);
            row.pixel_auroc = pixel_auroc(maps, masks);
            row.aupro = aupro(maps, masks, config.fpr_limit).aupro;
            row.ok = true;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        report.rows.push_back(std::move(row));
    }

    // Category averages over the classes that evaluated, then the overall row.
    std::map<std::string, AggregateRow> cats;
    AggregateRow overall;
    overall.name = "Model AVG";
    for (const ClassResult& row : report.rows) {
        if (!row.ok) continue;
        AggregateRow& c = cats[row.category];
        c.name = row.category + " AVG";
        c.image_auroc += row.image_auroc;
        c.pixel_auroc += row.pixel_auroc;
        c.aupro += row.aupro;
        c.classes += 1;
        overall.image_auroc += row.image_auroc;
        overall.pixel_auroc += row.pixel_auroc;
        overall.aupro += row.aupro;
        overall.classes += 1;
    }
    for (auto& [_, c] : cats) {
        c.image_auroc /= c.classes;
        c.pixel_auroc /= c.classes;
        c.aupro /= c.classes;
        report.aggregates.push_back(c);
    }
    if (overall.classes > 0) {
        overall.image_auroc /= overall.classes;
        overall.pixel_auroc /= overall.classes;
        overall.aupro /= overall.classes;
    }
    report.aggregates.push_back(overall);
    return report;
}

std::string report_csv_text(const EvalReport& report) {
    std::string out = "name,category,image_auroc,pixel_auroc,aupro,error\n";
    for (const ClassResult& row : report.rows) {
        out += row.name + ',' + row.category + ',';
        if (row.ok) {
            out += format_metric(row.image_auroc) + ',' + format_metric(row.pixel_auroc) + ',' +
                   format_metric(row.aupro) + ',';
        } else {
            std::string err = row.error;
            std::replace(err.begin(), err.end(), ',', ';');
            std::replace(err.begin(), err.end(), '\n', ' ');
            out += ",,," + err;
        }
        out += '\n';
    }
    for (const AggregateRow& agg : report.aggregates) {
        out += agg.name + ",," + format_metric(agg.image_auroc) + ',' +
               format_metric(agg.pixel_auroc) + ',' + format_metric(agg.aupro) + ",\n";
    }
    out += "# fingerprint=" + report.fingerprint + "\n";
    return out;
}

std::string report_markdown_text(const EvalReport& report) {
    std::string out = "| name | category | image_auroc | pixel_auroc | aupro | error |\n";
    out += "|---|---|---|---|---|---|\n";
    for (const ClassResult& row : report.rows) {
        out += "| " + row.name + " | " + row.category + " | ";
        if (row.ok) {
            out += format_metric(row.image_auroc) + " | " + format_metric(row.pixel_auroc) +
                   " | " + format_metric(row.aupro) + " |  |\n";
        } else {
            std::string err = row.error;
            std::replace(err.begin(), err.end(), '|', '/');
            std::replace(err.begin(), err.end(), '\n', ' ');
            out += " |  |  | " + err + " |\n";
        }
    }
    for (const AggregateRow& agg : report.aggregates) {
        out += "| " + agg.name + " |  | " + format_metric(agg.image_auroc) + " | " +
               format_metric(agg.pixel_auroc) + " | " + format_metric(agg.aupro) + " |  |\n";
    }
    out += "\nfingerprint: " + report.fingerprint + "\n";
    return out;
}

void emit_report_csv(const EvalReport& report, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report " + path.string());
    out << report_csv_text(report);
    if (!out) throw std::runtime_error("write failed for report " + path.string());
}

void emit_report_markdown(const EvalReport& report, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report " + path.string());
    out << report_markdown_text(report);
    if (!out) throw std::runtime_error("write failed for report " + path.string());
}

}  // namespace frax
