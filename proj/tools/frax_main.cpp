#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "frax/config.hpp"
#include "frax/dataset.hpp"
#include "frax/harness.hpp"
#include "frax/metrics.hpp"
#include "frax/stream.hpp"
#include "frax/toy.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

frax::DatasetSpec load_spec(const std::string& path) {
    if (path.empty()) return frax::DatasetSpec{};
    return frax::DatasetSpec::from_config(frax::KvConfig::parse_file(path));
}

std::pair<std::string, std::uint16_t> parse_bind(const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos)
        throw std::runtime_error("--bind expects host:port, got '" + bind + "'");
    const std::string host = bind.substr(0, colon);
    const std::uint64_t port = frax::parse_u64(bind.substr(colon + 1), "--bind port");
    if (port > 65535) throw std::runtime_error("--bind port out of range");
    return {host.empty() ? "127.0.0.1" : host, static_cast<std::uint16_t>(port)};
}

int cmd_generate(const std::string& spec_path, const std::string& out_dir,
                 std::uint32_t images_per_class, unsigned workers) {
    const frax::DatasetSpec spec = load_spec(spec_path);
    const frax::Manifest manifest =
        frax::export_dataset(spec, out_dir, images_per_class, workers);
    std::printf("wrote %zu images under %s\n", manifest.rows.size(), out_dir.c_str());
    return 0;
}

int cmd_serve(const std::string& bind, const std::string& spec_path, unsigned workers,
              unsigned max_inflight) {
    const auto [host, port] = parse_bind(bind);
    frax::StreamServiceConfig cfg;
    cfg.bind_address = host;
    cfg.port = port;
    cfg.workers = workers;
    cfg.max_inflight = max_inflight;
    frax::StreamService service(load_spec(spec_path), cfg);
    service.start();
    std::printf("serving on %s:%u (spec hash %s)\n", host.c_str(), service.port(),
                frax::Sha256::hex(load_spec(spec_path).spec_hash()).c_str());
    std::fflush(stdout);
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    service.stop();
    return 0;
}

int cmd_eval(const std::string& root, frax::EvalConfig config, const std::string& csv_out,
             const std::string& md_out) {
    const frax::DatasetLayout layout = frax::load_dataset(root);
    const frax::EvalReport report = frax::run_eval(layout, config);
    if (!csv_out.empty()) frax::emit_report_csv(report, csv_out);
    if (!md_out.empty()) frax::emit_report_markdown(report, md_out);
    std::cout << frax::report_csv_text(report);
    for (const auto& row : report.rows) {
        if (!row.ok)
            std::cerr << "class " << row.name << " failed: " << row.error << "\n";
    }
    return 0;
}

int cmd_metrics(const std::string& scores_path, const std::string& maps_dir,
                const std::string& masks_dir, double fpr_limit, const std::string& roc_out,
                const std::string& pro_out) {
    if (!scores_path.empty()) {
        std::ifstream in(scores_path);
        if (!in) throw std::runtime_error("cannot open " + scores_path);
        std::string line;
        if (!std::getline(in, line) || line != "score,label")
            throw std::runtime_error(scores_path + ": expected header 'score,label'");
        std::vector<double> scores;
        std::vector<int> labels;
        int lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos)
                throw std::runtime_error(scores_path + ":" + std::to_string(lineno) +
                                         ": expected score,label");
            scores.push_back(frax::parse_double(line.substr(0, comma), "score"));
            labels.push_back(static_cast<int>(frax::parse_u64(line.substr(comma + 1), "label")));
        }
        const frax::RocCurve curve = frax::roc_curve(scores, labels);
        std::printf("image_auroc=%s\n", frax::format_double(frax::auroc(scores, labels)).c_str());
        if (!roc_out.empty()) frax::write_roc_csv(roc_out, curve);
    }
    if (!maps_dir.empty()) {
        if (masks_dir.empty()) throw std::runtime_error("--masks-dir required with --maps-dir");
        std::vector<std::filesystem::path> map_files;
        for (const auto& entry : std::filesystem::directory_iterator(maps_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".ftns")
                map_files.push_back(entry.path());
        std::sort(map_files.begin(), map_files.end());
        if (map_files.empty()) throw std::runtime_error("no .ftns files in " + maps_dir);

        std::vector<frax::AnomalyMap> maps;
        std::vector<frax::Image8> masks;
        for (const auto& mf : map_files) {
            const auto tensors = frax::read_feature_file(mf);
            if (tensors.size() != 1 || tensors[0].dim != 1)
                throw std::runtime_error(mf.string() +
                                         ": expected a single-level, single-channel score map");
            frax::AnomalyMap m;
            m.width = tensors[0].grid_w;
            m.height = tensors[0].grid_h;
            m.scores.assign(tensors[0].data.begin(), tensors[0].data.end());
            for (double v : m.scores) m.image_score = std::max(m.image_score, v);
            maps.push_back(std::move(m));

            const std::string stem = mf.stem().string();
            std::filesystem::path mask = std::filesystem::path(masks_dir) / (stem + ".png");
            if (!std::filesystem::exists(mask))
                mask = std::filesystem::path(masks_dir) / (stem + "_mask.png");
            if (!std::filesystem::exists(mask))
                throw std::runtime_error("no mask for " + mf.string() + " in " + masks_dir);
            masks.push_back(frax::read_image(mask));
        }
        std::printf("pixel_auroc=%s\n",
                    frax::format_double(frax::pixel_auroc(maps, masks)).c_str());
        const frax::ProCurve curve = frax::aupro(maps, masks, fpr_limit);
        std::printf("aupro=%s\n", frax::format_double(curve.aupro).c_str());
        if (!pro_out.empty()) frax::write_pro_csv(pro_out, curve);
    }
    if (scores_path.empty() && maps_dir.empty())
        throw std::runtime_error("metrics: pass --scores and/or --maps-dir");
    return 0;
}

void dump_default_config() {
    frax::KvConfig merged = frax::DatasetSpec{}.to_config();
    merged.merge(frax::EvalConfig{}.to_config());
    std::cout << merged.to_text();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fractal pre-training data factory and anomaly-detection harness"};
    app.require_subcommand(0, 1);
    bool dump_config = false;
    app.add_flag("--dump-config", dump_config, "print every config default and exit");

    auto* generate = app.add_subcommand("generate", "render a dataset folder from a spec");
    std::string gen_spec, gen_out = "dataset";
    std::uint32_t gen_images = 10;
    unsigned gen_workers = 1;
    generate->add_option("--spec", gen_spec, "dataset spec config (key=value)");
    generate->add_option("--out", gen_out, "output directory");
    generate->add_option("--images-per-class", gen_images, "images rendered per class");
    generate->add_option("--workers", gen_workers, "render threads");

    auto* serve = app.add_subcommand("serve", "stream samples over TCP");
    std::string srv_bind = "127.0.0.1:7421", srv_spec;
    unsigned srv_workers = 1, srv_inflight = 4;
    serve->add_option("--bind", srv_bind, "host:port to listen on");
    serve->add_option("--spec", srv_spec, "dataset spec config (key=value)");
    serve->add_option("--workers", srv_workers, "render threads");
    serve->add_option("--max-inflight", srv_inflight, "frames buffered per connection");

    auto* eval = app.add_subcommand("eval", "fit on train/good and score the test split");
    std::string ev_root, ev_config, ev_method, ev_levels, ev_imported, ev_csv, ev_md;
    int ev_size = -1, ev_neighbor_k = -1, ev_max_channels = -1;
    double ev_epsilon = -1.0, ev_ratio = -1.0, ev_fpr = -1.0, ev_blur = -1.0;
    std::uint64_t ev_seed = 0;
    bool ev_seed_set = false;
    unsigned ev_workers = 1;
    eval->add_option("--root", ev_root, "dataset root directory")->required();
    eval->add_option("--config", ev_config, "eval config file; flags override it");
    eval->add_option("--method", ev_method, "gaussian or coreset");
    eval->add_option("--levels", ev_levels, "feature levels, e.g. 1,2");
    eval->add_option("--image-size", ev_size, "square evaluation resolution");
    eval->add_option("--seed", ev_seed, "extractor seed")->each([&](const std::string&) {
        ev_seed_set = true;
    });
    eval->add_option("--imported", ev_imported, "directory of .ftns files mirroring the dataset");
    eval->add_option("--epsilon", ev_epsilon, "covariance ridge");
    eval->add_option("--sigma-blur", ev_blur, "anomaly map smoothing");
    eval->add_option("--coreset-ratio", ev_ratio, "fraction of patches kept");
    eval->add_option("--neighbor-k", ev_neighbor_k, "nearest neighbours averaged");
    eval->add_option("--fpr-limit", ev_fpr, "overlap-curve integration limit");
    eval->add_option("--max-channels", ev_max_channels, "random channel subset size, 0 = all");
    eval->add_option("--workers", ev_workers, "threads");
    eval->add_option("--csv", ev_csv, "write the report as CSV");
    eval->add_option("--markdown", ev_md, "write the report as markdown");

    auto* metrics = app.add_subcommand("metrics", "compute metrics from score files");
    std::string mt_scores, mt_maps, mt_masks, mt_roc, mt_pro;
    double mt_fpr = 0.3;
    metrics->add_option("--scores", mt_scores, "CSV of score,label rows");
    metrics->add_option("--maps-dir", mt_maps, "directory of .ftns score maps");
    metrics->add_option("--masks-dir", mt_masks, "directory of ground-truth masks");
    metrics->add_option("--fpr-limit", mt_fpr, "overlap-curve integration limit");
    metrics->add_option("--roc-out", mt_roc, "write the ROC curve as CSV");
    metrics->add_option("--pro-out", mt_pro, "write the overlap curve as CSV");

    auto* toy = app.add_subcommand("toy", "generate the procedural toy benchmark");
    std::string toy_out = "toy-dataset";
    int toy_size = 128;
    std::uint64_t toy_seed = 7;
    toy->add_option("--out", toy_out, "output directory");
    toy->add_option("--size", toy_size, "image side (64, 128 or 256)");
    toy->add_option("--seed", toy_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (dump_config) {
            dump_default_config();
            return 0;
        }
        if (app.got_subcommand(generate))
            return cmd_generate(gen_spec, gen_out, gen_images, gen_workers);
        if (app.got_subcommand(serve))
            return cmd_serve(srv_bind, srv_spec, srv_workers, srv_inflight);
        if (app.got_subcommand(eval)) {
            frax::EvalConfig config = ev_config.empty()
                                          ? frax::EvalConfig{}
                                          : frax::EvalConfig::from_config(
                                                frax::KvConfig::parse_file(ev_config));
            if (!ev_method.empty()) config.method = frax::parse_method(ev_method);
            if (!ev_levels.empty()) config.selection = frax::LevelSelection::parse(ev_levels);
            if (ev_size > 0) config.image_size = ev_size;
            if (ev_seed_set) config.extractor_seed = ev_seed;
            if (!ev_imported.empty()) {
                config.builtin_extractor = false;
                config.imported_dir = ev_imported;
            }
            if (ev_epsilon >= 0.0) config.epsilon = ev_epsilon;
            if (ev_blur >= 0.0) config.sigma_blur = ev_blur;
            if (ev_ratio > 0.0) config.coreset_ratio = ev_ratio;
            if (ev_neighbor_k > 0) config.neighbor_k = ev_neighbor_k;
            if (ev_fpr > 0.0) config.fpr_limit = ev_fpr;
            if (ev_max_channels >= 0) config.max_channels = ev_max_channels;
            config.workers = ev_workers;
            return cmd_eval(ev_root, std::move(config), ev_csv, ev_md);
        }
        if (app.got_subcommand(metrics))
            return cmd_metrics(mt_scores, mt_maps, mt_masks, mt_fpr, mt_roc, mt_pro);
        if (app.got_subcommand(toy)) {
            frax::ToyConfig cfg;
            cfg.image_size = toy_size;
            cfg.seed = toy_seed;
            frax::generate_toy_dataset(cfg, toy_out);
            std::printf("toy benchmark written to %s\n", toy_out.c_str());
            return 0;
        }
        std::cout << app.help();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
