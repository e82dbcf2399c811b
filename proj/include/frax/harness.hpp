#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "frax/anomaly_map.hpp"
#include "frax/config.hpp"
#include "frax/features.hpp"
#include "frax/memory_bank.hpp"

namespace frax {

struct TestImage {
    std::filesystem::path path;       // absolute
    std::string rel;                  // relative to the dataset root
    std::filesystem::path mask_path;  // empty for normal images
};

struct TestGroup {
    std::string defect_type;  // "good" or a defect folder name
    std::vector<TestImage> images;
};

struct LayoutClass {
    std::string name;
    std::vector<TestImage> train;  // train/good images
    std::vector<TestGroup> test_groups;
};

struct DatasetLayout {
    std::filesystem::path root;
    std::vector<LayoutClass> classes;  // sorted by name
    int image_size = 0;                // informational; evaluation resizes anyway
};

// Scans a class/train/test/ground_truth tree. Every problem found is listed
// in the exception message (missing masks name the exact file expected).
DatasetLayout load_dataset(const std::filesystem::path& root);

// Category for each known benchmark class name; unknown names map to "other".
std::string default_category(const std::string& class_name);

enum class AdMethod { gaussian, coreset };

std::string to_string(AdMethod method);
AdMethod parse_method(const std::string& name);

struct EvalConfig {
    AdMethod method = AdMethod::gaussian;
    LevelSelection selection{{1, 2}};
    bool builtin_extractor = true;
    std::uint64_t extractor_seed = 0;
    std::filesystem::path imported_dir;  // required when builtin_extractor is false
    int image_size = 256;
    double epsilon = 0.01;
    double sigma_blur = 4.0;
    double coreset_ratio = 0.1;
    int neighbor_k = 1;
    double fpr_limit = 0.3;
    int max_channels = 0;  // 0 keeps every channel
    std::map<std::string, std::string> categories;  // overrides per class name

    unsigned workers = 1;  // runtime only, not part of the fingerprint

    void validate() const;
    KvConfig to_config() const;
    static EvalConfig from_config(const KvConfig& cfg);

    // SHA-256 hex over the canonical config plus the dataset root.
    std::string fingerprint(const std::filesystem::path& root) const;
};

// Model fitted from the training split only; scoring never feeds back.
struct ClassModel {
    AdMethod method = AdMethod::gaussian;
    std::optional<GaussianBank> gaussian;
    std::optional<CoresetBank> coreset;
    std::vector<int> channel_subset;  // empty keeps every channel
    int grid_h = 0, grid_w = 0, dim = 0;
};

// Loads or computes the fused feature tensor of one image.
FeatureTensor features_for(const EvalConfig& config, const TestImage& image);

ClassModel fit_class(const LayoutClass& cls, const EvalConfig& config);

AnomalyMap score_image(const ClassModel& model, const TestImage& image,
                       const EvalConfig& config);

struct ClassResult {
    std::string name;
    std::string category;
    bool ok = false;
    std::string error;
    double image_auroc = 0.0, pixel_auroc = 0.0, aupro = 0.0;
};

struct AggregateRow {
    std::string name;  // "<category> AVG" or "Model AVG"
    double image_auroc = 0.0, pixel_auroc = 0.0, aupro = 0.0;
    int classes = 0;
};

struct EvalReport {
    std::vector<ClassResult> rows;
    std::vector<AggregateRow> aggregates;  // category rows, then Model AVG
    std::string fingerprint;
};

// Evaluates every class independently; one broken class is reported in its
// row and does not stop the rest.
EvalReport run_eval(const DatasetLayout& layout, const EvalConfig& config);

void emit_report_csv(const EvalReport& report, const std::filesystem::path& path);
void emit_report_markdown(const EvalReport& report, const std::filesystem::path& path);
std::string report_csv_text(const EvalReport& report);
std::string report_markdown_text(const EvalReport& report);

}  // namespace frax
