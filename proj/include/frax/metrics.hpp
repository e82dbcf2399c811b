#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "frax/anomaly_map.hpp"
#include "frax/image.hpp"

namespace frax {

struct RocCurve {
    std::vector<double> thresholds;  // descending
    std::vector<double> fpr, tpr;
    double auc = 0.0;
};

struct ProCurve {
    std::vector<double> fpr, pro;
    double aupro = 0.0;
    double fpr_limit = 0.3;
};

// Image-level AUROC by the rank statistic: ties count half. Labels are 0/1
// and both classes must be present.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Threshold sweep over the distinct score values, endpoints included. The
// trapezoidal area equals auroc() exactly.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

// Pools every pixel of every map against the binarized masks (any nonzero
// mask value is anomalous) and computes AUROC over the pool.
double pixel_auroc(const std::vector<AnomalyMap>& maps, const std::vector<Image8>& masks);

struct ComponentLabels {
    int width = 0, height = 0;
    int num_regions = 0;
    std::vector<std::int32_t> labels;  // 0 background, regions numbered from 1
};

// 8-connected components of the nonzero pixels, numbered in raster-scan
// first-encounter order.
ComponentLabels connected_components(const Image8& mask);

// Per-region overlap curve: at each threshold the mean over all ground-truth
// regions of the fraction of the region exceeding it, against the pooled
// false-positive rate. The area under the curve is taken up to fpr_limit and
// normalized by it.
ProCurve aupro(const std::vector<AnomalyMap>& maps, const std::vector<Image8>& masks,
               double fpr_limit = 0.3);

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve);
void write_pro_csv(const std::filesystem::path& path, const ProCurve& curve);

// Fixed-order pairwise summation; deterministic for any input order given.
double pairwise_sum(std::span<const double> values);

}  // namespace frax
