#include "frax/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "frax/config.hpp"

namespace frax {

namespace {

bool mask_set(const Image8& mask, int x, int y) {
    for (int c = 0; c < mask.channels; ++c)
        if (mask.at(x, y, c) != 0) return true;
    return false;
}

void check_scores_labels(std::span<const double> scores, std::span<const int> labels,
                         std::size_t& npos, std::size_t& nneg) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auroc: scores and labels differ in length");
    if (scores.empty()) throw std::invalid_argument("auroc: empty input");
    npos = nneg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw std::invalid_argument("auroc: non-finite score");
        if (labels[i] == 1)
            ++npos;
        else if (labels[i] == 0)
            ++nneg;
        else
            throw std::invalid_argument("auroc: labels must be 0 or 1");
    }
    if (npos == 0) throw std::invalid_argument("auroc: no positive examples");
    if (nneg == 0) throw std::invalid_argument("auroc: no negative examples");
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
    std::size_t npos, nneg;
    check_scores_labels(scores, labels, npos, nneg);

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Rank-sum statistic with midranks for ties, so tied pairs count half.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]] == 1) pos_rank_sum += mid_rank;
        i = j;
    }
    const double np = static_cast<double>(npos), nn = static_cast<double>(nneg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
    std::size_t npos, nneg;
    check_scores_labels(scores, labels, npos, nneg);

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);

    std::size_t tp = 0, fp = 0, i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[idx[k]] == 1)
                ++tp;
            else
                ++fp;
        }
        curve.thresholds.push_back(scores[idx[i]]);
        curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(npos));
        curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(nneg));
        i = j;
    }

    double area = 0.0;
    for (std::size_t k = 1; k < curve.fpr.size(); ++k)
        area += (curve.fpr[k] - curve.fpr[k - 1]) * 0.5 * (curve.tpr[k] + curve.tpr[k - 1]);
    curve.auc = area;
    return curve;
}

double pixel_auroc(const std::vector<AnomalyMap>& maps, const std::vector<Image8>& masks) {
    if (maps.size() != masks.size())
        throw std::invalid_argument("pixel_auroc: map and mask counts differ");
    if (maps.empty()) throw std::invalid_argument("pixel_auroc: empty input");

    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const AnomalyMap& m = maps[i];
        const Image8& g = masks[i];
        if (m.width != g.width || m.height != g.height)
            throw std::invalid_argument("pixel_auroc: map " + std::to_string(i) +
                                        " does not match its mask size");
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                scores.push_back(m.at(x, y));
                labels.push_back(mask_set(g, x, y) ? 1 : 0);
            }
    }
    return auroc(scores, labels);
}

ComponentLabels connected_components(const Image8& mask) {
    ComponentLabels out;
    out.width = mask.width;
    out.height = mask.height;
    out.labels.assign(static_cast<std::size_t>(mask.width) * mask.height, 0);

    std::deque<std::pair<int, int>> queue;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const std::size_t at = static_cast<std::size_t>(y) * mask.width + x;
            if (out.labels[at] != 0 || !mask_set(mask, x, y)) continue;
            const std::int32_t id = ++out.num_regions;
            out.labels[at] = id;
            queue.emplace_back(x, y);
            while (!queue.empty()) {
                const auto [cx, cy] = queue.front();
                queue.pop_front();
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) continue;
                        const std::size_t nat = static_cast<std::size_t>(ny) * mask.width + nx;
                        if (out.labels[nat] != 0 || !mask_set(mask, nx, ny)) continue;
                        out.labels[nat] = id;
                        queue.emplace_back(nx, ny);
                    }
                }
            }
        }
    }
    return out;
}

ProCurve aupro(const std::vector<AnomalyMap>& maps, const std::vector<Image8>& masks,
               double fpr_limit) {
    if (maps.size() != masks.size())
        throw std::invalid_argument("aupro: map and mask counts differ");
    if (maps.empty()) throw std::invalid_argument("aupro: empty input");
    if (!(fpr_limit > 0.0) || fpr_limit > 1.0)
        throw std::invalid_argument("aupro: fpr_limit must be in (0, 1]");

    struct Entry {
        double score;
        std::int32_t region;  // -1 for normal pixels
    };
    std::vector<Entry> entries;
    std::vector<std::size_t> region_size;
    std::size_t total_neg = 0;

    for (std::size_t i = 0; i < maps.size(); ++i) {
        const AnomalyMap& m = maps[i];
        const Image8& g = masks[i];
        if (m.width != g.width || m.height != g.height)
            throw std::invalid_argument("aupro: map " + std::to_string(i) +
                                        " does not match its mask size");
        const ComponentLabels cc = connected_components(g);
        const auto offset = static_cast<std::int32_t>(region_size.size());
        for (int r = 0; r < cc.num_regions; ++r) region_size.push_back(0);
        for (int y = 0; y < m.height; ++y) {
            for (int x = 0; x < m.width; ++x) {
                const std::int32_t local = cc.labels[static_cast<std::size_t>(y) * m.width + x];
                Entry e;
                e.score = m.at(x, y);
                if (!std::isfinite(e.score))
                    throw std::invalid_argument("aupro: non-finite score in map " +
                                                std::to_string(i));
                if (local == 0) {
                    e.region = -1;
                    ++total_neg;
                } else {
                    e.region = offset + local - 1;
                    ++region_size[static_cast<std::size_t>(e.region)];
                }
                entries.push_back(e);
            }
        }
    }
    if (region_size.empty())
        throw std::invalid_argument("aupro: masks contain no anomalous regions");
    if (total_neg == 0)
        throw std::invalid_argument("aupro: masks contain no normal pixels");

    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.score > b.score; });

    const double r_count = static_cast<double>(region_size.size());

    ProCurve curve;
    curve.fpr_limit = fpr_limit;
    curve.fpr.push_back(0.0);
    curve.pro.push_back(0.0);

    // Descending sweep over distinct values; pro_sum tracks the sum over
    // regions of the covered fraction, updated in fixed input order.
    double pro_sum = 0.0;
    std::size_t fp = 0;
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t j = i;
        while (j < entries.size() && entries[j].score == entries[i].score) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (entries[k].region < 0) {
                ++fp;
            } else {
                pro_sum += 1.0 / static_cast<double>(
                                     region_size[static_cast<std::size_t>(entries[k].region)]);
            }
        }
        curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(total_neg));
        curve.pro.push_back(std::min(1.0, pro_sum / r_count));
        i = j;
    }

    double area = 0.0;
    double prev_f = curve.fpr[0], prev_p = curve.pro[0];
    for (std::size_t k = 1; k < curve.fpr.size(); ++k) {
        const double f = curve.fpr[k], p = curve.pro[k];
        if (f >= fpr_limit) {
            double p_at = p;
            if (f > prev_f)
                p_at = prev_p + (p - prev_p) * (fpr_limit - prev_f) / (f - prev_f);
            area += (fpr_limit - prev_f) * 0.5 * (prev_p + p_at);
            prev_f = fpr_limit;
            break;
        }
        area += (f - prev_f) * 0.5 * (p + prev_p);
        prev_f = f;
        prev_p = p;
    }
    curve.aupro = area / fpr_limit;
    return curve;
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write curve file " + path.string());
    out << "fpr,tpr\n";
    for (std::size_t i = 0; i < curve.fpr.size(); ++i)
        out << format_double(curve.fpr[i]) << ',' << format_double(curve.tpr[i]) << '\n';
    if (!out) throw std::runtime_error("write failed for curve file " + path.string());
}

void write_pro_csv(const std::filesystem::path& path, const ProCurve& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write curve file " + path.string());
    out << "fpr,pro\n";
    for (std::size_t i = 0; i < curve.fpr.size(); ++i)
        out << format_double(curve.fpr[i]) << ',' << format_double(curve.pro[i]) << '\n';
    if (!out) throw std::runtime_error("write failed for curve file " + path.string());
}

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.subspan(0, half)) + pairwise_sum(values.subspan(half));
}

}  // namespace frax
