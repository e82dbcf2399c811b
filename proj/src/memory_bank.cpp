#include "frax/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "frax/bytes.hpp"
#include "frax/worker_pool.hpp"

namespace frax {

namespace {

void check_train_shapes(const std::vector<FeatureTensor>& train) {
    if (train.size() < 2)
        throw std::invalid_argument("bank fit: need at least 2 training tensors, got " +
                                    std::to_string(train.size()));
    const auto& first = train.front();
    if (first.grid_h < 1 || first.grid_w < 1 || first.dim < 1)
        throw std::invalid_argument("bank fit: empty feature tensor");
    for (const auto& t : train) {
        if (t.grid_h != first.grid_h || t.grid_w != first.grid_w || t.dim != first.dim)
            throw std::invalid_argument("bank fit: training tensors have mismatched shapes");
    }
}

// Separable Gaussian blur with edge replication; no-op for sigma <= 0.
void gaussian_blur(std::vector<double>& img, int w, int h, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    std::vector<double> tmp(img.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int sx = std::min(w - 1, std::max(0, x + i));
                acc += kernel[i + radius] * img[static_cast<std::size_t>(y) * w + sx];
            }
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int sy = std::min(h - 1, std::max(0, y + i));
                acc += kernel[i + radius] * tmp[static_cast<std::size_t>(sy) * w + x];
            }
            img[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
}

constexpr std::uint8_t kBankGaussian = 1;
constexpr std::uint8_t kBankCoreset = 2;

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open bank file " + path.string());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

void write_all(const std::filesystem::path& path, const ByteWriter& w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write bank file " + path.string());
    out.write(reinterpret_cast<const char*>(w.data().data()),
              static_cast<std::streamsize>(w.size()));
    if (!out) throw std::runtime_error("write failed for bank file " + path.string());
}

}  // namespace

void ScoreConfig::validate() const {
    if (image_size < 1) throw std::invalid_argument("score config: image_size must be positive");
    if (sigma_blur < 0.0) throw std::invalid_argument("score config: negative sigma_blur");
}

AnomalyMap finalize_map(const std::vector<double>& cell_scores, int grid_h, int grid_w,
                        const ScoreConfig& config) {
    config.validate();
    if (cell_scores.size() != static_cast<std::size_t>(grid_h) * grid_w)
        throw std::invalid_argument("finalize_map: cell count mismatch");

    const int size = config.image_size;
    AnomalyMap map;
    map.width = size;
    map.height = size;
    map.scores.assign(static_cast<std::size_t>(size) * size, 0.0);

    const double sx = static_cast<double>(grid_w) / size;
    const double sy = static_cast<double>(grid_h) / size;
    for (int y = 0; y < size; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int fy0 = static_cast<int>(std::floor(fy));
        const double wy = fy - fy0;
        const int y0 = std::max(0, std::min(grid_h - 1, fy0));
        const int y1 = std::max(0, std::min(grid_h - 1, fy0 + 1));
        for (int x = 0; x < size; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int fx0 = static_cast<int>(std::floor(fx));
            const double wx = fx - fx0;
            const int x0 = std::max(0, std::min(grid_w - 1, fx0));
            const int x1 = std::max(0, std::min(grid_w - 1, fx0 + 1));
            const double v =
                (1 - wy) * ((1 - wx) * cell_scores[static_cast<std::size_t>(y0) * grid_w + x0] +
                            wx * cell_scores[static_cast<std::size_t>(y0) * grid_w + x1]) +
                wy * ((1 - wx) * cell_scores[static_cast<std::size_t>(y1) * grid_w + x0] +
                      wx * cell_scores[static_cast<std::size_t>(y1) * grid_w + x1]);
            map.scores[static_cast<std::size_t>(y) * size + x] = v;
        }
    }
    gaussian_blur(map.scores, size, size, config.sigma_blur);
    double mx = map.scores.empty() ? 0.0 : map.scores[0];
    for (double v : map.scores) mx = std::max(mx, v);
    map.image_score = mx;
    return map;
}

GaussianBank GaussianBank::fit(const std::vector<FeatureTensor>& train, double epsilon,
                               unsigned workers) {
    check_train_shapes(train);
    if (epsilon < 0.0) throw std::invalid_argument("gaussian fit: negative epsilon");

    GaussianBank bank;
    bank.grid_h_ = train.front().grid_h;
    bank.grid_w_ = train.front().grid_w;
    bank.dim_ = train.front().dim;
    bank.epsilon_ = epsilon;

    const std::size_t cells = train.front().cells();
    const int d = bank.dim_;
    const auto n = static_cast<Eigen::Index>(train.size());
    bank.means_.resize(static_cast<Eigen::Index>(cells), d);
    bank.covs_.assign(cells, Eigen::MatrixXd());

    // Two passes per cell, images always visited in their given order, so the
    // result is independent of the worker count.
    parallel_for(cells, workers, [&](std::size_t cell) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        for (const auto& t : train)
            mean += Eigen::Map<const Eigen::VectorXf>(&t.data[cell * d], d).cast<double>();
        mean /= static_cast<double>(n);

        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
        for (const auto& t : train) {
            const Eigen::VectorXd x =
                Eigen::Map<const Eigen::VectorXf>(&t.data[cell * d], d).cast<double>() - mean;
            cov.noalias() += x * x.transpose();
        }
        cov /= static_cast<double>(n - 1);
        bank.means_.row(static_cast<Eigen::Index>(cell)) = mean.transpose();
        bank.covs_[cell] = std::move(cov);
    });

    bank.factorize();
    return bank;
}

GaussianBank GaussianBank::from_moments(int grid_h, int grid_w, int dim, Eigen::MatrixXd means,
                                        std::vector<Eigen::MatrixXd> covariances, double epsilon) {
    if (grid_h < 1 || grid_w < 1 || dim < 1)
        throw std::invalid_argument("gaussian bank: invalid shape");
    const std::size_t cells = static_cast<std::size_t>(grid_h) * grid_w;
    if (means.rows() != static_cast<Eigen::Index>(cells) || means.cols() != dim ||
        covariances.size() != cells)
        throw std::invalid_argument("gaussian bank: moment shapes do not match the grid");
    for (const auto& c : covariances) {
        if (c.rows() != dim || c.cols() != dim)
            throw std::invalid_argument("gaussian bank: covariance shape mismatch");
    }
    GaussianBank bank;
    bank.grid_h_ = grid_h;
    bank.grid_w_ = grid_w;
    bank.dim_ = dim;
    bank.epsilon_ = epsilon;
    bank.means_ = std::move(means);
    bank.covs_ = std::move(covariances);
    bank.factorize();
    return bank;
}

void GaussianBank::factorize() {
    llt_.clear();
    llt_.resize(covs_.size());
    const Eigen::MatrixXd ridge = epsilon_ * Eigen::MatrixXd::Identity(dim_, dim_);
    for (std::size_t cell = 0; cell < covs_.size(); ++cell) {
        llt_[cell].compute(covs_[cell] + ridge);
        if (llt_[cell].info() != Eigen::Success)
            throw std::runtime_error("gaussian bank: covariance at cell " + std::to_string(cell) +
                                     " is not positive definite (epsilon=" +
                                     std::to_string(epsilon_) + ")");
    }
}

AnomalyMap GaussianBank::score(const FeatureTensor& test, const ScoreConfig& config) const {
    if (test.grid_h != grid_h_ || test.grid_w != grid_w_ || test.dim != dim_)
        throw std::invalid_argument("gaussian score: tensor shape does not match the bank");
    const std::size_t cells = test.cells();
    std::vector<double> cell_scores(cells);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        const Eigen::VectorXd x =
            Eigen::Map<const Eigen::VectorXf>(&test.data[cell * dim_], dim_).cast<double>() -
            means_.row(static_cast<Eigen::Index>(cell)).transpose();
        // Mahalanobis via the Cholesky factor: solve L y = x, distance = |y|.
        const Eigen::VectorXd y = llt_[cell].matrixL().solve(x);
        cell_scores[cell] = std::sqrt(std::max(0.0, y.squaredNorm()));
    }
    return finalize_map(cell_scores, grid_h_, grid_w_, config);
}

void GaussianBank::save(const std::filesystem::path& path) const {
    ByteWriter w;
    w.bytes("BANK", 4);
    w.u8(kBankGaussian);
    w.u16(static_cast<std::uint16_t>(grid_h_));
    w.u16(static_cast<std::uint16_t>(grid_w_));
    w.u32(static_cast<std::uint32_t>(dim_));
    w.f64(epsilon_);
    for (Eigen::Index cell = 0; cell < means_.rows(); ++cell) {
        for (int c = 0; c < dim_; ++c) w.f32(static_cast<float>(means_(cell, c)));
        const Eigen::MatrixXd& cov = covs_[static_cast<std::size_t>(cell)];
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) w.f32(static_cast<float>(cov(i, j)));
    }
    write_all(path, w);
}

GaussianBank GaussianBank::load(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_all(path);
    try {
        ByteReader r(bytes.data(), bytes.size());
        char magic[4];
        r.bytes(magic, 4);
        if (std::memcmp(magic, "BANK", 4) != 0) throw ParseError(0, "bad magic, not a bank file");
        const std::uint8_t type = r.u8();
        if (type != kBankGaussian)
            throw ParseError(4, "bank type " + std::to_string(type) + " is not a gaussian bank");
        const int gh = r.u16();
        const int gw = r.u16();
        const int d = static_cast<int>(r.u32());
        const double eps = r.f64();
        if (gh < 1 || gw < 1 || d < 1) throw ParseError(5, "invalid bank shape");
        const std::size_t cells = static_cast<std::size_t>(gh) * gw;
        Eigen::MatrixXd means(static_cast<Eigen::Index>(cells), d);
        std::vector<Eigen::MatrixXd> covs(cells);
        for (std::size_t cell = 0; cell < cells; ++cell) {
            for (int c = 0; c < d; ++c) means(static_cast<Eigen::Index>(cell), c) = r.f32();
            Eigen::MatrixXd cov(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) cov(i, j) = r.f32();
            covs[cell] = std::move(cov);
        }
        if (!r.done()) throw ParseError(r.pos(), "trailing bytes after bank data");
        return from_moments(gh, gw, d, std::move(means), std::move(covs), eps);
    } catch (const ParseError& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

CoresetBank CoresetBank::select(const Eigen::MatrixXd& patches, double ratio, int neighbor_k,
                                CoresetStart) {
    if (patches.rows() < 1) throw std::invalid_argument("coreset: no patches");
    if (!(ratio > 0.0) || ratio > 1.0)
        throw std::invalid_argument("coreset: ratio must be in (0, 1]");
    if (neighbor_k < 1) throw std::invalid_argument("coreset: neighbor_k must be at least 1");

    const Eigen::Index p = patches.rows();
    const auto keep = static_cast<Eigen::Index>(
        std::min<double>(static_cast<double>(p), std::ceil(ratio * static_cast<double>(p))));

    std::vector<Eigen::Index> selected;
    selected.reserve(static_cast<std::size_t>(keep));

    // Start at the patch farthest from the global mean; ties take the lowest
    // original index (strict > while scanning ascending).
    const Eigen::RowVectorXd mean = patches.colwise().mean();
    Eigen::Index best = 0;
    double best_d = -1.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        const double d = (patches.row(i) - mean).squaredNorm();
        if (d > best_d) {
            best_d = d;
            best = i;
        }
    }
    selected.push_back(best);

    Eigen::VectorXd min_d = (patches.rowwise() - patches.row(best)).rowwise().squaredNorm();
    while (static_cast<Eigen::Index>(selected.size()) < keep) {
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < p; ++i) {
            if (min_d(i) > far_d) {
                far_d = min_d(i);
                far = i;
            }
        }
        selected.push_back(far);
        min_d = min_d.cwiseMin((patches.rowwise() - patches.row(far)).rowwise().squaredNorm());
    }

    CoresetBank bank;
    bank.patches_.resize(keep, patches.cols());
    for (Eigen::Index i = 0; i < keep; ++i) bank.patches_.row(i) = patches.row(selected[i]);
    bank.selected_ = std::move(selected);
    bank.ratio_ = ratio;
    bank.neighbor_k_ = neighbor_k;
    return bank;
}

CoresetBank CoresetBank::fit(const std::vector<FeatureTensor>& train, double ratio,
                             int neighbor_k) {
    check_train_shapes(train);
    const std::size_t cells = train.front().cells();
    const int d = train.front().dim;
    Eigen::MatrixXd patches(static_cast<Eigen::Index>(train.size() * cells), d);
    Eigen::Index row = 0;
    for (const auto& t : train) {
        for (std::size_t cell = 0; cell < cells; ++cell) {
            patches.row(row++) =
                Eigen::Map<const Eigen::VectorXf>(&t.data[cell * d], d).cast<double>().transpose();
        }
    }
    return select(patches, ratio, neighbor_k);
}

CoresetBank CoresetBank::from_patches(Eigen::MatrixXd patches, double ratio, int neighbor_k) {
    if (patches.rows() < 1) throw std::invalid_argument("coreset: no patches");
    if (neighbor_k < 1) throw std::invalid_argument("coreset: neighbor_k must be at least 1");
    CoresetBank bank;
    bank.selected_.resize(static_cast<std::size_t>(patches.rows()));
    for (std::size_t i = 0; i < bank.selected_.size(); ++i)
        bank.selected_[i] = static_cast<Eigen::Index>(i);
    bank.patches_ = std::move(patches);
    bank.ratio_ = ratio;
    bank.neighbor_k_ = neighbor_k;
    return bank;
}

double CoresetBank::patch_distance(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd d2 = (patches_.rowwise() - x.transpose()).rowwise().squaredNorm();
    if (neighbor_k_ == 1) return std::sqrt(d2.minCoeff());
    const int k = std::min<int>(neighbor_k_, static_cast<int>(d2.size()));
    std::vector<double> v(d2.data(), d2.data() + d2.size());
    std::partial_sort(v.begin(), v.begin() + k, v.end());
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += std::sqrt(v[i]);
    return sum / k;
}

AnomalyMap CoresetBank::score(const FeatureTensor& test, const ScoreConfig& config) const {
    if (test.dim != patches_.cols())
        throw std::invalid_argument("coreset score: feature dimension does not match the bank");
    const std::size_t cells = test.cells();
    std::vector<double> cell_scores(cells);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        const Eigen::VectorXd x =
            Eigen::Map<const Eigen::VectorXf>(&test.data[cell * test.dim], test.dim)
                .cast<double>();
        cell_scores[cell] = patch_distance(x);
    }
    return finalize_map(cell_scores, test.grid_h, test.grid_w, config);
}

void CoresetBank::save(const std::filesystem::path& path) const {
    ByteWriter w;
    w.bytes("BANK", 4);
    w.u8(kBankCoreset);
    w.u64(static_cast<std::uint64_t>(patches_.rows()));
    w.u32(static_cast<std::uint32_t>(patches_.cols()));
    w.f64(ratio_);
    w.u32(static_cast<std::uint32_t>(neighbor_k_));
    for (Eigen::Index i = 0; i < patches_.rows(); ++i)
        for (Eigen::Index j = 0; j < patches_.cols(); ++j)
            w.f32(static_cast<float>(patches_(i, j)));
    write_all(path, w);
}

CoresetBank CoresetBank::load(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_all(path);
    try {
        ByteReader r(bytes.data(), bytes.size());
        char magic[4];
        r.bytes(magic, 4);
        if (std::memcmp(magic, "BANK", 4) != 0) throw ParseError(0, "bad magic, not a bank file");
        const std::uint8_t type = r.u8();
        if (type != kBankCoreset)
            throw ParseError(4, "bank type " + std::to_string(type) + " is not a coreset bank");
        const std::uint64_t rows = r.u64();
        const std::uint32_t cols = r.u32();
        const double ratio = r.f64();
        const std::uint32_t k = r.u32();
        if (rows < 1 || cols < 1 || k < 1) throw ParseError(5, "invalid bank shape");
        Eigen::MatrixXd patches(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < patches.rows(); ++i)
            for (Eigen::Index j = 0; j < patches.cols(); ++j) patches(i, j) = r.f32();
        if (!r.done()) throw ParseError(r.pos(), "trailing bytes after bank data");
        CoresetBank bank = from_patches(std::move(patches), ratio, static_cast<int>(k));
        return bank;
    } catch (const ParseError& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

}  // namespace frax
