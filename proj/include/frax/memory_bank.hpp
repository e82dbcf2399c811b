#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "frax/anomaly_map.hpp"
#include "frax/features.hpp"

namespace frax {

struct ScoreConfig {
    int image_size = 256;    // side of the output anomaly map
    double sigma_blur = 4.0; // Gaussian smoothing of the upsampled map

    void validate() const;
};

// Per-cell Gaussian model of normal appearance: mean and covariance with an
// epsilon ridge, scored by Mahalanobis distance.
class GaussianBank {
public:
    // train: one fused tensor per normal image, all the same shape, at least
    // two of them. Covariances use the N-1 denominator. Throws if a ridge of
    // `epsilon` still leaves some cell covariance non positive-definite.
    static GaussianBank fit(const std::vector<FeatureTensor>& train, double epsilon,
                            unsigned workers = 1);

    // For hand-built models and deserialization.
    static GaussianBank from_moments(int grid_h, int grid_w, int dim, Eigen::MatrixXd means,
                                     std::vector<Eigen::MatrixXd> covariances, double epsilon);

    AnomalyMap score(const FeatureTensor& test, const ScoreConfig& config) const;

    int grid_h() const { return grid_h_; }
    int grid_w() const { return grid_w_; }
    int dim() const { return dim_; }
    double epsilon() const { return epsilon_; }
    const Eigen::MatrixXd& means() const { return means_; }               // cells x dim
    const std::vector<Eigen::MatrixXd>& covariances() const { return covs_; }

    void save(const std::filesystem::path& path) const;
    static GaussianBank load(const std::filesystem::path& path);

private:
    GaussianBank() = default;
    void factorize();

    int grid_h_ = 0, grid_w_ = 0, dim_ = 0;
    double epsilon_ = 0.0;
    Eigen::MatrixXd means_;                 // cells x dim
    std::vector<Eigen::MatrixXd> covs_;     // raw covariances, ridge not included
    std::vector<Eigen::LLT<Eigen::MatrixXd>> llt_;  // factorizations of cov + eps I
};

enum class CoresetStart { farthest_from_mean };

// Greedy k-center subset of the training patches plus nearest-neighbour
// distance scoring.
class CoresetBank {
public:
    // patches: P x dim, row per training patch. Keeps ceil(ratio * P) rows.
    static CoresetBank select(const Eigen::MatrixXd& patches, double ratio, int neighbor_k = 1,
                              CoresetStart start = CoresetStart::farthest_from_mean);

    // Stacks the cells of the fused training tensors (image-major, row-major
    // cells) and runs select().
    static CoresetBank fit(const std::vector<FeatureTensor>& train, double ratio,
                           int neighbor_k = 1);

    static CoresetBank from_patches(Eigen::MatrixXd patches, double ratio, int neighbor_k);

    AnomalyMap score(const FeatureTensor& test, const ScoreConfig& config) const;

    // Distance of one feature vector to the bank: nearest neighbour for
    // neighbor_k == 1, otherwise the mean of the k smallest distances.
    double patch_distance(const Eigen::VectorXd& x) const;

    const Eigen::MatrixXd& patches() const { return patches_; }
    const std::vector<Eigen::Index>& selected_indices() const { return selected_; }
    double ratio() const { return ratio_; }
    int neighbor_k() const { return neighbor_k_; }

    void save(const std::filesystem::path& path) const;
    static CoresetBank load(const std::filesystem::path& path);

private:
    CoresetBank() = default;

    Eigen::MatrixXd patches_;  // kept rows x dim
    std::vector<Eigen::Index> selected_;  // original row indices, selection order
    double ratio_ = 1.0;
    int neighbor_k_ = 1;
};

// Shared post-processing: bilinear upsample of the cell grid to image
// resolution followed by Gaussian smoothing; image_score = max of the result.
AnomalyMap finalize_map(const std::vector<double>& cell_scores, int grid_h, int grid_w,
                        const ScoreConfig& config);

}  // namespace frax
