#pragma once

#include <Eigen/Dense>
#include <string>

namespace txmorph {

enum class StepKind { center, scale, pca_whiten };

/// One fitted stage of a batch-correction pipeline. Only the statistics the
/// kind needs are meaningful.
struct CorrectionStep {
    StepKind kind = StepKind::center;
    Eigen::VectorXd mean;         // center, scale
    Eigen::VectorXd std_dev;      // scale (floored)
    Eigen::MatrixXd rotation;     // pca_whiten: orthonormal columns W
    Eigen::VectorXd eigenvalues;  // pca_whiten: floored eigenvalues D
};

/// Fitted whitening transform: x -> ((x - mean) / std) * T, with
/// T = W * D^(-1/2) * W^T (symmetric).
struct TvnTransform {
    Eigen::VectorXd mean;
    Eigen::VectorXd std_dev;
    Eigen::MatrixXd transform;

    std::string to_json() const;
    static TvnTransform from_json(const std::string& text);
};

inline constexpr double kStatFloor = 1e-8;

CorrectionStep fit_center(const Eigen::MatrixXd& controls);
CorrectionStep fit_scale(const Eigen::MatrixXd& controls);

/// PCA-whitening step fitted on already center-scaled controls.
CorrectionStep fit_pca_whiten(const Eigen::MatrixXd& controls);

TvnTransform fit_tvn(const Eigen::MatrixXd& controls);

Eigen::MatrixXd apply_step(const CorrectionStep& step, const Eigen::MatrixXd& X);
Eigen::MatrixXd apply_step(const TvnTransform& tvn, const Eigen::MatrixXd& X);

/// Population (1/n) column covariance of X, centered on its own column means.
Eigen::MatrixXd population_covariance(const Eigen::MatrixXd& X);

}  // namespace txmorph
