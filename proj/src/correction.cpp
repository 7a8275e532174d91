#include "txmorph/correction.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include <json.hpp>

#include "txmorph/errors.hpp"

namespace txmorph {

namespace {

void require_rows(const Eigen::MatrixXd& controls, std::ptrdiff_t min_rows) {
    if (controls.rows() == 0) {
        throw validation_error("EmptyControls", "no control rows");
    }
    if (controls.rows() < min_rows) {
        throw validation_error("TooFewControls",
                               "need >= " + std::to_string(min_rows) + " control rows, got " +
                                   std::to_string(controls.rows()));
    }
}

void require_dim(std::ptrdiff_t got, std::ptrdiff_t want) {
    if (got != want) {
        throw validation_error("DimensionMismatch",
                               "expected " + std::to_string(want) + " columns, got " +
                                   std::to_string(got));
    }
}

}  // namespace

Eigen::MatrixXd population_covariance(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
    return (centered.transpose() * centered) / static_cast<double>(X.rows());
}

CorrectionStep fit_center(const Eigen::MatrixXd& controls) {
    require_rows(controls, 1);
    CorrectionStep step;
    step.kind = StepKind::center;
    step.mean = controls.colwise().mean();
    return step;
}

CorrectionStep fit_scale(const Eigen::MatrixXd& controls) {
    require_rows(controls, 2);
    CorrectionStep step;
    step.kind = StepKind::scale;
    step.mean = controls.colwise().mean();
    Eigen::MatrixXd centered = controls.rowwise() - step.mean.transpose();
    Eigen::VectorXd var =
        centered.array().square().colwise().sum() / static_cast<double>(controls.rows());
    step.std_dev = var.array().sqrt().max(kStatFloor);
    return step;
}

CorrectionStep fit_pca_whiten(const Eigen::MatrixXd& controls) {
    require_rows(controls, 2);
    CorrectionStep step;
    step.kind = StepKind::pca_whiten;
    Eigen::MatrixXd cov = population_covariance(controls);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw numerical_error("EigenDecompositionFailed", "covariance eigendecomposition");
    }
    Eigen::MatrixXd W = solver.eigenvectors();
    // fix eigenvector signs: largest-magnitude entry positive
    for (std::ptrdiff_t j = 0; j < W.cols(); ++j) {
        std::ptrdiff_t arg = 0;
        W.col(j).cwiseAbs().maxCoeff(&arg);
        if (W(arg, j) < 0.0) W.col(j) = -W.col(j);
    }
    step.rotation = W;
    step.eigenvalues = solver.eigenvalues().cwiseMax(kStatFloor);
    return step;
}

TvnTransform fit_tvn(const Eigen::MatrixXd& controls) {
    require_rows(controls, 2);
    CorrectionStep scale = fit_scale(controls);
    Eigen::MatrixXd scaled = apply_step(scale, controls);
    CorrectionStep whiten = fit_pca_whiten(scaled);

    TvnTransform tvn;
    tvn.mean = scale.mean;
    tvn.std_dev = scale.std_dev;
    Eigen::VectorXd inv_sqrt = whiten.eigenvalues.array().rsqrt();
    tvn.transform =
        whiten.rotation * inv_sqrt.asDiagonal() * whiten.rotation.transpose();
    return tvn;
}

Eigen::MatrixXd apply_step(const CorrectionStep& step, const Eigen::MatrixXd& X) {
    switch (step.kind) {
        case StepKind::center:
            require_dim(X.cols(), step.mean.size());
            return X.rowwise() - step.mean.transpose();
        case StepKind::scale: {
            require_dim(X.cols(), step.mean.size());
            Eigen::MatrixXd out = X.rowwise() - step.mean.transpose();
            out.array().rowwise() /= step.std_dev.transpose().array();
            return out;
        }
        case StepKind::pca_whiten: {
            require_dim(X.cols(), step.rotation.rows());
            Eigen::VectorXd inv_sqrt = step.eigenvalues.array().rsqrt();
            return X * (step.rotation * inv_sqrt.asDiagonal() * step.rotation.transpose());
        }
    }
    throw validation_error("UnknownStepKind", "unreachable");
}

Eigen::MatrixXd apply_step(const TvnTransform& tvn, const Eigen::MatrixXd& X) {
    require_dim(X.cols(), tvn.mean.size());
    Eigen::MatrixXd out = X.rowwise() - tvn.mean.transpose();
    out.array().rowwise() /= tvn.std_dev.transpose().array();
    return out * tvn.transform;
}

std::string TvnTransform::to_json() const {
    nlohmann::json j;
    j["dim"] = mean.size();
    j["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
    j["std"] = std::vector<double>(std_dev.data(), std_dev.data() + std_dev.size());
    std::vector<double> t;
    t.reserve(static_cast<std::size_t>(transform.size()));
    for (std::ptrdiff_t r = 0; r < transform.rows(); ++r) {
        for (std::ptrdiff_t c = 0; c < transform.cols(); ++c) {
            t.push_back(transform(r, c));
        }
    }
    j["transform"] = t;  // row-major
    return j.dump();
}

TvnTransform TvnTransform::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    TvnTransform tvn;
    const std::ptrdiff_t d = j.at("dim").get<std::ptrdiff_t>();
    auto mean = j.at("mean").get<std::vector<double>>();
    auto stdv = j.at("std").get<std::vector<double>>();
    auto t = j.at("transform").get<std::vector<double>>();
    if (static_cast<std::ptrdiff_t>(mean.size()) != d ||
        static_cast<std::ptrdiff_t>(stdv.size()) != d ||
        static_cast<std::ptrdiff_t>(t.size()) != d * d) {
        throw validation_error("DimensionMismatch", "TvnTransform JSON fields");
    }
    tvn.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), d);
    tvn.std_dev = Eigen::Map<Eigen::VectorXd>(stdv.data(), d);
    tvn.transform.resize(d, d);
    for (std::ptrdiff_t r = 0; r < d; ++r) {
        for (std::ptrdiff_t c = 0; c < d; ++c) {
            tvn.transform(r, c) = t[static_cast<std::size_t>(r * d + c)];
        }
    }
    return tvn;
}

}  // namespace txmorph
