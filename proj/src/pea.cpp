#include "txmorph/pea.hpp"

#include <algorithm>

#include "txmorph/errors.hpp"

namespace txmorph {

std::vector<StepKind> canonical_steps(PeaMethod method) {
    switch (method) {
        case PeaMethod::center:
            return {StepKind::center};
        case PeaMethod::center_scale:
            return {StepKind::center, StepKind::scale};
        case PeaMethod::tvn:
            return {StepKind::center, StepKind::scale, StepKind::pca_whiten};
    }
    throw validation_error("ConfigInvalid", "unknown PEA method");
}

void PeaConfig::validate() const {
    if (enabled && method_set.empty()) {
        throw validation_error("ConfigInvalid", "pea.method_set empty while enabled");
    }
    if (min_controls < 2) {
        throw validation_error("ConfigInvalid", "pea.min_controls must be >= 2");
    }
    if (step_drop_prob < 0.0 || step_drop_prob > 1.0) {
        throw validation_error("ConfigInvalid", "pea.step_drop_prob outside [0,1]");
    }
}

AugmentationDraw draw_augmentation(const PeaConfig& cfg,
                                   const std::vector<std::string>& batch_controls,
                                   CounterRng& stream) {
    cfg.validate();
    if (static_cast<int>(batch_controls.size()) < cfg.min_controls) {
        throw validation_error("TooFewControls",
                               "batch has " + std::to_string(batch_controls.size()) +
                                   " controls, need " + std::to_string(cfg.min_controls));
    }
    AugmentationDraw draw;
    draw.method =
        cfg.method_set[static_cast<std::size_t>(stream.uniform_below(cfg.method_set.size()))];

    for (StepKind step : canonical_steps(draw.method)) {
        if (cfg.stochastic_steps && stream.uniform01() < cfg.step_drop_prob) continue;
        draw.kept_steps.push_back(step);
    }

    if (cfg.control_subsampling) {
        const std::uint64_t lo = static_cast<std::uint64_t>(cfg.min_controls);
        const std::uint64_t hi = batch_controls.size();
        const std::uint64_t count = lo + stream.uniform_below(hi - lo + 1);
        std::vector<std::size_t> idx(batch_controls.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        stream.shuffle(idx);
        idx.resize(static_cast<std::size_t>(count));
        std::sort(idx.begin(), idx.end());  // keep batch order
        for (std::size_t i : idx) draw.control_ids.push_back(batch_controls[i]);
    } else {
        draw.control_ids = batch_controls;
    }
    return draw;
}

Eigen::VectorXd apply_pea(const AugmentationDraw& draw, const Eigen::VectorXd& z,
                          const Eigen::MatrixXd& controls) {
    if (draw.kept_steps.empty()) return z;
    if (controls.cols() != z.size()) {
        throw validation_error("DimensionMismatch",
                               "controls columns != embedding dimension");
    }
    Eigen::MatrixXd fitted_controls = controls;
    Eigen::MatrixXd x = z.transpose();
    for (StepKind kind : draw.kept_steps) {
        CorrectionStep step;
        switch (kind) {
            case StepKind::center:
                step = fit_center(fitted_controls);
                break;
            case StepKind::scale:
                step = fit_scale(fitted_controls);
                break;
            case StepKind::pca_whiten:
                step = fit_pca_whiten(fitted_controls);
                break;
        }
        x = apply_step(step, x);
        fitted_controls = apply_step(step, fitted_controls);
    }
    return x.row(0).transpose();
}

Eigen::MatrixXd correct_for_inference(const PeaConfig& cfg, const EmbeddingTable& table) {
    if (!cfg.inference_tvn) return table.matrix;
    const auto rows = table.control_rows();
    if (rows.empty()) {
        throw validation_error("EmptyControls", "inference TVN needs control rows");
    }
    Eigen::MatrixXd controls(rows.size(), table.dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        controls.row(static_cast<std::ptrdiff_t>(i)) = table.matrix.row(rows[i]);
    }
    TvnTransform tvn = fit_tvn(controls);
    return apply_step(tvn, table.matrix);
}

}  // namespace txmorph
