#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "txmorph/correction.hpp"
#include "txmorph/dataset.hpp"
#include "txmorph/rng.hpp"

namespace txmorph {

enum class PeaMethod { center, center_scale, tvn };

/// Canonical step order for a correction method.
std::vector<StepKind> canonical_steps(PeaMethod method);

struct PeaConfig {
    bool enabled = true;
    std::vector<PeaMethod> method_set = {PeaMethod::center, PeaMethod::center_scale,
                                         PeaMethod::tvn};
    double step_drop_prob = 0.5;
    bool control_subsampling = true;
    int min_controls = 2;
    bool stochastic_steps = true;
    bool inference_tvn = true;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One sampled realization of the augmentation policy for a single sample.
struct AugmentationDraw {
    PeaMethod method = PeaMethod::center;
    std::vector<StepKind> kept_steps;
    std::vector<std::string> control_ids;
};

AugmentationDraw draw_augmentation(const PeaConfig& cfg,
                                   const std::vector<std::string>& batch_controls,
                                   CounterRng& stream);

/// Fits the kept steps sequentially on `controls` (each step on the controls
/// as transformed by the prior steps) and applies the composition to z.
Eigen::VectorXd apply_pea(const AugmentationDraw& draw, const Eigen::VectorXd& z,
                          const Eigen::MatrixXd& controls);

/// Pooled TVN over all control rows, applied to every row, when
/// cfg.inference_tvn is set; otherwise the matrix unchanged.
Eigen::MatrixXd correct_for_inference(const PeaConfig& cfg, const EmbeddingTable& table);

}  // namespace txmorph
