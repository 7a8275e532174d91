#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "txmorph/adapter.hpp"
#include "txmorph/dataset.hpp"
#include "txmorph/pea.hpp"

namespace txmorph {

enum class LossDirection { one_way, symmetric };
enum class LossReduction { mean, sum };

struct TrainConfig {
    double temperature = 0.1;
    double lr = 0.001;
    int batch_size = 1024;
    int epochs = 150;
    LossDirection loss_direction = LossDirection::one_way;
    LossReduction loss_reduction = LossReduction::mean;
    int hidden1 = 512;
    int hidden2 = 1024;
    PeaConfig pea;
    std::uint64_t seed = 0;

    void validate() const;
};

struct DistillRun {
    MlpParams params;
    std::vector<double> loss_history;  // one entry per epoch
    TrainConfig config;
};

/// Contrastive loss over one mini-batch: anchors are rows of H, candidates
/// rows of Z, positives on the diagonal. Z is frozen; the returned gradient
/// is with respect to H only.
std::pair<double, Eigen::MatrixXd> clip_loss(const Eigen::MatrixXd& H,
                                             const Eigen::MatrixXd& Z, double temperature,
                                             LossDirection direction = LossDirection::one_way,
                                             LossReduction reduction = LossReduction::mean);

/// Optional capture points for tests.
struct TrainDebug {
    bool capture_inputs = false;
    std::vector<Eigen::MatrixXd> batch_inputs;  // adapter inputs, per mini-batch
};

DistillRun train_semi_clipped(const EmbeddingTable& student, const EmbeddingTable& teacher,
                              const TrainConfig& cfg, TrainDebug* debug = nullptr);

/// Inference path: correct_for_inference followed by the trained adapter.
Eigen::MatrixXd embed_student(const DistillRun& run, const EmbeddingTable& table);

}  // namespace txmorph
