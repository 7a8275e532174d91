#include "txmorph/distill.hpp"

#include <cmath>
#include <unordered_map>

#include "txmorph/errors.hpp"
#include "txmorph/rng.hpp"

namespace txmorph {

void TrainConfig::validate() const {
    if (temperature <= 0.0) throw validation_error("ConfigInvalid", "temperature must be > 0");
    if (lr <= 0.0) throw validation_error("ConfigInvalid", "lr must be > 0");
    if (batch_size < 2) {
        throw validation_error("ConfigInvalid",
                               "batch_size must be >= 2 (contrastive loss needs negatives)");
    }
    if (epochs < 1) throw validation_error("ConfigInvalid", "epochs must be >= 1");
    if (hidden1 < 1 || hidden2 < 1) {
        throw validation_error("ConfigInvalid", "hidden dims must be positive");
    }
    pea.validate();
}

namespace {

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& X, Eigen::VectorXd& norms,
                               const char* which) {
    norms = X.rowwise().norm();
    for (std::ptrdiff_t i = 0; i < norms.size(); ++i) {
        if (norms(i) < 1e-30) {
            throw numerical_error("ZeroNormRow",
                                  std::string(which) + " row " + std::to_string(i));
        }
    }
    return norms.cwiseInverse().asDiagonal() * X;
}

/// Row-wise softmax with max subtraction; also returns the per-row
/// log-sum-exp so the loss can be formed without a second pass.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& S, Eigen::VectorXd& lse) {
    Eigen::VectorXd row_max = S.rowwise().maxCoeff();
    Eigen::MatrixXd E = (S.colwise() - row_max).array().exp();
    Eigen::VectorXd sums = E.rowwise().sum();
    lse = sums.array().log() + row_max.array();
    return sums.cwiseInverse().asDiagonal() * E;
}

}  // namespace

std::pair<double, Eigen::MatrixXd> clip_loss(const Eigen::MatrixXd& H,
                                             const Eigen::MatrixXd& Z, double temperature,
                                             LossDirection direction,
                                             LossReduction reduction) {
    if (H.rows() != Z.rows() || H.cols() != Z.cols()) {
        throw validation_error("ShapeMismatch", "H and Z must have equal shapes");
    }
    if (temperature <= 0.0) {
        throw validation_error("ConfigInvalid", "temperature must be > 0");
    }
    const std::ptrdiff_t B = H.rows();
    Eigen::VectorXd h_norms, z_norms;
    Eigen::MatrixXd Hn = normalize_rows(H, h_norms, "H");
    Eigen::MatrixXd Zn = normalize_rows(Z, z_norms, "Z");

    Eigen::MatrixXd S = (Hn * Zn.transpose()) / temperature;

    const double scale =
        reduction == LossReduction::mean ? 1.0 / static_cast<double>(B) : 1.0;

    Eigen::VectorXd lse;
    Eigen::MatrixXd P = softmax_rows(S, lse);
    double loss = (lse - S.diagonal()).sum();
    Eigen::MatrixXd dS = P;
    dS.diagonal().array() -= 1.0;

    if (direction == LossDirection::symmetric) {
        Eigen::VectorXd lse_t;
        Eigen::MatrixXd Pt = softmax_rows(Eigen::MatrixXd(S.transpose()), lse_t);
        double loss_t = (lse_t - S.diagonal()).sum();
        Eigen::MatrixXd dSt = Pt;
        dSt.diagonal().array() -= 1.0;
        loss = 0.5 * (loss + loss_t);
        dS = 0.5 * (dS + dSt.transpose());
    }
    loss *= scale;
    dS *= scale;

    // chain through the similarity matrix and the row normalization of H
    Eigen::MatrixXd dHn = (dS * Zn) / temperature;
    Eigen::MatrixXd dH(B, H.cols());
    for (std::ptrdiff_t i = 0; i < B; ++i) {
        const double dot = dHn.row(i).dot(Hn.row(i));
        dH.row(i) = (dHn.row(i) - dot * Hn.row(i)) / h_norms(i);
    }
    return {loss, dH};
}

DistillRun train_semi_clipped(const EmbeddingTable& student, const EmbeddingTable& teacher,
                              const TrainConfig& cfg, TrainDebug* debug) {
    cfg.validate();
    PairingIndex index = build_pairing_index(student, teacher);

    // teacher-side TVN B: pooled over all teacher controls, fitted once
    const auto teacher_ctrl_rows = teacher.control_rows();
    if (teacher_ctrl_rows.empty()) {
        throw validation_error("EmptyControls", "teacher table has no controls for TVN");
    }
    Eigen::MatrixXd teacher_controls(teacher_ctrl_rows.size(), teacher.dim);
    for (std::size_t i = 0; i < teacher_ctrl_rows.size(); ++i) {
        teacher_controls.row(static_cast<std::ptrdiff_t>(i)) =
            teacher.matrix.row(teacher_ctrl_rows[i]);
    }
    const TvnTransform teacher_tvn = fit_tvn(teacher_controls);
    const Eigen::MatrixXd teacher_corrected = apply_step(teacher_tvn, teacher.matrix);

    std::unordered_map<std::string, std::ptrdiff_t> student_row, teacher_row;
    for (std::ptrdiff_t i = 0; i < student.n_samples(); ++i) {
        student_row[student.meta[static_cast<std::size_t>(i)].sample_id] = i;
    }
    for (std::ptrdiff_t i = 0; i < teacher.n_samples(); ++i) {
        teacher_row[teacher.meta[static_cast<std::size_t>(i)].sample_id] = i;
    }

    // batch-local student control pools for PEA
    const auto ctrl_rows_by_batch = student.controls_by_batch();
    std::unordered_map<std::string, std::vector<std::string>> ctrl_ids_by_batch;
    std::unordered_map<std::string, std::unordered_map<std::string, std::ptrdiff_t>>
        ctrl_row_by_id;
    for (const auto& [batch, rows] : ctrl_rows_by_batch) {
        for (std::ptrdiff_t r : rows) {
            const auto& id = student.meta[static_cast<std::size_t>(r)].sample_id;
            ctrl_ids_by_batch[batch].push_back(id);
            ctrl_row_by_id[batch][id] = r;
        }
    }

    DistillRun run;
    run.config = cfg;
    run.params = init_params(
        {student.dim, cfg.hidden1, cfg.hidden2, teacher.dim}, mix64(cfg.seed));
    AdamState adam = init_adam(run.params, cfg.lr);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto pairs = sample_epoch_pairs(index, cfg.seed,
                                        static_cast<std::uint64_t>(epoch));
        auto shuffle_rng =
            CounterRng::derive({cfg.seed, 0x73687566666cULL,
                                static_cast<std::uint64_t>(epoch)});
        shuffle_rng.shuffle(pairs);

        double epoch_loss = 0.0;
        double epoch_weight = 0.0;
        for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
            const std::size_t count =
                std::min<std::size_t>(cfg.batch_size, pairs.size() - start);
            Eigen::MatrixXd X(count, student.dim);
            Eigen::MatrixXd Zt(count, teacher.dim);
            for (std::size_t k = 0; k < count; ++k) {
                const auto& [sid, tid] = pairs[start + k];
                const std::ptrdiff_t srow = student_row.at(sid);
                Eigen::VectorXd z = student.matrix.row(srow).transpose();
                if (cfg.pea.enabled) {
                    const auto& batch_id =
                        student.meta[static_cast<std::size_t>(srow)].batch_id;
                    const auto& pool = ctrl_ids_by_batch.at(batch_id);
                    auto stream = CounterRng::derive(
                        {cfg.pea.seed, static_cast<std::uint64_t>(epoch),
                         static_cast<std::uint64_t>(srow)});
                    AugmentationDraw draw = draw_augmentation(cfg.pea, pool, stream);
                    Eigen::MatrixXd controls(draw.control_ids.size(), student.dim);
                    const auto& row_of = ctrl_row_by_id.at(batch_id);
                    for (std::size_t c = 0; c < draw.control_ids.size(); ++c) {
                        controls.row(static_cast<std::ptrdiff_t>(c)) =
                            student.matrix.row(row_of.at(draw.control_ids[c]));
                    }
                    z = apply_pea(draw, z, controls);
                }
                X.row(static_cast<std::ptrdiff_t>(k)) = z.transpose();
                Zt.row(static_cast<std::ptrdiff_t>(k)) =
                    teacher_corrected.row(teacher_row.at(tid));
            }
            if (debug && debug->capture_inputs) debug->batch_inputs.push_back(X);

            ForwardCache cache;
            Eigen::MatrixXd H = forward(run.params, X, &cache);
            auto [loss, dH] = clip_loss(H, Zt, cfg.temperature, cfg.loss_direction,
                                        cfg.loss_reduction);
            if (!std::isfinite(loss)) {
                throw numerical_error("NonFiniteLoss",
                                      "epoch " + std::to_string(epoch) + " batch " +
                                          std::to_string(start / cfg.batch_size));
            }
            MlpGradients grads = backward(run.params, cache, dH);
            run.params = adam_step(run.params, grads, adam);

            if (cfg.loss_reduction == LossReduction::mean) {
                epoch_loss += loss * static_cast<double>(count);
                epoch_weight += static_cast<double>(count);
            } else {
                epoch_loss += loss;
                epoch_weight = 1.0;
            }
        }
        run.loss_history.push_back(epoch_loss / epoch_weight);
    }
    return run;
}

Eigen::MatrixXd embed_student(const DistillRun& run, const EmbeddingTable& table) {
    if (table.dim != run.params.dims[0]) {
        throw validation_error("DimensionMismatch",
                               "table dim != adapter input dim");
    }
    Eigen::MatrixXd corrected = correct_for_inference(run.config.pea, table);
    return forward(run.params, corrected);
}

}  // namespace txmorph
