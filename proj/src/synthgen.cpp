#include "txmorph/synthgen.hpp"

#include <cmath>

#include "txmorph/errors.hpp"
#include "txmorph/rng.hpp"

namespace txmorph {

namespace {

Eigen::VectorXd gaussian_vector(CounterRng& rng, std::ptrdiff_t n) {
    Eigen::VectorXd v(n);
    for (std::ptrdiff_t i = 0; i < n; ++i) v(i) = rng.normal();
    return v;
}

Eigen::MatrixXd gaussian_matrix(CounterRng& rng, std::ptrdiff_t rows, std::ptrdiff_t cols,
                                double scale) {
    Eigen::MatrixXd m(rows, cols);
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        for (std::ptrdiff_t c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
    }
    return m;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_genes < 1) throw validation_error("ConfigInvalid", "n_genes must be >= 1");
    if (replicates_student < 1 || replicates_teacher < 1) {
        throw validation_error("ConfigInvalid", "replicates must be >= 1");
    }
    if (d_student < 1 || d_teacher < 1 || n_latent < 1) {
        throw validation_error("ConfigInvalid", "dimensions must be >= 1");
    }
    if (n_batches < 1) throw validation_error("ConfigInvalid", "n_batches must be >= 1");
    if (controls_per_batch < 2) {
        throw validation_error("ConfigInvalid", "controls_per_batch must be >= 2");
    }
    if (shared_fraction < 0.0 || shared_fraction > 1.0) {
        throw validation_error("ConfigInvalid", "shared_fraction outside [0,1]");
    }
    for (const auto& [a, b] : planted_edges) {
        if (a < 0 || b < 0 || a >= n_genes || b >= n_genes || a == b) {
            throw validation_error("ConfigInvalid", "planted edge endpoints invalid");
        }
    }
}

std::vector<std::pair<int, int>> default_planted_edges(int n_genes, int n_edges) {
    if (2 * n_edges > n_genes) {
        throw validation_error("ConfigInvalid", "not enough genes for disjoint edges");
    }
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n_edges; ++i) edges.emplace_back(2 * i, 2 * i + 1);
    return edges;
}

SynthDataset generate(const SynthConfig& cfg) {
    cfg.validate();
    const int L = cfg.n_latent;
    const int L_shared = std::max(1, static_cast<int>(std::lround(cfg.shared_fraction * L)));

    // gene latents, unit norm
    std::vector<Eigen::VectorXd> latents(static_cast<std::size_t>(cfg.n_genes));
    for (int g = 0; g < cfg.n_genes; ++g) {
        auto rng = CounterRng::derive({cfg.seed, 1, static_cast<std::uint64_t>(g)});
        latents[static_cast<std::size_t>(g)] = gaussian_vector(rng, L).normalized();
    }
    // planted edges: rebuild latent(b) close to latent(a), cosine 0.95
    for (std::size_t e = 0; e < cfg.planted_edges.size(); ++e) {
        const auto [a, b] = cfg.planted_edges[e];
        auto rng = CounterRng::derive({cfg.seed, 2, static_cast<std::uint64_t>(e)});
        const Eigen::VectorXd& va = latents[static_cast<std::size_t>(a)];
        Eigen::VectorXd u = gaussian_vector(rng, L);
        Eigen::VectorXd w = u - u.dot(va) * va;
        if (w.norm() < 1e-12) w = gaussian_vector(rng, L) - va;  // degenerate draw
        w.normalize();
        const double c = 0.95;
        latents[static_cast<std::size_t>(b)] = c * va + std::sqrt(1.0 - c * c) * w;
    }

    auto proj_rng = CounterRng::derive({cfg.seed, 3});
    // Unit-variance projections of the unit latent keep the embedding signal
    // at signal_scale per dimension, so batch_effect_scale is directly the
    // batch-to-signal ratio.
    Eigen::MatrixXd proj_student = gaussian_matrix(proj_rng, L, cfg.d_student, 1.0);
    Eigen::MatrixXd proj_teacher = gaussian_matrix(proj_rng, L_shared, cfg.d_teacher, 1.0);
    const double readout_scale = 1.0 / std::sqrt(static_cast<double>(L));
    Eigen::MatrixXd readout = gaussian_matrix(proj_rng, L, cfg.n_genes, readout_scale);

    auto batch_rng = CounterRng::derive({cfg.seed, 4});
    // Technical variation lives in directions complementary to the biological
    // signal subspace (the premise behind control-based whitening), so when the
    // latent dimension leaves room in the student space, batch offsets are
    // confined to the orthogonal complement of the signal subspace and rescaled
    // to the norm an isotropic draw would have.
    Eigen::MatrixXd signal_basis;  // empty when the signal spans the full space
    if (L < cfg.d_student) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(proj_student.transpose());
        signal_basis = qr.householderQ() * Eigen::MatrixXd::Identity(cfg.d_student, L);
    }
    std::vector<Eigen::VectorXd> batch_offsets(static_cast<std::size_t>(cfg.n_batches));
    for (int k = 0; k < cfg.n_batches; ++k) {
        Eigen::VectorXd off = cfg.batch_effect_scale * gaussian_vector(batch_rng, cfg.d_student);
        if (signal_basis.size() > 0) {
            const double iso_norm = off.norm();
            off -= signal_basis * (signal_basis.transpose() * off);
            if (off.norm() > 1e-12) off *= iso_norm / off.norm();
        }
        batch_offsets[static_cast<std::size_t>(k)] = off;
    }

    SynthDataset out;
    auto gene_name = [](int g) { return "gene_" + std::to_string(g); };

    // student table, with expression
    {
        EmbeddingTable& t = out.student;
        t.dim = cfg.d_student;
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(cfg.n_genes) *
                                     cfg.replicates_student +
                                 static_cast<std::ptrdiff_t>(cfg.n_batches) *
                                     cfg.controls_per_batch;
        t.matrix.resize(n, cfg.d_student);
        t.expression.resize(n, cfg.n_genes);
        for (int g = 0; g < cfg.n_genes; ++g) t.gene_names.push_back(gene_name(g));

        auto noise_rng = CounterRng::derive({cfg.seed, 5});
        std::ptrdiff_t row = 0;
        for (int g = 0; g < cfg.n_genes; ++g) {
            const Eigen::VectorXd signal =
                cfg.signal_scale *
                (proj_student.transpose() * latents[static_cast<std::size_t>(g)]);
            const Eigen::VectorXd expr =
                readout.transpose() * latents[static_cast<std::size_t>(g)];
            for (int r = 0; r < cfg.replicates_student; ++r) {
                const int batch = (g * cfg.replicates_student + r) % cfg.n_batches;
                SampleMeta m;
                m.sample_id = "s_g" + std::to_string(g) + "_r" + std::to_string(r);
                m.modality = Modality::student;
                m.batch_id = "sb" + std::to_string(batch);
                m.perturbation_id = gene_name(g);
                m.concentration = "c1";
                m.cell_line = "CL1";
                t.meta.push_back(std::move(m));
                t.matrix.row(row) =
                    (signal + batch_offsets[static_cast<std::size_t>(batch)] +
                     cfg.noise_student * gaussian_vector(noise_rng, cfg.d_student))
                        .transpose();
                t.expression.row(row) =
                    (expr + cfg.expression_noise * gaussian_vector(noise_rng, cfg.n_genes))
                        .transpose();
                ++row;
            }
        }
        for (int batch = 0; batch < cfg.n_batches; ++batch) {
            for (int c = 0; c < cfg.controls_per_batch; ++c) {
                SampleMeta m;
                m.sample_id = "s_ctrl_b" + std::to_string(batch) + "_" + std::to_string(c);
                m.modality = Modality::student;
                m.batch_id = "sb" + std::to_string(batch);
                m.perturbation_id = "control";
                m.concentration = "";
                m.is_control = true;
                m.cell_line = "CL1";
                t.meta.push_back(std::move(m));
                t.matrix.row(row) =
                    (batch_offsets[static_cast<std::size_t>(batch)] +
                     cfg.noise_student * gaussian_vector(noise_rng, cfg.d_student))
                        .transpose();
                t.expression.row(row) =
                    (cfg.expression_noise * gaussian_vector(noise_rng, cfg.n_genes))
                        .transpose();
                ++row;
            }
        }
    }

    // teacher table, no batch offsets
    {
        EmbeddingTable& t = out.teacher;
        t.dim = cfg.d_teacher;
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(cfg.n_genes) *
                                     cfg.replicates_teacher +
                                 static_cast<std::ptrdiff_t>(cfg.n_batches) *
                                     cfg.controls_per_batch;
        t.matrix.resize(n, cfg.d_teacher);

        auto noise_rng = CounterRng::derive({cfg.seed, 6});
        std::ptrdiff_t row = 0;
        for (int g = 0; g < cfg.n_genes; ++g) {
            const Eigen::VectorXd signal =
                cfg.signal_scale *
                (proj_teacher.transpose() *
                 latents[static_cast<std::size_t>(g)].head(L_shared));
            for (int r = 0; r < cfg.replicates_teacher; ++r) {
                const int batch = (g * cfg.replicates_teacher + r) % cfg.n_batches;
                SampleMeta m;
                m.sample_id = "t_g" + std::to_string(g) + "_r" + std::to_string(r);
                m.modality = Modality::teacher;
                m.batch_id = "tb" + std::to_string(batch);
                m.perturbation_id = gene_name(g);
                m.concentration = "c1";
                m.cell_line = "CL1";
                t.meta.push_back(std::move(m));
                t.matrix.row(row) =
                    (signal + cfg.noise_teacher * gaussian_vector(noise_rng, cfg.d_teacher))
                        .transpose();
                ++row;
            }
        }
        for (int batch = 0; batch < cfg.n_batches; ++batch) {
            for (int c = 0; c < cfg.controls_per_batch; ++c) {
                SampleMeta m;
                m.sample_id = "t_ctrl_b" + std::to_string(batch) + "_" + std::to_string(c);
                m.modality = Modality::teacher;
                m.batch_id = "tb" + std::to_string(batch);
                m.perturbation_id = "control";
                m.concentration = "";
                m.is_control = true;
                m.cell_line = "CL1";
                t.meta.push_back(std::move(m));
                t.matrix.row(row) =
                    (cfg.noise_teacher * gaussian_vector(noise_rng, cfg.d_teacher))
                        .transpose();
                ++row;
            }
        }
    }

    out.truth.name = "planted";
    for (const auto& [a, b] : cfg.planted_edges) {
        out.truth.edges.insert(make_pair_canonical(gene_name(a), gene_name(b)));
    }

    validate_table(out.student);
    validate_table(out.teacher);
    return out;
}

}  // namespace txmorph
