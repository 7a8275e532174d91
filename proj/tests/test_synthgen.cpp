#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "txmorph/errors.hpp"
#include "txmorph/synthgen.hpp"

using namespace txmorph;

namespace {

SynthConfig small_config() {
    SynthConfig cfg;
    cfg.n_genes = 20;
    cfg.replicates_student = 3;
    cfg.replicates_teacher = 2;
    cfg.d_student = 10;
    cfg.d_teacher = 12;
    cfg.n_latent = 8;
    cfg.n_batches = 3;
    cfg.controls_per_batch = 4;
    cfg.planted_edges = default_planted_edges(cfg.n_genes, 4);
    cfg.seed = 9;
    return cfg;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
    const auto cfg = small_config();
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    CHECK((a.student.matrix - b.student.matrix).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.teacher.matrix - b.teacher.matrix).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.student.expression - b.student.expression).cwiseAbs().maxCoeff() == 0.0);
    auto cfg2 = cfg;
    cfg2.seed = 10;
    const auto c = generate(cfg2);
    CHECK((a.student.matrix - c.student.matrix).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("tables have the configured shapes and counts") {
    const auto cfg = small_config();
    const auto ds = generate(cfg);
    const int n_student = cfg.n_genes * cfg.replicates_student +
                          cfg.n_batches * cfg.controls_per_batch;
    const int n_teacher = cfg.n_genes * cfg.replicates_teacher +
                          cfg.n_batches * cfg.controls_per_batch;
    CHECK(ds.student.n_samples() == n_student);
    CHECK(ds.student.dim == cfg.d_student);
    CHECK(ds.teacher.n_samples() == n_teacher);
    CHECK(ds.teacher.dim == cfg.d_teacher);
    CHECK(ds.student.expression.rows() == n_student);
    CHECK(ds.student.expression.cols() == cfg.n_genes);
    CHECK(ds.student.gene_names.size() == static_cast<std::size_t>(cfg.n_genes));
    CHECK(!ds.teacher.has_expression());
}

TEST_CASE("every batch has the configured controls") {
    const auto ds = generate(small_config());
    for (const auto* table : {&ds.student, &ds.teacher}) {
        const auto by_batch = table->controls_by_batch();
        CHECK(by_batch.size() == 3);
        for (const auto& [batch, rows] : by_batch) CHECK(rows.size() == 4);
    }
}

TEST_CASE("each perturbation appears with both modalities and a shared key") {
    const auto cfg = small_config();
    const auto ds = generate(cfg);
    std::set<std::string> student_perts, teacher_perts;
    for (const auto& m : ds.student.meta)
        if (!m.is_control) student_perts.insert(m.perturbation_id + "|" + m.concentration);
    for (const auto& m : ds.teacher.meta)
        if (!m.is_control) teacher_perts.insert(m.perturbation_id + "|" + m.concentration);
    CHECK(student_perts == teacher_perts);
    CHECK(student_perts.size() == static_cast<std::size_t>(cfg.n_genes));
    // pairing works out of the box
    const auto index = build_pairing_index(ds.student, ds.teacher);
    CHECK(index.pairs.size() ==
          static_cast<std::size_t>(cfg.n_genes * cfg.replicates_student));
    CHECK(index.unpaired_students.empty());
}

TEST_CASE("planted edges are reflected in the truth database") {
    const auto cfg = small_config();
    const auto ds = generate(cfg);
    CHECK(ds.truth.edges.size() == cfg.planted_edges.size());
    CHECK(ds.truth.edges.count({"gene_0", "gene_1"}) == 1);
}

TEST_CASE("planted pairs are more aligned in expression space than random pairs") {
    auto cfg = small_config();
    cfg.expression_noise = 0.0;
    const auto ds = generate(cfg);
    // mean expression per gene (clean readout of the latent)
    std::map<std::string, Eigen::VectorXd> mean_expr;
    std::map<std::string, int> counts;
    for (std::ptrdiff_t r = 0; r < ds.student.n_samples(); ++r) {
        const auto& m = ds.student.meta[static_cast<std::size_t>(r)];
        if (m.is_control) continue;
        auto it = mean_expr.find(m.perturbation_id);
        if (it == mean_expr.end()) {
            mean_expr[m.perturbation_id] = ds.student.expression.row(r).transpose();
        } else {
            it->second += ds.student.expression.row(r).transpose();
        }
        counts[m.perturbation_id]++;
    }
    for (auto& [g, v] : mean_expr) v /= counts[g];
    auto cosine = [&](const std::string& a, const std::string& b) {
        const auto& u = mean_expr.at(a);
        const auto& v = mean_expr.at(b);
        return u.dot(v) / (u.norm() * v.norm());
    };
    double planted_mean = 0.0;
    for (const auto& [a, b] : ds.truth.edges) planted_mean += cosine(a, b);
    planted_mean /= static_cast<double>(ds.truth.edges.size());
    double other_mean = 0.0;
    int n_other = 0;
    for (int g = 8; g + 1 < cfg.n_genes; g += 2) {  // genes beyond the planted block
        other_mean += cosine("gene_" + std::to_string(g), "gene_" + std::to_string(g + 1));
        ++n_other;
    }
    other_mean /= n_other;
    CHECK(planted_mean > 0.7);
    CHECK(planted_mean > other_mean + 0.3);
}

TEST_CASE("student batches carry an additive offset, teacher batches do not") {
    auto cfg = small_config();
    cfg.noise_student = 0.01;
    cfg.noise_teacher = 0.01;
    const auto ds = generate(cfg);
    auto batch_control_mean_spread = [](const EmbeddingTable& t) {
        const auto by_batch = t.controls_by_batch();
        std::vector<Eigen::VectorXd> means;
        for (const auto& [batch, rows] : by_batch) {
            Eigen::VectorXd mu = Eigen::VectorXd::Zero(t.dim);
            for (auto r : rows) mu += t.matrix.row(r).transpose();
            means.push_back(mu / static_cast<double>(rows.size()));
        }
        double spread = 0.0;
        for (std::size_t i = 0; i < means.size(); ++i)
            for (std::size_t j = i + 1; j < means.size(); ++j)
                spread = std::max(spread, (means[i] - means[j]).norm());
        return spread;
    };
    CHECK(batch_control_mean_spread(ds.student) > 1.0);   // offsets scale 2.0
    CHECK(batch_control_mean_spread(ds.teacher) < 0.5);   // noise only
}

TEST_CASE("default edge list is disjoint and validated") {
    const auto edges = default_planted_edges(10, 5);
    std::set<int> used;
    for (const auto& [a, b] : edges) {
        CHECK(used.insert(a).second);
        CHECK(used.insert(b).second);
    }
    CHECK_THROWS_AS(default_planted_edges(10, 6), Error);
}

TEST_CASE("invalid configs are rejected") {
    auto cfg = small_config();
    cfg.controls_per_batch = 1;
    CHECK_THROWS_AS(generate(cfg), Error);
    cfg = small_config();
    cfg.planted_edges = {{0, 0}};
    CHECK_THROWS_AS(generate(cfg), Error);
    cfg = small_config();
    cfg.shared_fraction = 1.5;
    CHECK_THROWS_AS(generate(cfg), Error);
}
