#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "oracles.hpp"
#include "txmorph/correction.hpp"
#include "txmorph/errors.hpp"
#include "txmorph/eval.hpp"
#include "txmorph/rng.hpp"

using namespace txmorph;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(std::ptrdiff_t rows, std::ptrdiff_t cols, std::uint64_t seed) {
    CounterRng rng(seed);
    MatrixXd X(rows, cols);
    for (std::ptrdiff_t r = 0; r < rows; ++r)
        for (std::ptrdiff_t c = 0; c < cols; ++c) X(r, c) = rng.normal();
    return X;
}

std::map<std::string, VectorXd> random_gene_vectors(int n, int dim, std::uint64_t seed) {
    CounterRng rng(seed);
    std::map<std::string, VectorXd> out;
    for (int g = 0; g < n; ++g) {
        VectorXd v(dim);
        for (int k = 0; k < dim; ++k) v(k) = rng.normal();
        char name[16];
        std::snprintf(name, sizeof(name), "g%03d", g);
        out[name] = v;
    }
    return out;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("txmorph_eval_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("relationship TSV parses into per-source databases") {
    TempDir tmp;
    const auto p = tmp.path / "db.tsv";
    {
        std::ofstream out(p);
        out << "gA\tgB\tdb1\n"
               "gC\tgA\tdb2\n"
               "gB\tgA\tdb1\n"   // duplicate after canonicalization
               "gX\tgX\tdb1\n"   // self edge, dropped
               "gD\tgE\tdb1\n";
    }
    const auto dbs = load_relationship_dbs(p.string());
    REQUIRE(dbs.size() == 2);
    CHECK(dbs[0].name == "db1");
    CHECK(dbs[1].name == "db2");
    CHECK(dbs[0].edges == std::set<GenePair>{{"gA", "gB"}, {"gD", "gE"}});
    CHECK(dbs[1].edges == std::set<GenePair>{{"gA", "gC"}});
}

TEST_CASE("aggregation means replicates and skips controls") {
    std::vector<SampleMeta> meta(5);
    MatrixXd X(5, 2);
    // two controls spanning the plane so TVN is well posed
    meta[0].sample_id = "c0"; meta[0].is_control = true; meta[0].batch_id = "b";
    meta[1].sample_id = "c1"; meta[1].is_control = true; meta[1].batch_id = "b";
    meta[2] = meta[3] = meta[4] = SampleMeta{};
    meta[2].sample_id = "r0"; meta[2].perturbation_id = "gA"; meta[2].batch_id = "b";
    meta[3].sample_id = "r1"; meta[3].perturbation_id = "gA"; meta[3].batch_id = "b";
    meta[4].sample_id = "r2"; meta[4].perturbation_id = "gB"; meta[4].batch_id = "b";
    X << 0, 0,
         2, 2,
         1, 3,
         3, 1,
         5, 5;
    const auto agg = aggregate_perturbation_embeddings(X, meta, /*apply_tvn=*/false);
    REQUIRE(agg.vectors.size() == 2);
    CHECK(agg.vectors.at("gA")(0) == doctest::Approx(2.0));
    CHECK(agg.vectors.at("gA")(1) == doctest::Approx(2.0));
    CHECK(agg.vectors.at("gB")(0) == doctest::Approx(5.0));
}

TEST_CASE("aggregation TVN whitens with the control statistics") {
    const int n_ctrl = 50, n_rep = 3;
    std::vector<SampleMeta> meta;
    MatrixXd X(n_ctrl + n_rep, 3);
    CounterRng rng(7);
    for (int i = 0; i < n_ctrl + n_rep; ++i) {
        SampleMeta m;
        m.sample_id = "s" + std::to_string(i);
        m.batch_id = "b";
        m.is_control = i < n_ctrl;
        m.perturbation_id = m.is_control ? "control" : "gA";
        meta.push_back(m);
        for (int k = 0; k < 3; ++k) X(i, k) = rng.normal() * (k + 1) + k;
    }
    const auto agg = aggregate_perturbation_embeddings(X, meta, true);

    MatrixXd controls = X.topRows(n_ctrl);
    const auto tvn = fit_tvn(controls);
    const MatrixXd W = apply_step(tvn, X);
    VectorXd expected = VectorXd::Zero(3);
    for (int i = n_ctrl; i < n_ctrl + n_rep; ++i) expected += W.row(i).transpose();
    expected /= n_rep;
    CHECK((agg.vectors.at("gA") - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("near-zero aggregates are flagged") {
    std::vector<SampleMeta> meta(4);
    MatrixXd X(4, 2);
    meta[0].sample_id = "c0"; meta[0].is_control = true;
    meta[1].sample_id = "c1"; meta[1].is_control = true;
    meta[2].sample_id = "r0"; meta[2].perturbation_id = "gZ";
    meta[3].sample_id = "r1"; meta[3].perturbation_id = "gZ";
    X << 1, 0, -1, 0, 1, 1, -1, -1;  // gZ replicates cancel exactly
    const auto agg = aggregate_perturbation_embeddings(X, meta, false);
    CHECK(agg.zero_aggregates == std::vector<std::string>{"gZ"});
}

TEST_CASE("retrieval matches the brute-force oracle") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const auto genes = random_gene_vectors(25, 6, seed);
        for (double pct : {1.0, 5.0, 20.0}) {
            for (auto mode :
                 {RetrievalMode::top, RetrievalMode::bottom, RetrievalMode::both}) {
                const auto got = retrieve_relationships(genes, pct, mode);
                const auto want = testing::brute_force_retrieve(genes, pct, mode);
                CHECK(got.pairs == want);
            }
        }
    }
}

TEST_CASE("retrieval set size is ceil(pct/100 * n_pairs) per tail") {
    const auto genes = random_gene_vectors(10, 4, 31);  // 45 pairs
    const auto top = retrieve_relationships(genes, 5.0, RetrievalMode::top);
    CHECK(top.pairs.size() == 3);  // ceil(2.25)
    const auto both = retrieve_relationships(genes, 5.0, RetrievalMode::both);
    CHECK(both.pairs.size() <= 6);
    CHECK(both.pairs.size() >= 3);
}

TEST_CASE("exact similarity ties break by canonical pair order") {
    // four copies of the same vector: all 6 pairs tie at similarity 1
    std::map<std::string, VectorXd> genes;
    VectorXd v(3);
    v << 1, 2, 3;
    for (const char* name : {"gA", "gB", "gC", "gD"}) genes[name] = v;
    const auto got = retrieve_relationships(genes, 34.0, RetrievalMode::top);
    // ceil(0.34 * 6) = 3 -> first three pairs in canonical order
    CHECK(got.pairs ==
          std::set<GenePair>{{"gA", "gB"}, {"gA", "gC"}, {"gA", "gD"}});
}

TEST_CASE("recall restricts denominators to the gene universe") {
    std::vector<RelationshipDb> dbs(2);
    dbs[0].name = "db1";
    dbs[0].edges = {{"gA", "gB"}, {"gC", "gD"}, {"gE", "gZ"}};  // gZ outside
    dbs[1].name = "db2";
    dbs[1].edges = {{"gQ", "gR"}};  // entirely outside
    const std::set<std::string> universe{"gA", "gB", "gC", "gD", "gE"};
    const std::set<GenePair> retrieved{{"gA", "gB"}, {"gE", "gZ"}};
    const auto r = known_relationship_recall(retrieved, dbs, universe);
    // db1 in-universe edges: {gA,gB}, {gC,gD}; hit 1 of 2
    CHECK(r.per_db.at("db1") == doctest::Approx(0.5));
    CHECK(r.empty_dbs == std::vector<std::string>{"db2"});
    CHECK(r.per_db.count("db2") == 0);
    CHECK(r.mean == doctest::Approx(0.5));
}

TEST_CASE("perfect retrieval gives recall one") {
    std::vector<RelationshipDb> dbs(1);
    dbs[0].name = "db";
    dbs[0].edges = {{"gA", "gB"}, {"gC", "gD"}};
    const std::set<std::string> universe{"gA", "gB", "gC", "gD"};
    const auto r = known_relationship_recall(dbs[0].edges, dbs, universe);
    CHECK(r.mean == doctest::Approx(1.0));
}

namespace {

std::vector<SampleMeta> batch_meta(const std::vector<std::pair<std::string, bool>>& spec) {
    std::vector<SampleMeta> meta;
    int i = 0;
    for (const auto& [batch, is_control] : spec) {
        SampleMeta m;
        m.sample_id = "s" + std::to_string(i++);
        m.batch_id = batch;
        m.is_control = is_control;
        m.perturbation_id = is_control ? "control" : m.sample_id;
        meta.push_back(m);
    }
    return meta;
}

}  // namespace

TEST_CASE("identical matrices give structural integrity one") {
    const auto meta = batch_meta({{"b1", true}, {"b1", true}, {"b1", false},
                                  {"b2", true}, {"b2", true}, {"b2", false}});
    const MatrixXd X = random_matrix(6, 3, 41);
    CHECK(structural_integrity(X, X, meta) == doctest::Approx(1.0));
}

TEST_CASE("structural integrity matches the hand formula") {
    const auto meta = batch_meta({{"b1", true}, {"b1", true}, {"b1", false}});
    const MatrixXd P = random_matrix(3, 2, 42);
    const MatrixXd A = random_matrix(3, 2, 43);
    auto centered = [&](const MatrixXd& M) {
        Eigen::RowVectorXd mu = (M.row(0) + M.row(1)) / 2.0;  // control mean
        return MatrixXd(M.rowwise() - mu);
    };
    const MatrixXd Pc = centered(P), Ac = centered(A);
    const double num = (Pc - Ac).norm();
    const double den = Pc.norm() + Ac.norm();
    const double expected = std::clamp(1.0 - num / den, 0.0, 1.0);
    CHECK(structural_integrity(P, A, meta) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("a batch without controls is an error") {
    const auto meta = batch_meta({{"b1", true}, {"b1", true}, {"b2", false}});
    const MatrixXd X = random_matrix(3, 2, 44);
    CHECK_THROWS_WITH_AS(structural_integrity(X, X, meta),
                         doctest::Contains("EmptyControls"), Error);
}

TEST_CASE("spearman on hand-checked vectors") {
    VectorXd a(3), b(3);
    a << 1, 2, 3;
    b << 1, 3, 2;
    CHECK(spearman_rank_corr(a, a) == doctest::Approx(1.0));
    VectorXd rev(3);
    rev << 3, 2, 1;
    CHECK(spearman_rank_corr(a, rev) == doctest::Approx(-1.0));
    CHECK(spearman_rank_corr(a, b) == doctest::Approx(0.5));
}

TEST_CASE("spearman handles ties by average rank") {
    VectorXd a(4), b(4);
    a << 1, 2, 2, 3;   // ranks 1, 2.5, 2.5, 4
    b << 10, 20, 30, 40;
    // Pearson on ranks (1,2.5,2.5,4) vs (1,2,3,4)
    const double got = spearman_rank_corr(a, b);
    const VectorXd ra = (VectorXd(4) << 1, 2.5, 2.5, 4).finished();
    const VectorXd rb = (VectorXd(4) << 1, 2, 3, 4).finished();
    const VectorXd da = ra.array() - ra.mean();
    const VectorXd db = rb.array() - rb.mean();
    const double expected = da.dot(db) / std::sqrt(da.squaredNorm() * db.squaredNorm());
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    VectorXd constant = VectorXd::Constant(4, 2.0);
    CHECK(spearman_rank_corr(constant, b) == doctest::Approx(0.0));
}

TEST_CASE("spearman is invariant to monotone transforms") {
    CounterRng rng(55);
    VectorXd a(30), b(30);
    for (int i = 0; i < 30; ++i) {
        a(i) = rng.normal();
        b(i) = rng.normal();
    }
    const double base = spearman_rank_corr(a, b);
    const VectorXd a3 = a.array().exp();  // strictly increasing transform
    CHECK(spearman_rank_corr(a3, b) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("ridge decoder recovers a noiseless linear map") {
    const MatrixXd L = random_matrix(80, 4, 60);
    const MatrixXd W = random_matrix(4, 6, 61);
    const MatrixXd E = L * W;  // exactly linear, zero intercept
    std::vector<std::ptrdiff_t> train, test;
    for (std::ptrdiff_t i = 0; i < 60; ++i) train.push_back(i);
    for (std::ptrdiff_t i = 60; i < 80; ++i) test.push_back(i);
    const double rho = spearman_reconstruction(L, E, train, test, 1e-8);
    CHECK(rho > 0.999);
}

TEST_CASE("ridge decoder on noise gives near-zero correlation") {
    const MatrixXd L = random_matrix(120, 4, 62);
    const MatrixXd E = random_matrix(120, 30, 63);  // independent of L
    std::vector<std::ptrdiff_t> train, test;
    for (std::ptrdiff_t i = 0; i < 80; ++i) train.push_back(i);
    for (std::ptrdiff_t i = 80; i < 120; ++i) test.push_back(i);
    const double rho = spearman_reconstruction(L, E, train, test);
    CHECK(std::abs(rho) < 0.25);
}

TEST_CASE("overlapping train and test rows are rejected") {
    const MatrixXd L = random_matrix(10, 3, 64);
    const MatrixXd E = random_matrix(10, 5, 65);
    CHECK_THROWS_WITH_AS(spearman_reconstruction(L, E, {0, 1, 2}, {2, 3}),
                         doctest::Contains("DisjointnessViolation"), Error);
}

TEST_CASE("ridge fit shapes and intercept behave") {
    const MatrixXd L = random_matrix(50, 3, 66);
    MatrixXd E = random_matrix(50, 4, 67);
    E.array() += 10.0;  // constant offset the intercept must absorb
    std::vector<std::ptrdiff_t> rows;
    for (std::ptrdiff_t i = 0; i < 50; ++i) rows.push_back(i);
    const MatrixXd C = fit_ridge_decoder(L, E, rows, 1e-6);
    CHECK(C.rows() == 4);  // 3 latent dims + intercept
    CHECK(C.cols() == 4);
    const MatrixXd P = ridge_predict(C, L, rows);
    CHECK(P.rows() == 50);
    CHECK((P - E).cwiseAbs().mean() < 2.0);  // offset absorbed, residual bounded
}

TEST_CASE("two-set overlap report enumerates all regions") {
    std::set<GenePair> A{{"a", "b"}, {"c", "d"}, {"e", "f"}};
    std::set<GenePair> B{{"c", "d"}, {"g", "h"}};
    const auto regions = compare_retrieval_sets({{"A", A}, {"B", B}});
    REQUIRE(regions.size() == 3);  // A-only, B-only, A&B
    std::map<std::string, std::set<GenePair>> by_key;
    for (const auto& r : regions) {
        std::string key;
        for (const auto& s : r.in_sets) key += s;
        by_key[key] = r.pairs;
    }
    CHECK(by_key.at("A") == std::set<GenePair>{{"a", "b"}, {"e", "f"}});
    CHECK(by_key.at("B") == std::set<GenePair>{{"g", "h"}});
    CHECK(by_key.at("AB") == std::set<GenePair>{{"c", "d"}});
}

TEST_CASE("three-set overlap covers every pair exactly once") {
    CounterRng rng(70);
    auto random_set = [&](int n) {
        std::set<GenePair> s;
        while (static_cast<int>(s.size()) < n) {
            const auto a = "g" + std::to_string(rng.uniform_below(12));
            const auto b = "g" + std::to_string(rng.uniform_below(12));
            if (a != b) s.insert(make_pair_canonical(a, b));
        }
        return s;
    };
    const auto A = random_set(10), B = random_set(10), C = random_set(10);
    const auto regions = compare_retrieval_sets({{"A", A}, {"B", B}, {"C", C}});
    std::set<GenePair> uni;
    std::size_t total = 0;
    for (const auto& r : regions) {
        total += r.pairs.size();
        uni.insert(r.pairs.begin(), r.pairs.end());
    }
    std::set<GenePair> expected = A;
    expected.insert(B.begin(), B.end());
    expected.insert(C.begin(), C.end());
    CHECK(uni == expected);
    CHECK(total == expected.size());  // regions are disjoint
}

TEST_CASE("set-count bounds are enforced") {
    std::set<GenePair> A{{"a", "b"}};
    CHECK_THROWS_WITH_AS(compare_retrieval_sets({{"A", A}}),
                         doctest::Contains("TooFewSets"), Error);
    CHECK_THROWS_AS(
        compare_retrieval_sets({{"A", A}, {"B", A}, {"C", A}, {"D", A}}), Error);
}
