#pragma once

#include <Eigen/Dense>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "txmorph/dataset.hpp"

namespace txmorph {

/// Unordered gene pair in canonical (min, max) order.
using GenePair = std::pair<std::string, std::string>;

inline GenePair make_pair_canonical(const std::string& a, const std::string& b) {
    return a <= b ? GenePair{a, b} : GenePair{b, a};
}

struct RelationshipDb {
    std::string name;
    std::set<GenePair> edges;
};

/// Parses the edge-list TSV; one db per distinct source_db value, in
/// first-appearance order. Self-edges are dropped.
std::vector<RelationshipDb> load_relationship_dbs(const std::string& path);
void save_relationship_db(const RelationshipDb& db, const std::string& path);

struct AggregatedMap {
    std::map<std::string, Eigen::VectorXd> vectors;  // perturbation_id -> mean embedding
    std::vector<std::string> zero_aggregates;        // flagged near-zero aggregates
};

/// Mean embedding per perturbation after evaluation-time TVN (fitted on the
/// control rows, applied to every row). Controls are excluded from the means.
AggregatedMap aggregate_perturbation_embeddings(const Eigen::MatrixXd& matrix,
                                                const std::vector<SampleMeta>& meta,
                                                bool apply_tvn = true);

enum class RetrievalMode { top, bottom, both };

struct RetrievedSet {
    std::set<GenePair> pairs;
    std::map<GenePair, double> similarity;
};

/// Extreme-cosine-similarity pairs: the highest and/or lowest
/// ceil(pct * n_pairs / 100) pairs per selected tail; ties at the cutoff
/// break by canonical pair order.
RetrievedSet retrieve_relationships(const std::map<std::string, Eigen::VectorXd>& gene_vectors,
                                    double threshold_pct,
                                    RetrievalMode mode = RetrievalMode::both);

struct RecallResult {
    std::map<std::string, double> per_db;
    double mean = 0.0;
    std::vector<std::string> empty_dbs;  // zero in-universe edges, excluded from mean
};

RecallResult known_relationship_recall(const std::set<GenePair>& retrieved,
                                       const std::vector<RelationshipDb>& dbs,
                                       const std::set<std::string>& gene_universe);

/// 1 - (sum of per-batch Frobenius distances between control-centered
/// matrices) / (triangle-inequality maximum), clamped to [0, 1].
double structural_integrity(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& actual,
                            const std::vector<SampleMeta>& meta);

/// Spearman rank correlation with average-rank ties.
double spearman_rank_corr(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Closed-form ridge fit of latent -> expression on the given rows.
/// Returns (d+1) x G coefficients; the last row is the intercept.
Eigen::MatrixXd fit_ridge_decoder(const Eigen::MatrixXd& latent,
                                  const Eigen::MatrixXd& actual,
                                  const std::vector<std::ptrdiff_t>& train_rows,
                                  double ridge_lambda = 1e-3);

Eigen::MatrixXd ridge_predict(const Eigen::MatrixXd& coeffs, const Eigen::MatrixXd& latent,
                              const std::vector<std::ptrdiff_t>& rows);

/// Ridge decoder (closed form, lambda = 1e-3 by default) fitted latent ->
/// expression on the train rows; returns the mean per-sample Spearman
/// correlation across genes on the test rows.
double spearman_reconstruction(const Eigen::MatrixXd& latent, const Eigen::MatrixXd& actual,
                               const std::vector<std::ptrdiff_t>& train_rows,
                               const std::vector<std::ptrdiff_t>& test_rows,
                               double ridge_lambda = 1e-3);

inline double interpretability_score(double structural, double spearman) {
    return 0.5 * (structural + spearman);
}

struct EvalReport {
    std::map<std::string, double> recall_per_db;
    double recall_mean = 0.0;
    double structural_integrity = 0.0;
    double spearman = 0.0;
    double tx_preservation = 0.0;
    std::set<GenePair> retrieved_pairs;
    std::size_t n_genes = 0;
    std::size_t n_pairs_considered = 0;
    std::vector<std::string> zero_aggregates;
    std::vector<std::string> empty_dbs;

    std::string to_json() const;
    std::string to_csv() const;  // one row per metric
};

struct OverlapRegion {
    std::vector<std::string> in_sets;  // region = intersection of these,
    std::vector<std::string> not_in;   // minus the union of these
    std::set<GenePair> pairs;
};

/// Inclusion-exclusion lattice over 2 or 3 named pair sets.
std::vector<OverlapRegion> compare_retrieval_sets(
    const std::vector<std::pair<std::string, std::set<GenePair>>>& sets);

}  // namespace txmorph
