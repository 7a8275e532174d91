#include "txmorph/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "txmorph/correction.hpp"
#include "txmorph/errors.hpp"

namespace txmorph {

std::vector<RelationshipDb> load_relationship_dbs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("FileNotFound", path);
    std::vector<RelationshipDb> dbs;
    std::map<std::string, std::size_t> index_of;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b, source;
        if (!std::getline(ss, a, '\t') || !std::getline(ss, b, '\t') ||
            !std::getline(ss, source, '\t')) {
            throw validation_error("MissingColumn",
                                   path + " line " + std::to_string(lineno) +
                                       ": expected gene_a<TAB>gene_b<TAB>source_db");
        }
        if (!source.empty() && source.back() == '\r') source.pop_back();
        if (a == b) continue;
        auto [it, inserted] = index_of.try_emplace(source, dbs.size());
        if (inserted) dbs.push_back({source, {}});
        dbs[it->second].edges.insert(make_pair_canonical(a, b));
    }
    return dbs;
}

void save_relationship_db(const RelationshipDb& db, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("FileWriteFailed", path);
    for (const auto& [a, b] : db.edges) {
        out << a << '\t' << b << '\t' << db.name << "\n";
    }
}

AggregatedMap aggregate_perturbation_embeddings(const Eigen::MatrixXd& matrix,
                                                const std::vector<SampleMeta>& meta,
                                                bool apply_tvn) {
    if (matrix.rows() != static_cast<std::ptrdiff_t>(meta.size())) {
        throw validation_error("ShapeMismatch", "matrix rows != meta length");
    }
    Eigen::MatrixXd data = matrix;
    if (apply_tvn) {
        std::vector<std::ptrdiff_t> ctrl;
        for (std::ptrdiff_t i = 0; i < matrix.rows(); ++i) {
            if (meta[static_cast<std::size_t>(i)].is_control) ctrl.push_back(i);
        }
        if (ctrl.empty()) {
            throw validation_error("EmptyControls", "evaluation TVN needs control rows");
        }
        Eigen::MatrixXd controls(ctrl.size(), matrix.cols());
        for (std::size_t i = 0; i < ctrl.size(); ++i) {
            controls.row(static_cast<std::ptrdiff_t>(i)) = matrix.row(ctrl[i]);
        }
        data = apply_step(fit_tvn(controls), matrix);
    }

    std::map<std::string, Eigen::VectorXd> sums;
    std::map<std::string, int> counts;
    for (std::ptrdiff_t i = 0; i < data.rows(); ++i) {
        const auto& m = meta[static_cast<std::size_t>(i)];
        if (m.is_control) continue;
        auto [it, inserted] = sums.try_emplace(m.perturbation_id,
                                               Eigen::VectorXd::Zero(data.cols()));
        it->second += data.row(i).transpose();
        counts[m.perturbation_id] += 1;
    }
    if (sums.empty()) {
        throw validation_error("NoPerturbedSamples", "no non-control samples to aggregate");
    }
    AggregatedMap out;
    for (auto& [gene, sum] : sums) {
        Eigen::VectorXd mean = sum / static_cast<double>(counts[gene]);
        if (mean.norm() < 1e-12) out.zero_aggregates.push_back(gene);
        out.vectors.emplace(gene, std::move(mean));
    }
    return out;
}

RetrievedSet retrieve_relationships(const std::map<std::string, Eigen::VectorXd>& gene_vectors,
                                    double threshold_pct, RetrievalMode mode) {
    if (gene_vectors.size() < 2) {
        throw validation_error("TooFewGenes", "need >= 2 genes");
    }
    if (threshold_pct <= 0.0 || threshold_pct > 50.0) {
        throw validation_error("ConfigInvalid", "threshold_pct must be in (0, 50]");
    }
    std::vector<const std::string*> names;
    std::vector<Eigen::VectorXd> normed;
    names.reserve(gene_vectors.size());
    for (const auto& [name, v] : gene_vectors) {
        names.push_back(&name);
        const double n = v.norm();
        normed.push_back(n > 0.0 ? Eigen::VectorXd(v / n)
                                 : Eigen::VectorXd(Eigen::VectorXd::Zero(v.size())));
    }

    struct Scored {
        double sim;
        std::size_t i, j;  // indices into names (map order = canonical order)
    };
    std::vector<Scored> scored;
    scored.reserve(names.size() * (names.size() - 1) / 2);
    for (std::size_t i = 0; i < names.size(); ++i) {
        for (std::size_t j = i + 1; j < names.size(); ++j) {
            scored.push_back({normed[i].dot(normed[j]), i, j});
        }
    }
    const std::size_t n_pairs = scored.size();
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(threshold_pct * static_cast<double>(n_pairs) / 100.0));

    RetrievedSet out;
    auto take = [&](bool top) {
        std::vector<std::size_t> order(n_pairs);
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                          order.end(), [&](std::size_t a, std::size_t b) {
                              if (scored[a].sim != scored[b].sim) {
                                  return top ? scored[a].sim > scored[b].sim
                                             : scored[a].sim < scored[b].sim;
                              }
                              return a < b;  // canonical pair order
                          });
        for (std::size_t r = 0; r < k; ++r) {
            const Scored& s = scored[order[r]];
            GenePair p = make_pair_canonical(*names[s.i], *names[s.j]);
            out.pairs.insert(p);
            out.similarity[p] = s.sim;
        }
    };
    if (mode == RetrievalMode::top || mode == RetrievalMode::both) take(true);
    if (mode == RetrievalMode::bottom || mode == RetrievalMode::both) take(false);
    return out;
}

RecallResult known_relationship_recall(const std::set<GenePair>& retrieved,
                                       const std::vector<RelationshipDb>& dbs,
                                       const std::set<std::string>& gene_universe) {
    RecallResult out;
    double sum = 0.0;
    int counted = 0;
    for (const auto& db : dbs) {
        std::size_t denom = 0, numer = 0;
        for (const auto& edge : db.edges) {
            if (!gene_universe.count(edge.first) || !gene_universe.count(edge.second)) {
                continue;
            }
            ++denom;
            if (retrieved.count(edge)) ++numer;
        }
        if (denom == 0) {
            out.empty_dbs.push_back(db.name);
            continue;
        }
        const double recall = static_cast<double>(numer) / static_cast<double>(denom);
        out.per_db[db.name] = recall;
        sum += recall;
        ++counted;
    }
    out.mean = counted > 0 ? sum / counted : 0.0;
    return out;
}

double structural_integrity(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& actual,
                            const std::vector<SampleMeta>& meta) {
    if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols()) {
        throw validation_error("ShapeMismatch", "predicted vs actual");
    }
    if (predicted.rows() != static_cast<std::ptrdiff_t>(meta.size())) {
        throw validation_error("ShapeMismatch", "matrix rows != meta length");
    }
    std::map<std::string, std::vector<std::ptrdiff_t>> rows_by_batch;
    for (std::ptrdiff_t i = 0; i < predicted.rows(); ++i) {
        rows_by_batch[meta[static_cast<std::size_t>(i)].batch_id].push_back(i);
    }
    double distance = 0.0;
    double max_distance = 0.0;
    for (const auto& [batch, rows] : rows_by_batch) {
        Eigen::VectorXd pred_ctrl_mean = Eigen::VectorXd::Zero(predicted.cols());
        Eigen::VectorXd act_ctrl_mean = Eigen::VectorXd::Zero(actual.cols());
        int n_ctrl = 0;
        for (std::ptrdiff_t r : rows) {
            if (!meta[static_cast<std::size_t>(r)].is_control) continue;
            pred_ctrl_mean += predicted.row(r).transpose();
            act_ctrl_mean += actual.row(r).transpose();
            ++n_ctrl;
        }
        if (n_ctrl == 0) {
            throw validation_error("EmptyControls", "batch '" + batch + "' has no controls");
        }
        pred_ctrl_mean /= n_ctrl;
        act_ctrl_mean /= n_ctrl;
        Eigen::MatrixXd pc(rows.size(), predicted.cols());
        Eigen::MatrixXd ac(rows.size(), actual.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            pc.row(static_cast<std::ptrdiff_t>(i)) =
                predicted.row(rows[i]) - pred_ctrl_mean.transpose();
            ac.row(static_cast<std::ptrdiff_t>(i)) =
                actual.row(rows[i]) - act_ctrl_mean.transpose();
        }
        distance += (pc - ac).norm();
        max_distance += pc.norm() + ac.norm();
    }
    if (max_distance == 0.0) return 1.0;
    return std::clamp(1.0 - distance / max_distance, 0.0, 1.0);
}

namespace {

Eigen::VectorXd average_ranks(const Eigen::VectorXd& v) {
    const std::ptrdiff_t n = v.size();
    std::vector<std::ptrdiff_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::ptrdiff_t a, std::ptrdiff_t b) { return v(a) < v(b); });
    Eigen::VectorXd ranks(n);
    std::ptrdiff_t i = 0;
    while (i < n) {
        std::ptrdiff_t j = i;
        while (j + 1 < n && v(order[static_cast<std::size_t>(j + 1)]) ==
                                v(order[static_cast<std::size_t>(i)])) {
            ++j;
        }
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
        for (std::ptrdiff_t k = i; k <= j; ++k) {
            ranks(order[static_cast<std::size_t>(k)]) = avg;
        }
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman_rank_corr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw validation_error("ShapeMismatch", "spearman inputs");
    }
    Eigen::VectorXd ra = average_ranks(a);
    Eigen::VectorXd rb = average_ranks(b);
    ra.array() -= ra.mean();
    rb.array() -= rb.mean();
    const double denom = std::sqrt(ra.squaredNorm() * rb.squaredNorm());
    if (denom == 0.0) return 0.0;  // a constant vector has no rank ordering
    return ra.dot(rb) / denom;
}

Eigen::MatrixXd fit_ridge_decoder(const Eigen::MatrixXd& latent,
                                  const Eigen::MatrixXd& actual,
                                  const std::vector<std::ptrdiff_t>& train_rows,
                                  double ridge_lambda) {
    if (latent.rows() != actual.rows()) {
        throw validation_error("ShapeMismatch", "latent rows != actual rows");
    }
    if (train_rows.empty()) {
        throw validation_error("ConfigInvalid", "empty train split");
    }
    const std::ptrdiff_t d = latent.cols();
    // design matrix with intercept column
    Eigen::MatrixXd A(train_rows.size(), d + 1);
    Eigen::MatrixXd Y(train_rows.size(), actual.cols());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
        A.row(static_cast<std::ptrdiff_t>(i)).head(d) = latent.row(train_rows[i]);
        A(static_cast<std::ptrdiff_t>(i), d) = 1.0;
        Y.row(static_cast<std::ptrdiff_t>(i)) = actual.row(train_rows[i]);
    }
    Eigen::MatrixXd gram = A.transpose() * A;
    gram.diagonal().array() += ridge_lambda;
    Eigen::LDLT<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success || (ridge_lambda == 0.0 && !solver.isPositive())) {
        throw numerical_error("SingularSystem", "ridge normal equations");
    }
    return solver.solve(A.transpose() * Y);
}

Eigen::MatrixXd ridge_predict(const Eigen::MatrixXd& coeffs, const Eigen::MatrixXd& latent,
                              const std::vector<std::ptrdiff_t>& rows) {
    const std::ptrdiff_t d = latent.cols();
    if (coeffs.rows() != d + 1) {
        throw validation_error("ShapeMismatch", "decoder coefficients vs latent dim");
    }
    Eigen::MatrixXd out(rows.size(), coeffs.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Eigen::VectorXd x(d + 1);
        x.head(d) = latent.row(rows[i]).transpose();
        x(d) = 1.0;
        out.row(static_cast<std::ptrdiff_t>(i)) = (coeffs.transpose() * x).transpose();
    }
    return out;
}

double spearman_reconstruction(const Eigen::MatrixXd& latent, const Eigen::MatrixXd& actual,
                               const std::vector<std::ptrdiff_t>& train_rows,
                               const std::vector<std::ptrdiff_t>& test_rows,
                               double ridge_lambda) {
    std::unordered_set<std::ptrdiff_t> train_set(train_rows.begin(), train_rows.end());
    for (std::ptrdiff_t r : test_rows) {
        if (train_set.count(r)) {
            throw validation_error("DisjointnessViolation",
                                   "row " + std::to_string(r) + " in both splits");
        }
    }
    if (test_rows.empty()) {
        throw validation_error("ConfigInvalid", "empty test split");
    }
    Eigen::MatrixXd W = fit_ridge_decoder(latent, actual, train_rows, ridge_lambda);
    Eigen::MatrixXd pred = ridge_predict(W, latent, test_rows);
    double sum = 0.0;
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
        sum += spearman_rank_corr(pred.row(static_cast<std::ptrdiff_t>(i)).transpose(),
                                  actual.row(test_rows[i]).transpose());
    }
    return sum / static_cast<double>(test_rows.size());
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["recall_per_db"] = recall_per_db;
    j["recall_mean"] = recall_mean;
    j["structural_integrity"] = structural_integrity;
    j["spearman"] = spearman;
    j["tx_preservation"] = tx_preservation;
    j["n_genes"] = n_genes;
    j["n_pairs_considered"] = n_pairs_considered;
    j["zero_aggregates"] = zero_aggregates;
    j["empty_dbs"] = empty_dbs;
    std::vector<std::vector<std::string>> pairs;
    for (const auto& [a, b] : retrieved_pairs) pairs.push_back({a, b});
    j["n_retrieved_pairs"] = retrieved_pairs.size();
    return j.dump(2);
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "metric,value\n";
    for (const auto& [name, v] : recall_per_db) out << "recall_" << name << ',' << v << "\n";
    out << "recall_mean," << recall_mean << "\n";
    out << "structural_integrity," << structural_integrity << "\n";
    out << "spearman," << spearman << "\n";
    out << "tx_preservation," << tx_preservation << "\n";
    out << "n_genes," << n_genes << "\n";
    out << "n_pairs_considered," << n_pairs_considered << "\n";
    return out.str();
}

std::vector<OverlapRegion> compare_retrieval_sets(
    const std::vector<std::pair<std::string, std::set<GenePair>>>& sets) {
    if (sets.size() < 2) {
        throw validation_error("TooFewSets", "need >= 2 named sets");
    }
    if (sets.size() > 3) {
        throw validation_error("TooManySets", "overlap lattice supports up to 3 sets");
    }
    std::set<GenePair> all;
    for (const auto& [name, s] : sets) all.insert(s.begin(), s.end());

    std::vector<OverlapRegion> regions;
    const std::size_t n = sets.size();
    for (std::size_t mask = 1; mask < (1u << n); ++mask) {
        OverlapRegion region;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                region.in_sets.push_back(sets[i].first);
            } else {
                region.not_in.push_back(sets[i].first);
            }
        }
        for (const auto& p : all) {
            bool keep = true;
            for (std::size_t i = 0; i < n && keep; ++i) {
                const bool member = sets[i].second.count(p) > 0;
                if (((mask >> i) & 1u) != static_cast<unsigned>(member)) keep = false;
            }
            if (keep) region.pairs.insert(p);
        }
        regions.push_back(std::move(region));
    }
    return regions;
}

}  // namespace txmorph
