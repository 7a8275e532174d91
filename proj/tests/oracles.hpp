// Test-only reference implementations, independent of the library paths
// they are used to check.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "txmorph/eval.hpp"

namespace txmorph::testing {

/// Brute-force extreme-pair retrieval: materializes every pair similarity
/// with a plain loop and fully sorts. Tie rule: canonical pair order.
inline std::set<GenePair> brute_force_retrieve(
    const std::map<std::string, Eigen::VectorXd>& gene_vectors, double threshold_pct,
    RetrievalMode mode) {
    struct Entry {
        std::string a, b;
        double sim;
    };
    std::vector<Entry> entries;
    for (auto it = gene_vectors.begin(); it != gene_vectors.end(); ++it) {
        for (auto jt = std::next(it); jt != gene_vectors.end(); ++jt) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (Eigen::Index k = 0; k < it->second.size(); ++k) {
                dot += it->second(k) * jt->second(k);
                na += it->second(k) * it->second(k);
                nb += jt->second(k) * jt->second(k);
            }
            const double denom = std::sqrt(na) * std::sqrt(nb);
            entries.push_back({it->first, jt->first, denom > 0.0 ? dot / denom : 0.0});
        }
    }
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(threshold_pct * static_cast<double>(entries.size()) / 100.0));
    auto canonical_less = [](const Entry& x, const Entry& y) {
        return std::tie(x.a, x.b) < std::tie(y.a, y.b);
    };
    std::set<GenePair> out;
    if (mode == RetrievalMode::top || mode == RetrievalMode::both) {
        std::vector<Entry> sorted = entries;
        std::stable_sort(sorted.begin(), sorted.end(), canonical_less);
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const Entry& x, const Entry& y) { return x.sim > y.sim; });
        for (std::size_t i = 0; i < k; ++i) out.emplace(sorted[i].a, sorted[i].b);
    }
    if (mode == RetrievalMode::bottom || mode == RetrievalMode::both) {
        std::vector<Entry> sorted = entries;
        std::stable_sort(sorted.begin(), sorted.end(), canonical_less);
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const Entry& x, const Entry& y) { return x.sim < y.sim; });
        for (std::size_t i = 0; i < k; ++i) out.emplace(sorted[i].a, sorted[i].b);
    }
    return out;
}

/// Central finite difference of a scalar function at x, step h.
template <typename F>
double central_difference(F&& f, double& x, double h = 1e-5) {
    const double saved = x;
    x = saved + h;
    const double up = f();
    x = saved - h;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * h);
}

inline double rel_error(double got, double want) {
    const double denom = std::max({std::abs(got), std::abs(want), 1e-8});
    return std::abs(got - want) / denom;
}

}  // namespace txmorph::testing
