#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "txmorph/dataset.hpp"
#include "txmorph/eval.hpp"

namespace txmorph {

struct SynthConfig {
    int n_genes = 200;
    int replicates_student = 4;
    int replicates_teacher = 4;
    int d_student = 32;
    int d_teacher = 48;
    int n_latent = 32;
    int n_batches = 8;
    int controls_per_batch = 8;
    double signal_scale = 1.0;
    double batch_effect_scale = 2.0;
    double noise_student = 0.3;
    double noise_teacher = 0.1;
    double expression_noise = 0.1;
    double shared_fraction = 0.8;
    std::vector<std::pair<int, int>> planted_edges;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthDataset {
    EmbeddingTable student;  // carries the expression matrix
    EmbeddingTable teacher;
    RelationshipDb truth;
};

/// Deterministic generator of a weakly paired dataset with planted gene-gene
/// relationships (shared latent directions), additive per-batch offsets on
/// the student side, and per-modality noise.
SynthDataset generate(const SynthConfig& cfg);

/// Evenly spread edge list (i, i + n/2) style pairing over distinct genes,
/// handy for fixtures.
std::vector<std::pair<int, int>> default_planted_edges(int n_genes, int n_edges);

}  // namespace txmorph
