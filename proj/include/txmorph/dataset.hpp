#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace txmorph {

enum class Modality { teacher, student };

struct SampleMeta {
    std::string sample_id;
    Modality modality = Modality::student;
    std::string batch_id;
    std::string perturbation_id;
    std::string concentration;
    bool is_control = false;
    std::string cell_line;
};

/// Immutable after load; embeddings are rows of `matrix`, aligned with `meta`.
struct EmbeddingTable {
    std::vector<SampleMeta> meta;
    Eigen::MatrixXd matrix;  // n_samples x dim
    int dim = 0;

    // optional raw expression profiles, row-aligned with matrix
    Eigen::MatrixXd expression;  // n_samples x n_genes, 0x0 when absent
    std::vector<std::string> gene_names;

    bool has_expression() const { return expression.size() > 0; }
    std::ptrdiff_t n_samples() const { return matrix.rows(); }

    /// Row indices of control samples, in table order.
    std::vector<std::ptrdiff_t> control_rows() const;
    /// Control row indices grouped by batch_id.
    std::map<std::string, std::vector<std::ptrdiff_t>> controls_by_batch() const;
    /// Row index by sample_id.
    std::ptrdiff_t row_of(const std::string& sample_id) const;
};

struct PairingIndex {
    // student sample_id -> candidate teacher sample_ids, key order = student table order
    std::vector<std::pair<std::string, std::vector<std::string>>> pairs;
    std::vector<std::string> unpaired_students;

    bool empty() const { return pairs.empty(); }
};

struct LoadOptions {
    std::string control_label = "control";
    std::string expression_path;  // optional expression CSV, joined on sample_id
};

EmbeddingTable load_embedding_table(const std::string& path,
                                    const LoadOptions& opts = {});

/// Writes the CSV schema read by load_embedding_table. Round-trips bit-exactly.
void save_embedding_table(const EmbeddingTable& table, const std::string& path);
void save_expression_table(const EmbeddingTable& table, const std::string& path);

/// Validates invariants on an in-memory table (used by synthgen and tests).
void validate_table(const EmbeddingTable& table,
                    const std::string& control_label = "control");

PairingIndex build_pairing_index(const EmbeddingTable& student,
                                 const EmbeddingTable& teacher);

/// One (student_id, teacher_id) per paired student, teacher drawn uniformly
/// from the candidate list on a stream keyed by (seed, epoch). Output order
/// is the student table order.
std::vector<std::pair<std::string, std::string>> sample_epoch_pairs(
    const PairingIndex& index, std::uint64_t seed, std::uint64_t epoch);

}  // namespace txmorph
