#include "txmorph/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "txmorph/errors.hpp"
#include "txmorph/rng.hpp"

namespace txmorph {

namespace {

std::vector<std::string> split_csv_line(const std::string& line, char sep = ',') {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) {
            throw validation_error("NonFiniteValue",
                                   "unparseable value '" + s + "' at " + where);
        }
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        throw validation_error("NonFiniteValue",
                               "unparseable value '" + s + "' at " + where);
    }
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<std::ptrdiff_t> EmbeddingTable::control_rows() const {
    std::vector<std::ptrdiff_t> rows;
    for (std::ptrdiff_t i = 0; i < n_samples(); ++i) {
        if (meta[static_cast<std::size_t>(i)].is_control) rows.push_back(i);
    }
    return rows;
}

std::map<std::string, std::vector<std::ptrdiff_t>> EmbeddingTable::controls_by_batch()
    const {
    std::map<std::string, std::vector<std::ptrdiff_t>> out;
    for (std::ptrdiff_t i = 0; i < n_samples(); ++i) {
        const auto& m = meta[static_cast<std::size_t>(i)];
        if (m.is_control) out[m.batch_id].push_back(i);
    }
    return out;
}

std::ptrdiff_t EmbeddingTable::row_of(const std::string& sample_id) const {
    for (std::ptrdiff_t i = 0; i < n_samples(); ++i) {
        if (meta[static_cast<std::size_t>(i)].sample_id == sample_id) return i;
    }
    throw validation_error("UnknownSampleId", sample_id);
}

void validate_table(const EmbeddingTable& table, const std::string& control_label) {
    if (table.matrix.rows() != static_cast<std::ptrdiff_t>(table.meta.size())) {
        throw validation_error("ShapeMismatch", "matrix rows != meta length");
    }
    if (table.matrix.cols() != table.dim) {
        throw validation_error("ShapeMismatch", "matrix cols != dim");
    }
    std::unordered_set<std::string> ids;
    std::unordered_map<std::string, int> batch_controls;
    for (std::size_t i = 0; i < table.meta.size(); ++i) {
        const auto& m = table.meta[i];
        if (!ids.insert(m.sample_id).second) {
            throw validation_error("DuplicateSampleId", m.sample_id);
        }
        const bool label_is_control = m.perturbation_id == control_label;
        if (m.is_control != label_is_control) {
            throw validation_error(
                "ControlLabelMismatch",
                m.sample_id + ": is_control disagrees with perturbation_id '" +
                    m.perturbation_id + "' vs control label '" + control_label + "'");
        }
        batch_controls[m.batch_id] += m.is_control ? 1 : 0;
    }
    for (const auto& [batch, count] : batch_controls) {
        if (count < 2) {
            throw validation_error("BatchWithoutControls", batch);
        }
    }
    for (std::ptrdiff_t r = 0; r < table.matrix.rows(); ++r) {
        for (std::ptrdiff_t c = 0; c < table.matrix.cols(); ++c) {
            if (!std::isfinite(table.matrix(r, c))) {
                throw validation_error(
                    "NonFiniteValue", "embedding row " + std::to_string(r) +
                                          " (sample '" + table.meta[r].sample_id +
                                          "') column e_" + std::to_string(c));
            }
        }
    }
    if (table.has_expression()) {
        if (table.expression.rows() != table.matrix.rows()) {
            throw validation_error("ShapeMismatch",
                                   "expression rows != embedding rows");
        }
        if (static_cast<std::ptrdiff_t>(table.gene_names.size()) !=
            table.expression.cols()) {
            throw validation_error("ShapeMismatch",
                                   "gene_names length != expression cols");
        }
        for (std::ptrdiff_t r = 0; r < table.expression.rows(); ++r) {
            for (std::ptrdiff_t c = 0; c < table.expression.cols(); ++c) {
                if (!std::isfinite(table.expression(r, c))) {
                    throw validation_error(
                        "NonFiniteValue", "expression row " + std::to_string(r) +
                                              " column g_" + table.gene_names[c]);
                }
            }
        }
    }
}

static void join_expression(EmbeddingTable& table, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("FileNotFound", path);
    std::string line;
    if (!std::getline(in, line)) throw validation_error("MissingColumn", "empty file " + path);
    auto header = split_csv_line(line);
    if (header.empty() || header[0] != "sample_id") {
        throw validation_error("MissingColumn", "expression header must start with sample_id");
    }
    std::vector<std::string> genes;
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (header[i].rfind("g_", 0) != 0) {
            throw validation_error("MissingColumn",
                                   "expression column '" + header[i] + "' lacks g_ prefix");
        }
        genes.push_back(header[i].substr(2));
    }
    const std::ptrdiff_t n_genes = static_cast<std::ptrdiff_t>(genes.size());
    std::unordered_map<std::string, std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw validation_error("MissingColumn",
                                   path + " line " + std::to_string(lineno) +
                                       " has wrong field count");
        }
        std::vector<double> vals(genes.size());
        for (std::size_t i = 1; i < fields.size(); ++i) {
            vals[i - 1] = parse_double(fields[i], "sample '" + fields[0] + "' column " +
                                                      header[i]);
        }
        rows[fields[0]] = std::move(vals);
    }
    table.expression.resize(table.n_samples(), n_genes);
    for (std::ptrdiff_t r = 0; r < table.n_samples(); ++r) {
        auto it = rows.find(table.meta[r].sample_id);
        if (it == rows.end()) {
            throw validation_error("MissingExpressionRow", table.meta[r].sample_id);
        }
        for (std::ptrdiff_t c = 0; c < n_genes; ++c) {
            table.expression(r, c) = it->second[static_cast<std::size_t>(c)];
        }
    }
    table.gene_names = std::move(genes);
}

EmbeddingTable load_embedding_table(const std::string& path, const LoadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw io_error("FileNotFound", path);

    std::string line;
    if (!std::getline(in, line)) {
        throw validation_error("MissingColumn", "empty file " + path);
    }
    auto header = split_csv_line(line);
    const std::vector<std::string> fixed = {"sample_id",       "modality",
                                            "batch_id",        "perturbation_id",
                                            "concentration",   "is_control",
                                            "cell_line"};
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        if (i >= header.size() || header[i] != fixed[i]) {
            throw validation_error("MissingColumn", "expected column '" + fixed[i] +
                                                        "' at position " +
                                                        std::to_string(i));
        }
    }
    const int dim = static_cast<int>(header.size() - fixed.size());
    if (dim < 1) throw validation_error("MissingColumn", "no e_* embedding columns");
    for (int j = 0; j < dim; ++j) {
        const std::string want = "e_" + std::to_string(j);
        if (header[fixed.size() + j] != want) {
            throw validation_error("MissingColumn", "expected column '" + want + "'");
        }
    }

    EmbeddingTable table;
    table.dim = dim;
    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw validation_error("MissingColumn",
                                   path + " line " + std::to_string(lineno) +
                                       " has wrong field count");
        }
        SampleMeta m;
        m.sample_id = fields[0];
        if (fields[1] == "teacher") {
            m.modality = Modality::teacher;
        } else if (fields[1] == "student") {
            m.modality = Modality::student;
        } else {
            throw validation_error("MissingColumn",
                                   "unknown modality '" + fields[1] + "' line " +
                                       std::to_string(lineno));
        }
        m.batch_id = fields[2];
        m.perturbation_id = fields[3];
        m.concentration = fields[4];
        if (fields[5] == "1") {
            m.is_control = true;
        } else if (fields[5] == "0") {
            m.is_control = false;
        } else {
            throw validation_error("MissingColumn",
                                   "is_control must be 0 or 1, got '" + fields[5] +
                                       "' line " + std::to_string(lineno));
        }
        m.cell_line = fields[6];
        for (int j = 0; j < dim; ++j) {
            const std::string& cell = fields[fixed.size() + j];
            double v = parse_double(cell, "sample '" + m.sample_id + "' column e_" +
                                              std::to_string(j));
            if (!std::isfinite(v)) {
                throw validation_error("NonFiniteValue",
                                       "sample '" + m.sample_id + "' column e_" +
                                           std::to_string(j));
            }
            values.push_back(v);
        }
        table.meta.push_back(std::move(m));
    }

    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(table.meta.size());
    table.matrix.resize(n, dim);
    for (std::ptrdiff_t r = 0; r < n; ++r) {
        for (int c = 0; c < dim; ++c) {
            table.matrix(r, c) = values[static_cast<std::size_t>(r) * dim + c];
        }
    }

    if (!opts.expression_path.empty()) {
        join_expression(table, opts.expression_path);
    }
    validate_table(table, opts.control_label);
    return table;
}

void save_embedding_table(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("FileWriteFailed", path);
    out << "sample_id,modality,batch_id,perturbation_id,concentration,is_control,cell_line";
    for (int j = 0; j < table.dim; ++j) out << ",e_" << j;
    out << "\n";
    for (std::ptrdiff_t r = 0; r < table.n_samples(); ++r) {
        const auto& m = table.meta[static_cast<std::size_t>(r)];
        out << m.sample_id << ','
            << (m.modality == Modality::teacher ? "teacher" : "student") << ','
            << m.batch_id << ',' << m.perturbation_id << ',' << m.concentration << ','
            << (m.is_control ? 1 : 0) << ',' << m.cell_line;
        for (int c = 0; c < table.dim; ++c) out << ',' << fmt_double(table.matrix(r, c));
        out << "\n";
    }
}

void save_expression_table(const EmbeddingTable& table, const std::string& path) {
    if (!table.has_expression()) {
        throw validation_error("NoExpression", "table has no expression matrix");
    }
    std::ofstream out(path);
    if (!out) throw io_error("FileWriteFailed", path);
    out << "sample_id";
    for (const auto& g : table.gene_names) out << ",g_" << g;
    out << "\n";
    for (std::ptrdiff_t r = 0; r < table.n_samples(); ++r) {
        out << table.meta[static_cast<std::size_t>(r)].sample_id;
        for (std::ptrdiff_t c = 0; c < table.expression.cols(); ++c) {
            out << ',' << fmt_double(table.expression(r, c));
        }
        out << "\n";
    }
}

PairingIndex build_pairing_index(const EmbeddingTable& student,
                                 const EmbeddingTable& teacher) {
    // (perturbation_id, concentration) -> teacher sample_ids, controls excluded
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> by_key;
    for (const auto& m : teacher.meta) {
        if (m.is_control) continue;
        by_key[{m.perturbation_id, m.concentration}].push_back(m.sample_id);
    }
    PairingIndex index;
    for (const auto& m : student.meta) {
        if (m.is_control) continue;
        auto it = by_key.find({m.perturbation_id, m.concentration});
        if (it == by_key.end() || it->second.empty()) {
            index.unpaired_students.push_back(m.sample_id);
        } else {
            index.pairs.emplace_back(m.sample_id, it->second);
        }
    }
    if (index.pairs.empty()) {
        throw validation_error("EmptyPairing", "no student sample has a teacher candidate");
    }
    return index;
}

std::vector<std::pair<std::string, std::string>> sample_epoch_pairs(
    const PairingIndex& index, std::uint64_t seed, std::uint64_t epoch) {
    if (index.empty()) {
        throw validation_error("EmptyPairing", "pairing index is empty");
    }
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(index.pairs.size());
    std::uint64_t slot = 0;
    for (const auto& [student_id, candidates] : index.pairs) {
        auto rng = CounterRng::derive({seed, epoch, slot++});
        const std::uint64_t pick = rng.uniform_below(candidates.size());
        out.emplace_back(student_id, candidates[static_cast<std::size_t>(pick)]);
    }
    return out;
}

}  // namespace txmorph
