#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "txmorph/distill.hpp"
#include "txmorph/eval.hpp"
#include "txmorph/synthgen.hpp"

namespace txmorph {

struct DatasetConfig {
    std::string student_path;
    std::string teacher_path;
    std::string expression_path;
    std::string db_path;  // relationship TSV, may hold several source_db values
    std::string control_label = "control";
};

struct EvalConfig {
    double threshold_pct = 5.0;
    RetrievalMode mode = RetrievalMode::both;
    double ridge_lambda = 1e-3;
    double split_fraction = 0.5;
    std::uint64_t split_seed = 0;
};

struct SynthFileConfig {
    SynthConfig synth;
    bool write_expression = false;
};

struct RunConfig {
    DatasetConfig dataset;
    TrainConfig train;  // holds the PeaConfig
    EvalConfig eval;
    SynthFileConfig synth;
    std::vector<std::uint64_t> ablate_seeds = {0, 1, 2};
    std::string output_dir = "out";

    /// Parse the sectioned key = value config file. Unknown keys are an error.
    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text);

    /// Fully resolved config, re-parseable by from_text.
    std::string to_toml() const;
};

}  // namespace txmorph
