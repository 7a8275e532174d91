#pragma once

#include <string>
#include <vector>

#include "txmorph/config.hpp"
#include "txmorph/distill.hpp"
#include "txmorph/eval.hpp"

namespace txmorph {

/// Writes the synthetic dataset files (student/teacher CSV, truth TSV and,
/// when configured, the expression CSV) into cfg.output_dir.
/// Returns the written paths.
std::vector<std::string> cmd_synth(const RunConfig& cfg);

/// Trains Semi-Clipped and writes params.bin, manifest.json, loss.csv and
/// resolved_config.toml into the run directory. Returns the run directory.
std::string cmd_train(const RunConfig& cfg);

enum class EvalMode { distilled, unimodal };

/// Runs both benchmarks and writes report.json, report.csv, retrieved.tsv.
EvalReport cmd_eval(const RunConfig& cfg, const std::string& run_dir, EvalMode mode);

/// Runs the 5-row PEA ladder over the configured seed list; writes
/// sweep.csv (one row per config x seed) and summary.csv (mean +/- std).
std::string cmd_ablate(const RunConfig& cfg);

/// Overlap report over 2-3 retrieved-pairs TSVs; writes overlap.json.
std::string cmd_compare(const std::vector<std::string>& tsv_paths,
                        const std::string& out_dir);

/// Loads a run directory written by cmd_train.
DistillRun load_run(const std::string& run_dir);

/// The 5-row Table-2-style ladder applied to a base PeaConfig.
std::vector<std::pair<std::string, PeaConfig>> pea_ladder(const PeaConfig& base);

}  // namespace txmorph
