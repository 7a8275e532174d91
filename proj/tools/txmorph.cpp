#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "txmorph/commands.hpp"
#include "txmorph/errors.hpp"

using namespace txmorph;

namespace {

int exit_code(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::validation: return 2;
        case ErrorKind::numerical: return 3;
        case ErrorKind::io: return 4;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-modal distillation of morphology embeddings into "
                 "transcriptomics representations"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::int64_t seed_override = -1;
    int threads = 1;
    bool deterministic = false;
    app.add_option("--config", config_path, "config file path");
    app.add_option("--seed", seed_override, "override train/pea/synth seeds");
    app.add_option("--threads", threads, "worker threads (training)");
    app.add_flag("--deterministic", deterministic,
                 "force single-threaded, bit-reproducible execution");
    app.add_option("--out", out_dir, "override output directory");

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    auto* train = app.add_subcommand("train", "train the student adapter");
    auto* eval = app.add_subcommand("eval", "run the two benchmarks");
    std::string run_dir;
    std::string mode_name = "distilled";
    eval->add_option("--run", run_dir, "run directory from the train command");
    eval->add_option("--mode", mode_name, "distilled | unimodal")
        ->check(CLI::IsMember({"distilled", "unimodal"}));
    auto* ablate = app.add_subcommand("ablate", "run the 5-row augmentation ladder");
    auto* compare = app.add_subcommand("compare", "overlap report over retrieved-pairs TSVs");
    std::vector<std::string> compare_paths;
    compare->add_option("paths", compare_paths, "retrieved-pairs TSV files")
        ->expected(-2);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (seed_override >= 0) {
            cfg.train.seed = static_cast<std::uint64_t>(seed_override);
            cfg.train.pea.seed = static_cast<std::uint64_t>(seed_override);
            cfg.synth.synth.seed = static_cast<std::uint64_t>(seed_override);
        }
        if (deterministic || threads < 1) threads = 1;
        (void)threads;  // training is single-threaded; accepted for interface stability

        if (*synth) {
            cmd_synth(cfg);
        } else if (*train) {
            cmd_train(cfg);
        } else if (*eval) {
            const EvalMode mode =
                mode_name == "unimodal" ? EvalMode::unimodal : EvalMode::distilled;
            if (mode == EvalMode::distilled && run_dir.empty()) {
                throw validation_error("ConfigInvalid", "--run required in distilled mode");
            }
            cmd_eval(cfg, run_dir, mode);
        } else if (*ablate) {
            cmd_ablate(cfg);
        } else if (*compare) {
            cmd_compare(compare_paths, cfg.output_dir);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
