#include "txmorph/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "txmorph/errors.hpp"
#include "txmorph/rng.hpp"

namespace fs = std::filesystem;

namespace txmorph {

namespace {

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("FileWriteFailed", path);
    out << text;
}

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

EmbeddingTable load_student(const RunConfig& cfg) {
    if (cfg.dataset.student_path.empty()) {
        throw validation_error("ConfigInvalid", "dataset.student_path not set");
    }
    LoadOptions opts;
    opts.control_label = cfg.dataset.control_label;
    opts.expression_path = cfg.dataset.expression_path;
    return load_embedding_table(cfg.dataset.student_path, opts);
}

/// Deterministic 50/50-style split, stratified by (batch, is_control) so
/// every batch keeps controls on both sides.
void split_rows(const std::vector<SampleMeta>& meta, double test_fraction,
                std::uint64_t seed, std::vector<std::ptrdiff_t>& train,
                std::vector<std::ptrdiff_t>& test) {
    std::map<std::pair<std::string, bool>, std::vector<std::ptrdiff_t>> groups;
    for (std::size_t i = 0; i < meta.size(); ++i) {
        groups[{meta[i].batch_id, meta[i].is_control}].push_back(
            static_cast<std::ptrdiff_t>(i));
    }
    std::uint64_t group_idx = 0;
    for (auto& [key, rows] : groups) {
        auto rng = CounterRng::derive({seed, 0x73706c6974ULL, group_idx++});
        rng.shuffle(rows);
        const std::size_t n_test = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(test_fraction * rows.size())));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            (i < n_test ? test : train).push_back(rows[i]);
        }
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
}

double eval_recall_only(const Eigen::MatrixXd& matrix,
                        const std::vector<SampleMeta>& meta,
                        const std::vector<RelationshipDb>& dbs, const EvalConfig& ecfg) {
    AggregatedMap agg = aggregate_perturbation_embeddings(matrix, meta);
    RetrievedSet retrieved =
        retrieve_relationships(agg.vectors, ecfg.threshold_pct, ecfg.mode);
    std::set<std::string> universe;
    for (const auto& [gene, v] : agg.vectors) universe.insert(gene);
    return known_relationship_recall(retrieved.pairs, dbs, universe).mean;
}

}  // namespace

std::vector<std::string> cmd_synth(const RunConfig& cfg) {
    SynthDataset data = generate(cfg.synth.synth);
    fs::create_directories(cfg.output_dir);
    std::vector<std::string> paths;
    const std::string student_path = (fs::path(cfg.output_dir) / "student.csv").string();
    const std::string teacher_path = (fs::path(cfg.output_dir) / "teacher.csv").string();
    const std::string truth_path = (fs::path(cfg.output_dir) / "truth.tsv").string();
    save_embedding_table(data.student, student_path);
    save_embedding_table(data.teacher, teacher_path);
    save_relationship_db(data.truth, truth_path);
    paths = {student_path, teacher_path, truth_path};
    if (cfg.synth.write_expression) {
        const std::string expr_path =
            (fs::path(cfg.output_dir) / "expression.csv").string();
        save_expression_table(data.student, expr_path);
        paths.push_back(expr_path);
    }
    std::cout << "wrote " << paths.size() << " files:\n";
    for (const auto& p : paths) std::cout << "  " << p << "\n";
    std::cout << "student samples: " << data.student.n_samples()
              << ", teacher samples: " << data.teacher.n_samples()
              << ", planted edges: " << data.truth.edges.size() << "\n";
    return paths;
}

std::string cmd_train(const RunConfig& cfg) {
    if (cfg.dataset.teacher_path.empty()) {
        throw validation_error("ConfigInvalid", "dataset.teacher_path not set");
    }
    EmbeddingTable student = load_student(cfg);
    LoadOptions topts;
    topts.control_label = cfg.dataset.control_label;
    EmbeddingTable teacher = load_embedding_table(cfg.dataset.teacher_path, topts);

    const auto t0 = std::chrono::steady_clock::now();
    DistillRun run = train_semi_clipped(student, teacher, cfg.train);
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);
    save_params(run.params, (dir / "params.bin").string(), cfg.train.seed);

    std::ostringstream loss_csv;
    loss_csv << "epoch,loss\n";
    for (std::size_t e = 0; e < run.loss_history.size(); ++e) {
        loss_csv << e << ',' << fmt17(run.loss_history[e]) << "\n";
    }
    write_file((dir / "loss.csv").string(), loss_csv.str());

    const std::string resolved = cfg.to_toml();
    write_file((dir / "resolved_config.toml").string(), resolved);

    nlohmann::json manifest;
    manifest["config_toml"] = resolved;
    manifest["seed"] = cfg.train.seed;
    manifest["pea_enabled"] = cfg.train.pea.enabled;
    manifest["epochs"] = cfg.train.epochs;
    manifest["loss_history"] = run.loss_history;
    manifest["wall_time_sec"] = wall_s;
    manifest["adapter_dims"] = run.params.dims;
    write_file((dir / "manifest.json").string(), manifest.dump(2));

    std::cout << "run written to " << cfg.output_dir << " ("
              << run.loss_history.size() << " epochs, " << wall_s << " s)\n";
    return cfg.output_dir;
}

DistillRun load_run(const std::string& run_dir) {
    const fs::path dir(run_dir);
    std::ifstream in(dir / "manifest.json");
    if (!in) throw io_error("FileNotFound", (dir / "manifest.json").string());
    nlohmann::json manifest = nlohmann::json::parse(in);
    RunConfig cfg = RunConfig::from_text(manifest.at("config_toml").get<std::string>());
    DistillRun run;
    run.config = cfg.train;
    run.params = load_params((dir / "params.bin").string());
    run.loss_history = manifest.at("loss_history").get<std::vector<double>>();
    return run;
}

EvalReport cmd_eval(const RunConfig& cfg, const std::string& run_dir, EvalMode mode) {
    EmbeddingTable student = load_student(cfg);
    if (cfg.dataset.db_path.empty()) {
        throw validation_error("ConfigInvalid", "dataset.db_path not set");
    }
    std::vector<RelationshipDb> dbs = load_relationship_dbs(cfg.dataset.db_path);

    Eigen::MatrixXd latent;
    if (mode == EvalMode::distilled) {
        DistillRun run = load_run(run_dir);
        latent = embed_student(run, student);
    } else {
        latent = student.matrix;
    }

    EvalReport report;
    AggregatedMap agg = aggregate_perturbation_embeddings(latent, student.meta);
    report.zero_aggregates = agg.zero_aggregates;
    RetrievedSet retrieved =
        retrieve_relationships(agg.vectors, cfg.eval.threshold_pct, cfg.eval.mode);
    report.retrieved_pairs = retrieved.pairs;
    report.n_genes = agg.vectors.size();
    report.n_pairs_considered = agg.vectors.size() * (agg.vectors.size() - 1) / 2;
    std::set<std::string> universe;
    for (const auto& [gene, v] : agg.vectors) universe.insert(gene);
    RecallResult recall = known_relationship_recall(retrieved.pairs, dbs, universe);
    report.recall_per_db = recall.per_db;
    report.recall_mean = recall.mean;
    report.empty_dbs = recall.empty_dbs;

    if (student.has_expression()) {
        std::vector<std::ptrdiff_t> train_rows, test_rows;
        split_rows(student.meta, cfg.eval.split_fraction, cfg.eval.split_seed, train_rows,
                   test_rows);
        Eigen::MatrixXd coeffs = fit_ridge_decoder(latent, student.expression, train_rows,
                                                   cfg.eval.ridge_lambda);
        Eigen::MatrixXd predicted = ridge_predict(coeffs, latent, test_rows);
        Eigen::MatrixXd actual(test_rows.size(), student.expression.cols());
        std::vector<SampleMeta> test_meta;
        for (std::size_t i = 0; i < test_rows.size(); ++i) {
            actual.row(static_cast<std::ptrdiff_t>(i)) =
                student.expression.row(test_rows[i]);
            test_meta.push_back(student.meta[static_cast<std::size_t>(test_rows[i])]);
        }
        report.structural_integrity = structural_integrity(predicted, actual, test_meta);
        report.spearman = spearman_reconstruction(latent, student.expression, train_rows,
                                                  test_rows, cfg.eval.ridge_lambda);
        report.tx_preservation =
            interpretability_score(report.structural_integrity, report.spearman);
    }

    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);
    const std::string tag = mode == EvalMode::distilled ? "distilled" : "unimodal";
    write_file((dir / ("report_" + tag + ".json")).string(), report.to_json());
    write_file((dir / ("report_" + tag + ".csv")).string(), report.to_csv());
    std::ostringstream tsv;
    for (const auto& p : retrieved.pairs) {
        tsv << p.first << '\t' << p.second << '\t' << tag << '\t'
            << fmt17(retrieved.similarity.at(p)) << "\n";
    }
    write_file((dir / ("retrieved_" + tag + ".tsv")).string(), tsv.str());
    std::cout << tag << " recall_mean=" << report.recall_mean
              << " tx_preservation=" << report.tx_preservation << "\n";
    return report;
}

std::vector<std::pair<std::string, PeaConfig>> pea_ladder(const PeaConfig& base) {
    // Each row enables exactly one more switch. The correction method is
    // drawn from the configured method set in every augmented row; the
    // stochasticity row adds the random step dropping.
    PeaConfig row = base;
    row.enabled = false;
    row.inference_tvn = false;
    row.stochastic_steps = false;
    row.control_subsampling = false;
    std::vector<std::pair<std::string, PeaConfig>> ladder;
    ladder.emplace_back("base", row);
    row.enabled = true;
    ladder.emplace_back("fixed_bio_aug", row);
    row.inference_tvn = true;
    ladder.emplace_back("inference_tvn", row);
    row.stochastic_steps = true;
    ladder.emplace_back("aug_stochasticity", row);
    row.control_subsampling = true;
    ladder.emplace_back("ctrl_sampling", row);
    return ladder;
}

std::string cmd_ablate(const RunConfig& cfg) {
    EmbeddingTable student = load_student(cfg);
    LoadOptions topts;
    topts.control_label = cfg.dataset.control_label;
    EmbeddingTable teacher = load_embedding_table(cfg.dataset.teacher_path, topts);
    if (cfg.dataset.db_path.empty()) {
        throw validation_error("ConfigInvalid", "dataset.db_path not set");
    }
    std::vector<RelationshipDb> dbs = load_relationship_dbs(cfg.dataset.db_path);

    const auto ladder = pea_ladder(cfg.train.pea);
    fs::create_directories(cfg.output_dir);
    std::ostringstream sweep;
    sweep << "config,seed,recall_mean\n";
    std::ostringstream summary;
    summary << "config,mean,std\n";

    for (const auto& [name, pea] : ladder) {
        std::vector<double> recalls;
        for (std::uint64_t seed : cfg.ablate_seeds) {
            TrainConfig tc = cfg.train;
            tc.seed = seed;
            tc.pea = pea;
            tc.pea.seed = seed;
            DistillRun run = train_semi_clipped(student, teacher, tc);
            Eigen::MatrixXd latent = embed_student(run, student);
            const double recall = eval_recall_only(latent, student.meta, dbs, cfg.eval);
            recalls.push_back(recall);
            sweep << name << ',' << seed << ',' << fmt17(recall) << "\n";
        }
        double mean = 0.0;
        for (double r : recalls) mean += r;
        mean /= static_cast<double>(recalls.size());
        double var = 0.0;
        for (double r : recalls) var += (r - mean) * (r - mean);
        const double stddev =
            recalls.size() > 1 ? std::sqrt(var / static_cast<double>(recalls.size() - 1))
                               : 0.0;
        summary << name << ',' << fmt17(mean) << ',' << fmt17(stddev) << "\n";
        std::cout << name << ": mean recall " << mean << " +/- " << stddev << "\n";
    }
    const fs::path dir(cfg.output_dir);
    write_file((dir / "sweep.csv").string(), sweep.str());
    write_file((dir / "summary.csv").string(), summary.str());
    return cfg.output_dir;
}

std::string cmd_compare(const std::vector<std::string>& tsv_paths,
                        const std::string& out_dir) {
    if (tsv_paths.size() < 2) {
        throw validation_error("TooFewSets", "need >= 2 retrieved-pairs TSVs");
    }
    std::vector<std::pair<std::string, std::set<GenePair>>> sets;
    for (const auto& path : tsv_paths) {
        std::ifstream in(path);
        if (!in) throw io_error("FileNotFound", path);
        std::set<GenePair> pairs;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string a, b;
            if (!std::getline(ss, a, '\t') || !std::getline(ss, b, '\t')) {
                throw validation_error("MissingColumn", path + ": expected >= 2 columns");
            }
            pairs.insert(make_pair_canonical(a, b));
        }
        sets.emplace_back(fs::path(path).stem().string(), std::move(pairs));
    }
    auto regions = compare_retrieval_sets(sets);

    nlohmann::json j = nlohmann::json::array();
    for (const auto& region : regions) {
        nlohmann::json r;
        r["in_sets"] = region.in_sets;
        r["not_in"] = region.not_in;
        r["count"] = region.pairs.size();
        nlohmann::json pairs = nlohmann::json::array();
        for (const auto& [a, b] : region.pairs) pairs.push_back({a, b});
        r["pairs"] = pairs;
        j.push_back(r);
    }
    fs::create_directories(out_dir);
    const std::string out_path = (fs::path(out_dir) / "overlap.json").string();
    write_file(out_path, j.dump(2));
    std::cout << "overlap report: " << out_path << "\n";
    return out_path;
}

}  // namespace txmorph
