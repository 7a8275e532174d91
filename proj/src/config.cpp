#include "txmorph/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "txmorph/errors.hpp"

namespace txmorph {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\''))) {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

using Section = std::map<std::string, std::string>;

std::map<std::string, Section> parse_sections(const std::string& text) {
    std::map<std::string, Section> sections;
    std::istringstream in(text);
    std::string line, current;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments outside quotes
        bool in_quote = false;
        char quote = 0;
        std::string kept;
        for (char c : line) {
            if (in_quote) {
                if (c == quote) in_quote = false;
            } else if (c == '"' || c == '\'') {
                in_quote = true;
                quote = c;
            } else if (c == '#') {
                break;
            }
            kept.push_back(c);
        }
        kept = trim(kept);
        if (kept.empty()) continue;
        if (kept.front() == '[') {
            if (kept.back() != ']') {
                throw validation_error("ConfigInvalid",
                                       "line " + std::to_string(lineno) + ": bad section");
            }
            current = trim(kept.substr(1, kept.size() - 2));
            sections[current];
            continue;
        }
        const auto eq = kept.find('=');
        if (eq == std::string::npos) {
            throw validation_error("ConfigInvalid",
                                   "line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(kept.substr(0, eq));
        const std::string value = unquote(trim(kept.substr(eq + 1)));
        if (key.empty()) {
            throw validation_error("ConfigInvalid",
                                   "line " + std::to_string(lineno) + ": empty key");
        }
        sections[current][key] = value;
    }
    return sections;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw validation_error("ConfigInvalid", key + " must be true/false, got '" + v + "'");
}

double parse_num(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw validation_error("ConfigInvalid", key + ": not a number: '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        std::int64_t i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw validation_error("ConfigInvalid", key + ": not an integer: '" + v + "'");
    }
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(v);
    while (std::getline(ss, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

/// Tracks which keys were consumed so typos fail loudly.
class SectionReader {
public:
    SectionReader(const std::map<std::string, Section>& all, const std::string& name)
        : name_(name) {
        auto it = all.find(name);
        if (it != all.end()) section_ = &it->second;
    }

    bool has(const std::string& key) {
        if (!section_) return false;
        return section_->count(key) > 0;
    }

    std::string get(const std::string& key) {
        seen_.insert(key);
        return section_->at(key);
    }

    void get_str(const std::string& key, std::string& out) {
        if (has(key)) out = get(key);
    }
    void get_bool(const std::string& key, bool& out) {
        if (has(key)) out = parse_bool(get(key), name_ + "." + key);
    }
    void get_double(const std::string& key, double& out) {
        if (has(key)) out = parse_num(get(key), name_ + "." + key);
    }
    void get_int(const std::string& key, int& out) {
        if (has(key)) out = static_cast<int>(parse_int(get(key), name_ + "." + key));
    }
    void get_u64(const std::string& key, std::uint64_t& out) {
        if (has(key)) {
            out = static_cast<std::uint64_t>(parse_int(get(key), name_ + "." + key));
        }
    }

    void finish() const {
        if (!section_) return;
        for (const auto& [key, value] : *section_) {
            if (!seen_.count(key)) {
                throw validation_error("ConfigInvalid",
                                       "unknown key '" + name_ + "." + key + "'");
            }
        }
    }

private:
    std::string name_;
    const Section* section_ = nullptr;
    std::set<std::string> seen_;
};

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("FileNotFound", path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

RunConfig RunConfig::from_text(const std::string& text) {
    auto sections = parse_sections(text);
    for (const auto& [name, _] : sections) {
        if (name != "dataset" && name != "pea" && name != "train" && name != "eval" &&
            name != "synth" && name != "ablate" && name != "output") {
            throw validation_error("ConfigInvalid", "unknown section [" + name + "]");
        }
    }
    RunConfig cfg;

    SectionReader dataset(sections, "dataset");
    dataset.get_str("student_path", cfg.dataset.student_path);
    dataset.get_str("teacher_path", cfg.dataset.teacher_path);
    dataset.get_str("expression_path", cfg.dataset.expression_path);
    dataset.get_str("db_path", cfg.dataset.db_path);
    dataset.get_str("control_label", cfg.dataset.control_label);
    dataset.finish();

    SectionReader pea(sections, "pea");
    PeaConfig& p = cfg.train.pea;
    pea.get_bool("enabled", p.enabled);
    pea.get_bool("fixed_bio_aug", p.enabled);  // ablation-ladder alias
    pea.get_bool("inference_tvn", p.inference_tvn);
    pea.get_bool("aug_stochasticity", p.stochastic_steps);
    pea.get_bool("ctrl_sampling", p.control_subsampling);
    pea.get_double("step_drop_prob", p.step_drop_prob);
    pea.get_int("min_controls", p.min_controls);
    pea.get_u64("seed", p.seed);
    if (pea.has("method_set")) {
        p.method_set.clear();
        for (const auto& name : split_list(pea.get("method_set"))) {
            if (name == "center") {
                p.method_set.push_back(PeaMethod::center);
            } else if (name == "center_scale") {
                p.method_set.push_back(PeaMethod::center_scale);
            } else if (name == "tvn") {
                p.method_set.push_back(PeaMethod::tvn);
            } else {
                throw validation_error("ConfigInvalid", "pea.method_set: '" + name + "'");
            }
        }
    }
    pea.finish();

    SectionReader train(sections, "train");
    train.get_double("temperature", cfg.train.temperature);
    train.get_double("lr", cfg.train.lr);
    train.get_int("batch_size", cfg.train.batch_size);
    train.get_int("epochs", cfg.train.epochs);
    train.get_int("hidden1", cfg.train.hidden1);
    train.get_int("hidden2", cfg.train.hidden2);
    train.get_u64("seed", cfg.train.seed);
    if (train.has("loss_direction")) {
        const std::string v = train.get("loss_direction");
        if (v == "one_way") {
            cfg.train.loss_direction = LossDirection::one_way;
        } else if (v == "symmetric") {
            cfg.train.loss_direction = LossDirection::symmetric;
        } else {
            throw validation_error("ConfigInvalid", "train.loss_direction: '" + v + "'");
        }
    }
    if (train.has("loss_reduction")) {
        const std::string v = train.get("loss_reduction");
        if (v == "mean") {
            cfg.train.loss_reduction = LossReduction::mean;
        } else if (v == "sum") {
            cfg.train.loss_reduction = LossReduction::sum;
        } else {
            throw validation_error("ConfigInvalid", "train.loss_reduction: '" + v + "'");
        }
    }
    train.finish();

    SectionReader eval(sections, "eval");
    eval.get_double("threshold_pct", cfg.eval.threshold_pct);
    eval.get_double("ridge_lambda", cfg.eval.ridge_lambda);
    eval.get_double("split_fraction", cfg.eval.split_fraction);
    eval.get_u64("split_seed", cfg.eval.split_seed);
    if (eval.has("mode")) {
        const std::string v = eval.get("mode");
        if (v == "top") {
            cfg.eval.mode = RetrievalMode::top;
        } else if (v == "bottom") {
            cfg.eval.mode = RetrievalMode::bottom;
        } else if (v == "both") {
            cfg.eval.mode = RetrievalMode::both;
        } else {
            throw validation_error("ConfigInvalid", "eval.mode: '" + v + "'");
        }
    }
    eval.finish();

    SectionReader synth(sections, "synth");
    SynthConfig& s = cfg.synth.synth;
    synth.get_int("n_genes", s.n_genes);
    synth.get_int("replicates_student", s.replicates_student);
    synth.get_int("replicates_teacher", s.replicates_teacher);
    synth.get_int("d_student", s.d_student);
    synth.get_int("d_teacher", s.d_teacher);
    synth.get_int("n_latent", s.n_latent);
    synth.get_int("n_batches", s.n_batches);
    synth.get_int("controls_per_batch", s.controls_per_batch);
    synth.get_double("signal_scale", s.signal_scale);
    synth.get_double("batch_effect_scale", s.batch_effect_scale);
    synth.get_double("noise_student", s.noise_student);
    synth.get_double("noise_teacher", s.noise_teacher);
    synth.get_double("expression_noise", s.expression_noise);
    synth.get_double("shared_fraction", s.shared_fraction);
    synth.get_u64("seed", s.seed);
    synth.get_bool("write_expression", cfg.synth.write_expression);
    if (synth.has("n_planted_edges")) {
        int n_edges = 0;
        synth.get_int("n_planted_edges", n_edges);
        s.planted_edges = default_planted_edges(s.n_genes, n_edges);
    }
    if (synth.has("planted_edges")) {
        s.planted_edges.clear();
        for (const auto& item : split_list(synth.get("planted_edges"))) {
            const auto dash = item.find('-');
            if (dash == std::string::npos) {
                throw validation_error("ConfigInvalid",
                                       "synth.planted_edges: expected a-b, got '" + item + "'");
            }
            s.planted_edges.emplace_back(
                static_cast<int>(parse_int(item.substr(0, dash), "planted_edges")),
                static_cast<int>(parse_int(item.substr(dash + 1), "planted_edges")));
        }
    }
    synth.finish();

    SectionReader ablate(sections, "ablate");
    if (ablate.has("seeds")) {
        cfg.ablate_seeds.clear();
        for (const auto& item : split_list(ablate.get("seeds"))) {
            cfg.ablate_seeds.push_back(
                static_cast<std::uint64_t>(parse_int(item, "ablate.seeds")));
        }
        if (cfg.ablate_seeds.empty()) {
            throw validation_error("ConfigInvalid", "ablate.seeds is empty");
        }
    }
    ablate.finish();

    SectionReader output(sections, "output");
    output.get_str("dir", cfg.output_dir);
    output.finish();

    return cfg;
}

std::string RunConfig::to_toml() const {
    std::ostringstream out;
    out.precision(17);
    out << "[dataset]\n"
        << "student_path = \"" << dataset.student_path << "\"\n"
        << "teacher_path = \"" << dataset.teacher_path << "\"\n"
        << "expression_path = \"" << dataset.expression_path << "\"\n"
        << "db_path = \"" << dataset.db_path << "\"\n"
        << "control_label = \"" << dataset.control_label << "\"\n\n";

    const PeaConfig& p = train.pea;
    out << "[pea]\n"
        << "enabled = " << (p.enabled ? "true" : "false") << "\n"
        << "inference_tvn = " << (p.inference_tvn ? "true" : "false") << "\n"
        << "aug_stochasticity = " << (p.stochastic_steps ? "true" : "false") << "\n"
        << "ctrl_sampling = " << (p.control_subsampling ? "true" : "false") << "\n"
        << "step_drop_prob = " << p.step_drop_prob << "\n"
        << "min_controls = " << p.min_controls << "\n"
        << "seed = " << p.seed << "\n"
        << "method_set = \"";
    for (std::size_t i = 0; i < p.method_set.size(); ++i) {
        if (i) out << ",";
        switch (p.method_set[i]) {
            case PeaMethod::center: out << "center"; break;
            case PeaMethod::center_scale: out << "center_scale"; break;
            case PeaMethod::tvn: out << "tvn"; break;
        }
    }
    out << "\"\n\n";

    out << "[train]\n"
        << "temperature = " << train.temperature << "\n"
        << "lr = " << train.lr << "\n"
        << "batch_size = " << train.batch_size << "\n"
        << "epochs = " << train.epochs << "\n"
        << "hidden1 = " << train.hidden1 << "\n"
        << "hidden2 = " << train.hidden2 << "\n"
        << "seed = " << train.seed << "\n"
        << "loss_direction = "
        << (train.loss_direction == LossDirection::one_way ? "one_way" : "symmetric") << "\n"
        << "loss_reduction = "
        << (train.loss_reduction == LossReduction::mean ? "mean" : "sum") << "\n\n";

    out << "[eval]\n"
        << "threshold_pct = " << eval.threshold_pct << "\n"
        << "ridge_lambda = " << eval.ridge_lambda << "\n"
        << "split_fraction = " << eval.split_fraction << "\n"
        << "split_seed = " << eval.split_seed << "\n"
        << "mode = "
        << (eval.mode == RetrievalMode::top
                ? "top"
                : eval.mode == RetrievalMode::bottom ? "bottom" : "both")
        << "\n\n";

    const SynthConfig& s = synth.synth;
    out << "[synth]\n"
        << "n_genes = " << s.n_genes << "\n"
        << "replicates_student = " << s.replicates_student << "\n"
        << "replicates_teacher = " << s.replicates_teacher << "\n"
        << "d_student = " << s.d_student << "\n"
        << "d_teacher = " << s.d_teacher << "\n"
        << "n_latent = " << s.n_latent << "\n"
        << "n_batches = " << s.n_batches << "\n"
        << "controls_per_batch = " << s.controls_per_batch << "\n"
        << "signal_scale = " << s.signal_scale << "\n"
        << "batch_effect_scale = " << s.batch_effect_scale << "\n"
        << "noise_student = " << s.noise_student << "\n"
        << "noise_teacher = " << s.noise_teacher << "\n"
        << "expression_noise = " << s.expression_noise << "\n"
        << "shared_fraction = " << s.shared_fraction << "\n"
        << "seed = " << s.seed << "\n"
        << "write_expression = " << (synth.write_expression ? "true" : "false") << "\n"
        << "planted_edges = \"";
    for (std::size_t i = 0; i < s.planted_edges.size(); ++i) {
        if (i) out << ",";
        out << s.planted_edges[i].first << "-" << s.planted_edges[i].second;
    }
    out << "\"\n\n";

    out << "[ablate]\nseeds = \"";
    for (std::size_t i = 0; i < ablate_seeds.size(); ++i) {
        if (i) out << ",";
        out << ablate_seeds[i];
    }
    out << "\"\n\n";

    out << "[output]\ndir = \"" << output_dir << "\"\n";
    return out.str();
}

}  // namespace txmorph
