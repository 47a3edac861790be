// Command-line front end: data generation, training, prediction, the
// cross-validation protocol and detect-rate curve extraction.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 training failure.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "oilml/boosting.hpp"
#include "oilml/dataset.hpp"
#include "oilml/errors.hpp"
#include "oilml/experiments.hpp"
#include "oilml/metrics.hpp"
#include "oilml/mllvq.hpp"
#include "oilml/pca.hpp"
#include "oilml/synthgen.hpp"
#include "textio.hpp"

namespace {

namespace fs = std::filesystem;
using namespace oilml;
using textio::format_double;

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const std::vector<std::string> kKnownKeys = {
    "data.path",        "method",          "seed",
    "output.dir",       "cv.runs",         "cv.folds",
    "pca.rule",         "grid.t_binary",   "grid.t_multilabel",
    "grid.s",           "generator.preset", "generator.file",
    "generator.d",      "generator.noise_sigma", "generator.overlap",
};

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

class ConfigMap {
public:
    void load(const fs::path& path) {
        const std::string text = textio::read_file(path);
        std::istringstream in(text);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const std::string stripped = trim(line);
            if (stripped.empty() || stripped[0] == '#') continue;
            const auto eq = stripped.find('=');
            if (eq == std::string::npos) {
                throw usage_error("config line " + std::to_string(line_no) +
                                  ": expected key = value");
            }
            const std::string key = trim(stripped.substr(0, eq));
            if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
                throw usage_error("config line " + std::to_string(line_no) +
                                  ": unknown key \"" + key + "\"");
            }
            if (values_.count(key) != 0) {
                throw usage_error("config line " + std::to_string(line_no) +
                                  ": duplicate key \"" + key + "\"");
            }
            values_[key] = trim(stripped.substr(eq + 1));
        }
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& at(const std::string& key) const { return values_.at(key); }

private:
    std::map<std::string, std::string> values_;
};

// Flag beats config beats default.
std::string pick_string(const CLI::Option* opt, const std::string& flag_value,
                        const ConfigMap& cfg, const std::string& key,
                        const std::string& fallback) {
    if (opt != nullptr && opt->count() > 0) return flag_value;
    if (!key.empty() && cfg.has(key)) return cfg.at(key);
    return fallback;
}

long long config_int(const ConfigMap& cfg, const std::string& key) {
    long long v = 0;
    if (!textio::try_parse_int(cfg.at(key), v)) {
        throw usage_error("config key " + key + " must be an integer");
    }
    return v;
}

double config_double(const ConfigMap& cfg, const std::string& key) {
    double v = 0.0;
    if (!textio::try_parse_double(cfg.at(key), v)) {
        throw usage_error("config key " + key + " must be numeric");
    }
    return v;
}

std::size_t pick_size(const CLI::Option* opt, std::size_t flag_value, const ConfigMap& cfg,
                      const std::string& key, std::size_t fallback) {
    if (opt != nullptr && opt->count() > 0) return flag_value;
    if (!key.empty() && cfg.has(key)) {
        const long long v = config_int(cfg, key);
        if (v < 0) throw usage_error("config key " + key + " must be non-negative");
        return static_cast<std::size_t>(v);
    }
    return fallback;
}

double pick_double(const CLI::Option* opt, double flag_value, const ConfigMap& cfg,
                   const std::string& key, double fallback) {
    if (opt != nullptr && opt->count() > 0) return flag_value;
    if (!key.empty() && cfg.has(key)) return config_double(cfg, key);
    return fallback;
}

std::uint64_t pick_seed(const CLI::Option* opt, std::uint64_t flag_value, const ConfigMap& cfg,
                        std::uint64_t fallback) {
    if (opt != nullptr && opt->count() > 0) return flag_value;
    if (cfg.has("seed")) {
        const std::string& text = cfg.at("seed");
        unsigned long long v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            throw usage_error("config key seed must be a non-negative integer");
        }
        return v;
    }
    return fallback;
}

// flag > OILML_OUTPUT_DIR > config > "."
fs::path resolve_output_dir(const CLI::Option* opt, const std::string& flag_value,
                            const ConfigMap& cfg) {
    if (opt != nullptr && opt->count() > 0) return flag_value;
    if (const char* env = std::getenv("OILML_OUTPUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    if (cfg.has("output.dir")) return cfg.at("output.dir");
    return ".";
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
    std::vector<std::size_t> out;
    std::string part;
    std::istringstream in(text);
    while (std::getline(in, part, ',')) {
        long long v = 0;
        if (!textio::try_parse_int(trim(part), v) || v <= 0) {
            throw usage_error(what + " expects a comma-separated list of positive integers");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw usage_error(what + " must not be empty");
    return out;
}

std::optional<PcaRule> parse_pca_rule(const std::string& text) {
    if (text.empty() || text == "none" || text == "off") return std::nullopt;
    if (text == "positive") return PcaRule{true, 0.0};
    double threshold = 0.0;
    if (!textio::try_parse_double(text, threshold)) {
        throw usage_error("pca rule must be \"none\", \"positive\" or a variance threshold");
    }
    return PcaRule{false, threshold};
}

std::string require_value(const CLI::Option* opt, const std::string& flag_value,
                          const ConfigMap& cfg, const std::string& key,
                          const std::string& flag_name) {
    const std::string v = pick_string(opt, flag_value, cfg, key, "");
    if (v.empty()) {
        throw usage_error("missing " + flag_name +
                          (key.empty() ? "" : " (or config key " + key + ")"));
    }
    return v;
}

std::string join_label_names(const std::vector<int>& labels, const LabelSpace& space) {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) out += "|";
        out += space.name(static_cast<std::size_t>(labels[i]));
    }
    return out;
}

std::string join_scores(const std::vector<double>& scores) {
    std::string out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i > 0) out += "|";
        out += format_double(scores[i]);
    }
    return out;
}

std::string first_token(const std::string& text) {
    std::istringstream in(text);
    std::string tok;
    in >> tok;
    return tok;
}

// ---- subcommand state ----

struct CliState {
    ConfigMap cfg;

    std::string config_path;
    std::string data;
    std::string method;
    std::string out;
    std::string dir;
    std::uint64_t seed = 0;

    // generate
    std::string preset = "table1";
    std::string generator_file;
    std::size_t dim = 0;
    double noise_sigma = 0.0;
    double overlap = 0.0;

    // train
    std::size_t rounds = 200;
    std::size_t prototypes = 1;
    std::size_t epochs = 40;
    double alpha = 0.0;
    double eta0 = 0.0;
    std::size_t meta_stumps = 100;

    // predict
    std::string model;

    // cv
    std::size_t runs = 10;
    std::size_t folds = 5;
    std::string pca;
    std::string t_binary;
    std::string t_multilabel;
    std::string s_grid;

    // curve
    std::vector<std::string> reports;
};

int cmd_generate(const CliState& st, const CLI::App& sub) {
    const ConfigMap& cfg = st.cfg;
    GeneratorConfig gc;
    const std::string gen_file =
        pick_string(sub.get_option("--generator-config"), st.generator_file, cfg,
                    "generator.file", "");
    if (!gen_file.empty()) {
        gc = load_generator_config(gen_file);
    } else {
        const std::string preset =
            pick_string(sub.get_option("--preset"), st.preset, cfg, "generator.preset", "table1");
        if (preset != "table1") throw usage_error("unknown preset \"" + preset + "\"");
        gc = table1_config();
    }
    gc.d = pick_size(sub.get_option("--dim"), st.dim, cfg, "generator.d", gc.d);
    gc.noise_sigma = pick_double(sub.get_option("--noise-sigma"), st.noise_sigma, cfg,
                                 "generator.noise_sigma", gc.noise_sigma);
    gc.overlap =
        pick_double(sub.get_option("--overlap"), st.overlap, cfg, "generator.overlap", gc.overlap);
    gc.seed = pick_seed(sub.get_option("--seed"), st.seed, cfg, gc.seed);

    const Dataset dataset = generate(gc);

    const fs::path out_dir = resolve_output_dir(sub.get_option("--dir"), st.dir, cfg);
    const fs::path csv_path = st.out.empty() ? out_dir / "dataset.csv" : fs::path(st.out);
    save_csv(dataset, csv_path.string());
    const fs::path echo_path = csv_path.has_parent_path()
                                   ? csv_path.parent_path() / "generator-config.txt"
                                   : fs::path("generator-config.txt");
    save_generator_config(gc, echo_path);

    std::cout << "wrote " << dataset.size() << " examples (d=" << dataset.dim << ") to "
              << csv_path.string() << "\n";
    std::cout << "wrote generator config to " << echo_path.string() << "\n";
    return 0;
}

int cmd_train(const CliState& st, const CLI::App& sub) {
    const ConfigMap& cfg = st.cfg;
    const std::string data =
        require_value(sub.get_option("--data"), st.data, cfg, "data.path", "--data");
    const std::string method_text =
        require_value(sub.get_option("--method"), st.method, cfg, "method", "--method");
    Method method;
    try {
        method = method_from_name(method_text);
    } catch (const data_error& e) {
        throw usage_error(e.what());
    }
    const std::uint64_t seed = pick_seed(sub.get_option("--seed"), st.seed, cfg, 0);

    const Dataset dataset = load_csv(data, infer_label_space(data));

    const fs::path out_dir = resolve_output_dir(sub.get_option("--dir"), st.dir, cfg);
    const fs::path model_path = st.out.empty() ? out_dir / "model.txt" : fs::path(st.out);

    switch (method) {
        case Method::binary_boost: {
            const StumpEnsemble model = train_binary_adaboost(dataset, st.rounds);
            save_ensemble(model, model_path, kBinaryModelTag);
            break;
        }
        case Method::ml_boost: {
            const StumpEnsemble model = train_adaboost_mh(dataset, st.rounds);
            save_ensemble(model, model_path, kBoostModelTag);
            break;
        }
        case Method::ml_lvq: {
            LvqTrainConfig lvq;
            lvq.S = st.prototypes;
            lvq.M = st.epochs;
            lvq.alpha = st.alpha;
            if (sub.get_option("--eta0")->count() > 0) lvq.eta0 = st.eta0;
            lvq.seed = seed;
            const MlLvqModel model = train_mllvq_model(dataset, lvq, st.meta_stumps);
            save_mllvq(model, model_path);
            break;
        }
    }
    std::cout << "trained " << method_text << " on " << dataset.size() << " examples (d="
              << dataset.dim << ") -> " << model_path.string() << "\n";
    return 0;
}

int cmd_predict(const CliState& st, const CLI::App& sub) {
    const ConfigMap& cfg = st.cfg;
    const std::string data =
        require_value(sub.get_option("--data"), st.data, cfg, "data.path", "--data");
    if (st.model.empty()) throw usage_error("missing --model");

    const Dataset dataset = load_csv(data, infer_label_space(data));
    const fs::path out_dir = resolve_output_dir(sub.get_option("--dir"), st.dir, cfg);
    const fs::path out_path = st.out.empty() ? out_dir / "predictions.tsv" : fs::path(st.out);

    const std::string tag = first_token(textio::read_file(st.model));
    std::ostringstream out;
    if (tag == kMlLvqModelTag) {
        const MlLvqModel model = load_mllvq(st.model);
        if (model.book.dim != dataset.dim) {
            throw data_error("model expects d=" + std::to_string(model.book.dim) +
                             " but input has d=" + std::to_string(dataset.dim));
        }
        const Dataset scaled = apply_scaling(dataset, model.scaling);
        out << "id\tranked\tscores\n";
        for (const Example& ex : scaled.examples) {
            const std::vector<int> ranked = predict_ranked(model, ex.features);
            const std::vector<double> scores = score_labels(model.book, ex.features);
            out << ex.id << "\t" << join_label_names(ranked, model.book.space) << "\t"
                << join_scores(scores) << "\n";
        }
    } else {
        std::string loaded_tag;
        const StumpEnsemble model = load_ensemble(st.model, &loaded_tag);
        if (model.dim != dataset.dim) {
            throw data_error("model expects d=" + std::to_string(model.dim) +
                             " but input has d=" + std::to_string(dataset.dim));
        }
        if (loaded_tag == kBinaryModelTag) {
            out << "id\tsign\tscore\n";
            for (const Example& ex : dataset.examples) {
                const double f = predict_scores(model, ex.features)[0];
                out << ex.id << "\t" << (f > 0.0 ? "+1" : "-1") << "\t" << format_double(f)
                    << "\n";
            }
        } else {
            out << "id\tpredicted\tflag\tscores\n";
            for (const Example& ex : dataset.examples) {
                const std::vector<double> scores = predict_scores(model, ex.features);
                std::vector<int> predicted;
                for (std::size_t l = 0; l < scores.size(); ++l) {
                    if (scores[l] > 0.0) predicted.push_back(static_cast<int>(l));
                }
                out << ex.id << "\t" << join_label_names(predicted, model.space) << "\t"
                    << (predicted.empty() ? "empty-set" : "ok") << "\t" << join_scores(scores)
                    << "\n";
            }
        }
    }

    textio::atomic_write(out_path, out.str());
    std::cout << "wrote " << dataset.size() << " predictions to " << out_path.string() << "\n";
    return 0;
}

int cmd_cv(const CliState& st, const CLI::App& sub) {
    const ConfigMap& cfg = st.cfg;
    const std::string data =
        require_value(sub.get_option("--data"), st.data, cfg, "data.path", "--data");
    const std::string method_text =
        require_value(sub.get_option("--method"), st.method, cfg, "method", "--method");
    Method method;
    try {
        method = method_from_name(method_text);
    } catch (const data_error& e) {
        throw usage_error(e.what());
    }

    GridSpec grid;
    const std::string tb = pick_string(sub.get_option("--t-binary"), st.t_binary, cfg,
                                       "grid.t_binary", "");
    if (!tb.empty()) grid.t_binary = parse_size_list(tb, "grid.t_binary");
    const std::string tm = pick_string(sub.get_option("--t-multilabel"), st.t_multilabel, cfg,
                                       "grid.t_multilabel", "");
    if (!tm.empty()) grid.t_multilabel = parse_size_list(tm, "grid.t_multilabel");
    const std::string sg = pick_string(sub.get_option("--s-grid"), st.s_grid, cfg, "grid.s", "");
    if (!sg.empty()) grid.s_lvq = parse_size_list(sg, "grid.s");
    grid.pca = parse_pca_rule(
        pick_string(sub.get_option("--pca"), st.pca, cfg, "pca.rule", "none"));

    const std::size_t runs = pick_size(sub.get_option("--runs"), st.runs, cfg, "cv.runs", 10);
    const std::size_t folds = pick_size(sub.get_option("--folds"), st.folds, cfg, "cv.folds", 5);
    const std::uint64_t seed = pick_seed(sub.get_option("--seed"), st.seed, cfg, 0);

    const Dataset dataset = load_csv(data, infer_label_space(data));
    const fs::path out_dir = resolve_output_dir(sub.get_option("--dir"), st.dir, cfg);

    const CvReport report = run_protocol(dataset, grid, method, runs, folds, seed);

    const char* param = method == Method::ml_lvq ? "S" : "T";
    for (const FoldResult& fr : report.fold_results) {
        std::cout << "run " << fr.run << " fold " << fr.fold << ": selected " << param << "="
                  << fr.selected.value << " validation=" << format_double(fr.selected.validation_score);
        if (grid.pca.has_value()) std::cout << " pca_components=" << fr.pca_components;
        std::cout << "\n";
    }

    textio::atomic_write(out_dir / "manifest.json",
                         manifest_json(dataset, grid, method, runs, folds, seed));
    textio::atomic_write(out_dir / "cv-report.json", cv_report_to_json(report));
    for (const FoldResult& fr : report.fold_results) {
        const fs::path fold_path = out_dir / "reports" /
                                   ("fold-" + std::to_string(fr.run) + "-" +
                                    std::to_string(fr.fold) + ".json");
        textio::atomic_write(fold_path, report_to_json(fr.report));
    }

    std::ostringstream agg;
    for (const auto& [key, stats] : report.aggregate) {
        agg << key << ".mean=" << format_double(stats.mean) << "\n";
        agg << key << ".stddev=" << format_double(stats.stddev) << "\n";
    }
    textio::atomic_write(out_dir / "aggregate.txt", agg.str());
    std::cout << agg.str();
    std::cout << "wrote CV outputs to " << out_dir.string() << "\n";
    return 0;
}

int cmd_curve(const CliState& st, const CLI::App& sub) {
    const ConfigMap& cfg = st.cfg;
    if (st.reports.empty()) throw usage_error("missing --report");
    const fs::path out_dir = resolve_output_dir(sub.get_option("--dir"), st.dir, cfg);
    const fs::path out_path = st.out.empty() ? out_dir / "curve.tsv" : fs::path(st.out);

    struct BinTotals {
        long long correct = 0;
        std::size_t support = 0;
    };
    std::map<std::pair<double, double>, BinTotals> merged;

    for (const std::string& path : st.reports) {
        const std::string text = textio::read_file(path);
        EvaluationReport rep;
        try {
            const nlohmann::json j = nlohmann::json::parse(text);
            rep = j.contains("pooled") ? report_from_json(j.at("pooled").dump())
                                       : report_from_json(text);
        } catch (const nlohmann::json::exception& e) {
            throw data_error("'" + path + "' is not a report JSON: " + e.what());
        }
        for (const RatioBin& bin : rep.ratio_curve) {
            BinTotals& t = merged[{bin.lo, bin.hi}];
            t.correct += std::llround(bin.rate * static_cast<double>(bin.support));
            t.support += bin.support;
        }
    }
    if (merged.empty()) {
        throw data_error("the given reports carry no ratio-curve data");
    }

    std::ostringstream out;
    out << "bin_lo\tbin_hi\tdetect_rate\tsupport\tflag\n";
    for (const auto& [range, totals] : merged) {
        const double rate = totals.support == 0
                                ? 0.0
                                : static_cast<double>(totals.correct) /
                                      static_cast<double>(totals.support);
        out << format_double(range.first) << "\t" << format_double(range.second) << "\t"
            << format_double(rate) << "\t" << totals.support << "\t"
            << (totals.support < 5 ? "low-support" : "ok") << "\n";
    }
    textio::atomic_write(out_path, out.str());
    std::cout << "wrote " << merged.size() << " curve bins to " << out_path.string() << "\n";
    return 0;
}

int run_cli(int argc, char** argv) {
    CliState st;

    // The config file must be known before flag defaults resolve, so scan for
    // it ahead of the CLI11 parse.
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) {
            st.config_path = argv[i + 1];
        } else if (arg.rfind("--config=", 0) == 0) {
            st.config_path = arg.substr(9);
        }
    }
    if (!st.config_path.empty()) st.cfg.load(st.config_path);

    CLI::App app{"oil-mixture chromatogram analysis toolkit"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", st.config_path, "key = value configuration file");
        sub->add_option("--dir", st.dir, "output directory (env OILML_OUTPUT_DIR overrides config)");
        sub->add_option("--seed", st.seed, "RNG seed");
    };

    CLI::App* gen = app.add_subcommand("generate", "emit a synthetic chromatogram dataset");
    add_common(gen);
    gen->add_option("--preset", st.preset, "bundled preset name (table1)");
    gen->add_option("--generator-config", st.generator_file, "full generator config file");
    gen->add_option("--dim", st.dim, "number of sample points per chromatogram");
    gen->add_option("--noise-sigma", st.noise_sigma, "multiplicative noise level");
    gen->add_option("--overlap", st.overlap, "profile overlap in [0, 1]");
    gen->add_option("--out", st.out, "output CSV path (default <dir>/dataset.csv)");

    CLI::App* train = app.add_subcommand("train", "train one model on a CSV dataset");
    add_common(train);
    train->add_option("--data", st.data, "input CSV");
    train->add_option("--method", st.method, "binary-boost | ml-boost | ml-lvq");
    train->add_option("--rounds", st.rounds, "boosting rounds");
    train->add_option("--prototypes", st.prototypes, "prototypes per label and polarity");
    train->add_option("--epochs", st.epochs, "LVQ training epochs");
    train->add_option("--alpha", st.alpha, "LVQ hinge margin");
    train->add_option("--eta0", st.eta0, "LVQ initial learning rate (default: 0.1 * coverage)");
    train->add_option("--meta-stumps", st.meta_stumps, "meta-labeler boosting rounds");
    train->add_option("--out", st.out, "model output path (default <dir>/model.txt)");

    CLI::App* predict = app.add_subcommand("predict", "apply a saved model to a CSV dataset");
    add_common(predict);
    predict->add_option("--model", st.model, "model file");
    predict->add_option("--data", st.data, "input CSV");
    predict->add_option("--out", st.out, "predictions TSV path (default <dir>/predictions.tsv)");

    CLI::App* cv = app.add_subcommand("cv", "repeated nested cross-validation protocol");
    add_common(cv);
    cv->add_option("--data", st.data, "input CSV");
    cv->add_option("--method", st.method, "binary-boost | ml-boost | ml-lvq");
    cv->add_option("--runs", st.runs, "independent k-fold repetitions");
    cv->add_option("--folds", st.folds, "folds per run");
    cv->add_option("--pca", st.pca, "none | positive | variance threshold in (0, 1]");
    cv->add_option("--t-binary", st.t_binary, "binary rounds grid, e.g. 100,200,300,400,500");
    cv->add_option("--t-multilabel", st.t_multilabel, "multi-label rounds grid");
    cv->add_option("--s-grid", st.s_grid, "LVQ prototype grid, e.g. 1,3,5,7,9");

    CLI::App* curve = app.add_subcommand("curve", "merge reports into detect-rate plot data");
    add_common(curve);
    curve->add_option("--report", st.reports, "report JSON file(s)")->expected(-1);
    curve->add_option("--out", st.out, "plot data TSV path (default <dir>/curve.tsv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (app.got_subcommand(gen)) return cmd_generate(st, *gen);
    if (app.got_subcommand(train)) return cmd_train(st, *train);
    if (app.got_subcommand(predict)) return cmd_predict(st, *predict);
    if (app.got_subcommand(cv)) return cmd_cv(st, *cv);
    if (app.got_subcommand(curve)) return cmd_curve(st, *curve);
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const train_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
