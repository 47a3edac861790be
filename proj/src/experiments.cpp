#include "oilml/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "oilml/boosting.hpp"
#include "oilml/mllvq.hpp"
#include "oilml/rng.hpp"

namespace oilml {

namespace {

using nlohmann::json;

constexpr std::uint64_t kNestedSplitTag = 17;
constexpr std::uint64_t kFinalModelTag = 7;
constexpr std::uint64_t kGridModelTagBase = 100;

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return values;
}

void validate_grid(const GridSpec& grid, Method method) {
    const std::vector<std::size_t>* active = nullptr;
    switch (method) {
        case Method::binary_boost: active = &grid.t_binary; break;
        case Method::ml_boost: active = &grid.t_multilabel; break;
        case Method::ml_lvq: active = &grid.s_lvq; break;
    }
    if (active->empty())
        throw data_error("grid for " + method_name(method) + " is empty");
    for (std::size_t v : *active) {
        if (v == 0) throw data_error("grid for " + method_name(method) + " contains 0");
    }
    if (method == Method::ml_lvq) {
        if (grid.lvq_epochs == 0) throw data_error("lvq_epochs must be at least 1");
        if (!(grid.lvq_alpha >= 0.0)) throw data_error("lvq_alpha must be non-negative");
        if (grid.meta_stumps == 0) throw data_error("meta_stumps must be at least 1");
    }
}

struct Projected {
    const Dataset* train = nullptr;
    const Dataset* test = nullptr;
    Dataset train_own;
    Dataset test_own;
    PcaModel pca;
    std::size_t components = 0;
};

// Fits the optional PCA step on training rows only.
Projected apply_pca(const Dataset& train, const Dataset& test,
                    const std::optional<PcaRule>& rule) {
    Projected out;
    if (!rule.has_value()) {
        out.train = &train;
        out.test = &test;
        return out;
    }
    out.pca = fit_pca(train);
    out.components = select_components(out.pca, *rule);
    if (out.components == 0)
        throw train_error("PCA selected zero components; cannot train on an empty projection");
    out.train_own = project_dataset(out.pca, train, out.components);
    out.test_own = project_dataset(out.pca, test, out.components);
    out.train = &out.train_own;
    out.test = &out.test_own;
    return out;
}

double binary_accuracy_at(const StumpEnsemble& model, const Dataset& val, std::size_t rounds) {
    if (val.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (const Example& ex : val.examples) {
        const double f = predict_scores(model, ex.features, rounds)[0];
        if ((f > 0.0) == ex.is_mixture()) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(val.size());
}

double multilabel_micro_f1_at(const StumpEnsemble& model, const Dataset& val,
                              std::size_t rounds) {
    std::vector<PredictionRecord> records;
    records.reserve(val.size());
    for (const Example& ex : val.examples) {
        PredictionRecord rec;
        rec.id = ex.id;
        rec.truth = ex.labels;
        rec.scores = predict_scores(model, ex.features, rounds);
        for (std::size_t l = 0; l < rec.scores.size(); ++l) {
            if (rec.scores[l] > 0.0) rec.predicted.push_back(static_cast<int>(l));
        }
        records.push_back(std::move(rec));
    }
    return micro_f1(records);
}

PredictionRecord lvq_record(const MlLvqModel& model, const Example& scaled) {
    PredictionRecord rec;
    rec.id = scaled.id;
    rec.truth = scaled.labels;
    rec.truth_ratios = scaled.ratios;
    rec.scores = score_labels(model.book, scaled.features);
    rec.ranked = predict_ranked(model, scaled.features);
    rec.predicted = rec.ranked;
    std::sort(rec.predicted.begin(), rec.predicted.end());
    return rec;
}

SelectedParams select_boost(const Dataset& sub, const Dataset& val,
                            const std::vector<std::size_t>& t_grid, Method method) {
    const auto ts = sorted_unique(t_grid);
    StumpEnsemble model = method == Method::binary_boost
                              ? train_binary_adaboost(sub, ts.back())
                              : train_adaboost_mh(sub, ts.back());
    SelectedParams best;
    bool have = false;
    for (std::size_t t : ts) {
        const double score = method == Method::binary_boost
                                 ? binary_accuracy_at(model, val, t)
                                 : multilabel_micro_f1_at(model, val, t);
        if (!have || score > best.validation_score) {
            best.value = t;
            best.validation_score = score;
            have = true;
        }
    }
    return best;
}

SelectedParams select_lvq(const Dataset& sub, const Dataset& val, const GridSpec& grid,
                          std::uint64_t seed) {
    Dataset sub_scaled = scale_to_unit(sub);
    Dataset val_scaled = apply_scaling(val, sub_scaled.scaling);
    MetaLabeler meta = train_meta_labeler(sub_scaled, grid.meta_stumps);

    SelectedParams best;
    bool have = false;
    for (std::size_t s : sorted_unique(grid.s_lvq)) {
        try {
            LvqTrainConfig cfg;
            cfg.S = s;
            cfg.M = grid.lvq_epochs;
            cfg.alpha = grid.lvq_alpha;
            cfg.seed = mix_seed(seed, kGridModelTagBase + s);
            MlLvqModel model;
            model.book = train_mllvq(sub_scaled, cfg);
            model.meta = meta;
            model.scaling = sub_scaled.scaling;

            std::vector<PredictionRecord> records;
            records.reserve(val_scaled.size());
            for (const Example& ex : val_scaled.examples) records.push_back(lvq_record(model, ex));
            const double score = micro_f1(records);
            if (!have || score > best.validation_score) {
                best.value = s;
                best.validation_score = score;
                have = true;
            }
        } catch (const std::exception& e) {
            std::cerr << "warning: grid point S=" << s << " failed: " << e.what() << "\n";
        }
    }
    if (!have) throw train_error("every grid point failed during model selection");
    return best;
}

std::string digest_string(std::uint64_t digest) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

json grid_to_json(const GridSpec& grid) {
    json j;
    j["t_binary"] = grid.t_binary;
    j["t_multilabel"] = grid.t_multilabel;
    j["s_lvq"] = grid.s_lvq;
    if (!grid.pca.has_value()) {
        j["pca_rule"] = nullptr;
    } else if (grid.pca->positive_only) {
        j["pca_rule"] = "positive";
    } else {
        j["pca_rule"] = grid.pca->threshold;
    }
    j["lvq_epochs"] = grid.lvq_epochs;
    j["lvq_alpha"] = grid.lvq_alpha;
    j["meta_stumps"] = grid.meta_stumps;
    return j;
}

GridSpec grid_from_json(const json& j) {
    GridSpec grid;
    grid.t_binary = j.at("t_binary").get<std::vector<std::size_t>>();
    grid.t_multilabel = j.at("t_multilabel").get<std::vector<std::size_t>>();
    grid.s_lvq = j.at("s_lvq").get<std::vector<std::size_t>>();
    const json& rule = j.at("pca_rule");
    if (rule.is_null()) {
        grid.pca.reset();
    } else if (rule.is_string()) {
        if (rule.get<std::string>() != "positive")
            throw data_error("unknown pca_rule \"" + rule.get<std::string>() + "\"");
        grid.pca = PcaRule{true, 0.0};
    } else {
        grid.pca = PcaRule{false, rule.get<double>()};
    }
    grid.lvq_epochs = j.at("lvq_epochs").get<std::size_t>();
    grid.lvq_alpha = j.at("lvq_alpha").get<double>();
    grid.meta_stumps = j.at("meta_stumps").get<std::size_t>();
    return grid;
}

const std::vector<std::pair<std::string, double EvaluationReport::*>>& measure_fields() {
    static const std::vector<std::pair<std::string, double EvaluationReport::*>> fields = {
        {"accuracy", &EvaluationReport::accuracy},
        {"avg_prec", &EvaluationReport::avg_prec},
        {"detect_rate", &EvaluationReport::detect_rate},
        {"mac_f1", &EvaluationReport::mac_f1},
        {"mic_f1", &EvaluationReport::mic_f1},
        {"main_ingredient_rate", &EvaluationReport::main_ingredient_rate},
        {"one_error", &EvaluationReport::one_error},
    };
    return fields;
}

}  // namespace

std::string method_name(Method method) {
    switch (method) {
        case Method::binary_boost: return "binary-boost";
        case Method::ml_boost: return "ml-boost";
        case Method::ml_lvq: return "ml-lvq";
    }
    throw data_error("unknown method value");
}

Method method_from_name(const std::string& name) {
    if (name == "binary-boost") return Method::binary_boost;
    if (name == "ml-boost") return Method::ml_boost;
    if (name == "ml-lvq") return Method::ml_lvq;
    throw data_error("unknown method \"" + name +
                     "\" (expected binary-boost, ml-boost or ml-lvq)");
}

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.space = dataset.space;
    out.dim = dataset.dim;
    out.examples.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= dataset.size()) throw data_error("subset row index out of range");
        out.examples.push_back(dataset.examples[r]);
    }
    return out;
}

std::vector<FoldAssignment> stratified_kfold(const Dataset& dataset, std::size_t k,
                                             std::uint64_t seed) {
    if (k < 2) throw data_error("stratified_kfold: k must be at least 2");
    if (k > dataset.size())
        throw data_error("stratified_kfold: k exceeds the number of examples");

    std::map<std::vector<int>, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        strata[dataset.examples[i].labels].push_back(i);
    }

    Rng rng(seed);
    std::vector<std::size_t> fold_of(dataset.size(), 0);
    for (auto& [labels, members] : strata) {
        rng.shuffle(members);
        const std::size_t offset = rng.uniform_index(k);
        for (std::size_t i = 0; i < members.size(); ++i) {
            fold_of[members[i]] = (offset + i) % k;
        }
    }

    std::vector<FoldAssignment> out(k);
    for (std::size_t f = 0; f < k; ++f) out[f].fold = f;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (std::size_t f = 0; f < k; ++f) {
            auto& rows = f == fold_of[i] ? out[f].test_rows : out[f].train_rows;
            rows.push_back(i);
        }
    }
    for (auto& fa : out) {
        for (std::size_t r : fa.train_rows) fa.train_ids.push_back(dataset.examples[r].id);
        for (std::size_t r : fa.test_rows) fa.test_ids.push_back(dataset.examples[r].id);
    }
    return out;
}

SelectedParams nested_select(const Dataset& train, const GridSpec& grid, Method method,
                             std::uint64_t seed) {
    validate_grid(grid, method);
    const auto splits = stratified_kfold(train, 3, mix_seed(seed, kNestedSplitTag));
    const Dataset sub = subset(train, splits[0].train_rows);
    const Dataset val = subset(train, splits[0].test_rows);
    if (sub.size() == 0 || val.size() == 0)
        throw train_error("nested model selection produced an empty split");

    const Projected proj = apply_pca(sub, val, grid.pca);
    if (method == Method::ml_lvq) return select_lvq(*proj.train, *proj.test, grid, seed);
    const auto& t_grid = method == Method::binary_boost ? grid.t_binary : grid.t_multilabel;
    return select_boost(*proj.train, *proj.test, t_grid, method);
}

FoldResult run_single_fold(const Dataset& dataset, const FoldAssignment& fold,
                           const GridSpec& grid, Method method, std::uint64_t fold_seed,
                           FoldArtifacts* artifacts) {
    const Dataset train = subset(dataset, fold.train_rows);
    const Dataset test = subset(dataset, fold.test_rows);
    if (train.size() == 0 || test.size() == 0)
        throw data_error("fold has an empty train or test side");

    FoldResult out;
    out.run = fold.run;
    out.fold = fold.fold;
    out.selected = nested_select(train, grid, method, fold_seed);

    const Projected proj = apply_pca(train, test, grid.pca);
    out.pca_components = proj.components;
    if (artifacts != nullptr) {
        artifacts->pca = proj.pca;
        artifacts->pca_components = proj.components;
        artifacts->scaling.clear();
    }

    switch (method) {
        case Method::binary_boost: {
            const StumpEnsemble model = train_binary_adaboost(*proj.train, out.selected.value);
            for (const Example& ex : proj.test->examples) {
                PredictionRecord rec;
                rec.id = ex.id;
                if (ex.is_mixture()) rec.truth = {0};
                rec.scores = {predict_scores(model, ex.features)[0]};
                if (rec.scores[0] > 0.0) rec.predicted = {0};
                out.records.push_back(std::move(rec));
            }
            break;
        }
        case Method::ml_boost: {
            const StumpEnsemble model = train_adaboost_mh(*proj.train, out.selected.value);
            for (const Example& ex : proj.test->examples) {
                PredictionRecord rec;
                rec.id = ex.id;
                rec.truth = ex.labels;
                rec.truth_ratios = ex.ratios;
                rec.scores = predict_scores(model, ex.features);
                for (std::size_t l = 0; l < rec.scores.size(); ++l) {
                    if (rec.scores[l] > 0.0) rec.predicted.push_back(static_cast<int>(l));
                }
                out.records.push_back(std::move(rec));
            }
            break;
        }
        case Method::ml_lvq: {
            LvqTrainConfig cfg;
            cfg.S = out.selected.value;
            cfg.M = grid.lvq_epochs;
            cfg.alpha = grid.lvq_alpha;
            cfg.seed = mix_seed(fold_seed, kFinalModelTag);
            const MlLvqModel model = train_mllvq_model(*proj.train, cfg, grid.meta_stumps);
            if (artifacts != nullptr) artifacts->scaling = model.scaling;
            const Dataset test_scaled = apply_scaling(*proj.test, model.scaling);
            for (const Example& ex : test_scaled.examples) {
                out.records.push_back(lvq_record(model, ex));
            }
            break;
        }
    }

    out.report = evaluate(out.records);
    return out;
}

CvReport run_protocol(const Dataset& dataset, const GridSpec& grid, Method method,
                      std::size_t runs, std::size_t folds, std::uint64_t seed) {
    if (runs == 0) throw data_error("run_protocol: runs must be at least 1");
    validate_grid(grid, method);

    CvReport report;
    report.method = method;
    report.runs = runs;
    report.folds = folds;
    report.seed = seed;
    report.digest = dataset_digest(dataset);
    report.grid = grid;

    std::vector<PredictionRecord> pooled;
    for (std::size_t run = 0; run < runs; ++run) {
        const std::uint64_t run_seed = mix_seed(seed, run);
        auto assignments = stratified_kfold(dataset, folds, run_seed);
        for (std::size_t f = 0; f < assignments.size(); ++f) {
            assignments[f].run = run;
            const std::uint64_t fold_seed = mix_seed(run_seed, f);
            FoldResult result = run_single_fold(dataset, assignments[f], grid, method, fold_seed);
            pooled.insert(pooled.end(), result.records.begin(), result.records.end());
            report.fold_results.push_back(std::move(result));
        }
    }

    for (const auto& [key, member] : measure_fields()) {
        double sum = 0.0;
        for (const FoldResult& fr : report.fold_results) sum += fr.report.*member;
        const double n = static_cast<double>(report.fold_results.size());
        const double mean = sum / n;
        double ss = 0.0;
        for (const FoldResult& fr : report.fold_results) {
            const double d = fr.report.*member - mean;
            ss += d * d;
        }
        const double stddev = report.fold_results.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        report.aggregate[key] = MeasureStats{mean, stddev};
    }

    report.pooled = evaluate(pooled);
    return report;
}

std::uint64_t dataset_digest(const Dataset& dataset) {
    const std::string text = to_csv_text(dataset);
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string cv_report_to_json(const CvReport& report) {
    json j;
    j["method"] = method_name(report.method);
    j["runs"] = report.runs;
    j["folds"] = report.folds;
    j["seed"] = report.seed;
    j["dataset_digest"] = digest_string(report.digest);
    j["grid"] = grid_to_json(report.grid);

    json folds = json::array();
    for (const FoldResult& fr : report.fold_results) {
        json f;
        f["run"] = fr.run;
        f["fold"] = fr.fold;
        f["selected"] = fr.selected.value;
        f["validation_score"] = fr.selected.validation_score;
        f["pca_components"] = fr.pca_components;
        f["report"] = json::parse(report_to_json(fr.report));
        folds.push_back(std::move(f));
    }
    j["fold_results"] = std::move(folds);

    json agg;
    for (const auto& [key, stats] : report.aggregate) {
        agg[key] = json{{"mean", stats.mean}, {"stddev", stats.stddev}};
    }
    j["aggregate"] = std::move(agg);
    j["pooled"] = json::parse(report_to_json(report.pooled));
    return j.dump(2) + "\n";
}

CvReport cv_report_from_json(const std::string& json_text) {
    try {
        const json j = json::parse(json_text);
        CvReport report;
        report.method = method_from_name(j.at("method").get<std::string>());
        report.runs = j.at("runs").get<std::size_t>();
        report.folds = j.at("folds").get<std::size_t>();
        report.seed = j.at("seed").get<std::uint64_t>();
        report.digest = std::stoull(j.at("dataset_digest").get<std::string>(), nullptr, 16);
        report.grid = grid_from_json(j.at("grid"));
        for (const json& f : j.at("fold_results")) {
            FoldResult fr;
            fr.run = f.at("run").get<std::size_t>();
            fr.fold = f.at("fold").get<std::size_t>();
            fr.selected.value = f.at("selected").get<std::size_t>();
            fr.selected.validation_score = f.at("validation_score").get<double>();
            fr.pca_components = f.at("pca_components").get<std::size_t>();
            fr.report = report_from_json(f.at("report").dump());
            report.fold_results.push_back(std::move(fr));
        }
        for (const auto& [key, stats] : j.at("aggregate").items()) {
            report.aggregate[key] =
                MeasureStats{stats.at("mean").get<double>(), stats.at("stddev").get<double>()};
        }
        report.pooled = report_from_json(j.at("pooled").dump());
        return report;
    } catch (const json::exception& e) {
        throw data_error(std::string("malformed CV report JSON: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw data_error("malformed CV report JSON: bad dataset digest");
    }
}

std::string manifest_json(const Dataset& dataset, const GridSpec& grid, Method method,
                          std::size_t runs, std::size_t folds, std::uint64_t seed) {
    json j;
    j["dataset_digest"] = digest_string(dataset_digest(dataset));
    j["examples"] = dataset.size();
    j["dim"] = dataset.dim;
    j["labels"] = dataset.space.names();
    j["method"] = method_name(method);
    j["runs"] = runs;
    j["folds"] = folds;
    j["seed"] = seed;
    j["grid"] = grid_to_json(grid);
    return j.dump(2) + "\n";
}

}  // namespace oilml
