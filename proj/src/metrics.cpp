#include "oilml/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "textio.hpp"

namespace oilml {

namespace {

using textio::format_double;

bool contains(const std::vector<int>& sorted, int l) {
    return std::binary_search(sorted.begin(), sorted.end(), l);
}

double f1_from_counts(long tp, long fp, long fn) {
    const double p = (tp + fp > 0) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = (tp + fn > 0) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

std::size_t label_count(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw data_error("no prediction records");
    const std::size_t L = records.front().scores.size();
    for (const PredictionRecord& rec : records) {
        if (rec.scores.size() != L) throw data_error("records disagree on the label count");
    }
    return L;
}

}  // namespace

std::vector<int> rank_labels(const std::vector<double>& scores) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return order;
}

double micro_f1(const std::vector<PredictionRecord>& records) {
    const std::size_t L = label_count(records);
    long tp = 0, fp = 0, fn = 0;
    for (const PredictionRecord& rec : records) {
        for (std::size_t l = 0; l < L; ++l) {
            const bool truth = contains(rec.truth, static_cast<int>(l));
            const bool pred = contains(rec.predicted, static_cast<int>(l));
            if (truth && pred) ++tp;
            else if (!truth && pred) ++fp;
            else if (truth && !pred) ++fn;
        }
    }
    return f1_from_counts(tp, fp, fn);
}

double macro_f1(const std::vector<PredictionRecord>& records) {
    const std::size_t L = label_count(records);
    double sum = 0.0;
    std::size_t included = 0;
    for (std::size_t l = 0; l < L; ++l) {
        long tp = 0, fp = 0, fn = 0;
        for (const PredictionRecord& rec : records) {
            const bool truth = contains(rec.truth, static_cast<int>(l));
            const bool pred = contains(rec.predicted, static_cast<int>(l));
            if (truth && pred) ++tp;
            else if (!truth && pred) ++fp;
            else if (truth && !pred) ++fn;
        }
        if (tp + fp + fn == 0) continue;  // label never true nor predicted
        sum += f1_from_counts(tp, fp, fn);
        ++included;
    }
    return included > 0 ? sum / static_cast<double>(included) : 0.0;
}

double one_error(const std::vector<PredictionRecord>& records) {
    label_count(records);
    std::size_t eligible = 0;
    std::size_t errors = 0;
    for (const PredictionRecord& rec : records) {
        if (rec.truth.empty()) continue;
        ++eligible;
        const int top = rank_labels(rec.scores).front();
        if (!contains(rec.truth, top)) ++errors;
    }
    return eligible > 0 ? static_cast<double>(errors) / static_cast<double>(eligible) : 0.0;
}

double average_precision(const std::vector<PredictionRecord>& records) {
    label_count(records);
    double sum = 0.0;
    std::size_t eligible = 0;
    for (const PredictionRecord& rec : records) {
        if (rec.truth.empty()) continue;
        ++eligible;
        const std::vector<int> order = rank_labels(rec.scores);
        std::vector<int> rank(rec.scores.size(), 0);  // 1-based
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            rank[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos) + 1;
        }
        double record_sum = 0.0;
        for (int l : rec.truth) {
            int better_or_equal = 0;
            for (int m : rec.truth) {
                if (rank[static_cast<std::size_t>(m)] <= rank[static_cast<std::size_t>(l)]) ++better_or_equal;
            }
            record_sum += static_cast<double>(better_or_equal) /
                          static_cast<double>(rank[static_cast<std::size_t>(l)]);
        }
        sum += record_sum / static_cast<double>(rec.truth.size());
    }
    return eligible > 0 ? sum / static_cast<double>(eligible) : 1.0;
}

double multilabel_accuracy(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw data_error("no prediction records");
    double sum = 0.0;
    for (const PredictionRecord& rec : records) {
        std::vector<int> inter, uni;
        std::set_intersection(rec.truth.begin(), rec.truth.end(),
                              rec.predicted.begin(), rec.predicted.end(),
                              std::back_inserter(inter));
        std::set_union(rec.truth.begin(), rec.truth.end(),
                       rec.predicted.begin(), rec.predicted.end(),
                       std::back_inserter(uni));
        sum += uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    }
    return sum / static_cast<double>(records.size());
}

double detect_rate(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw data_error("no prediction records");
    std::size_t exact = 0;
    for (const PredictionRecord& rec : records) {
        if (rec.truth == rec.predicted) ++exact;
    }
    return static_cast<double>(exact) / static_cast<double>(records.size());
}

double main_ingredient_rate(const std::vector<PredictionRecord>& records,
                            std::size_t* support, std::size_t* excluded) {
    std::size_t eligible = 0, correct = 0, skipped = 0;
    for (const PredictionRecord& rec : records) {
        if (rec.truth.size() < 2) continue;  // pure records carry no major ingredient
        if (rec.truth_ratios.empty() || rec.ranked.empty()) {
            ++skipped;
            continue;
        }
        ++eligible;
        double rmax = 0.0;
        for (const auto& [l, r] : rec.truth_ratios) rmax = std::max(rmax, r);
        const auto it = rec.truth_ratios.find(rec.ranked.front());
        if (it != rec.truth_ratios.end() && it->second == rmax) ++correct;
    }
    if (support) *support = eligible;
    if (excluded) *excluded = skipped;
    return eligible > 0 ? static_cast<double>(correct) / static_cast<double>(eligible) : 1.0;
}

std::vector<RatioBin> detect_rate_by_ratio(const std::vector<PredictionRecord>& records,
                                           double bin_width) {
    if (bin_width <= 0.0) throw data_error("bin width must be positive");
    struct BinCounts {
        std::size_t total = 0;
        std::size_t exact = 0;
    };
    std::map<int, BinCounts> bins;  // key -1 = pure bin
    for (const PredictionRecord& rec : records) {
        int key = -1;
        if (rec.truth.size() >= 2) {
            if (rec.truth_ratios.empty()) continue;  // cannot place without ratios
            double minor = 1.0;
            for (const auto& [l, r] : rec.truth_ratios) minor = std::min(minor, r);
            key = std::max(0, static_cast<int>(std::ceil(minor / bin_width - 1e-9)) - 1);
        }
        BinCounts& bc = bins[key];
        ++bc.total;
        if (rec.truth == rec.predicted) ++bc.exact;
    }
    std::vector<RatioBin> curve;
    for (const auto& [key, bc] : bins) {
        RatioBin bin;
        if (key >= 0) {
            bin.lo = key * bin_width;
            bin.hi = (key + 1) * bin_width;
        }
        bin.rate = static_cast<double>(bc.exact) / static_cast<double>(bc.total);
        bin.support = bc.total;
        bin.low_support = bc.total < 5;
        curve.push_back(bin);
    }
    return curve;
}

EvaluationReport evaluate(const std::vector<PredictionRecord>& records, double bin_width) {
    EvaluationReport rep;
    rep.mac_f1 = macro_f1(records);
    rep.mic_f1 = micro_f1(records);
    rep.one_error = one_error(records);
    rep.avg_prec = average_precision(records);
    rep.accuracy = multilabel_accuracy(records);
    rep.detect_rate = detect_rate(records);
    rep.main_ingredient_rate =
        main_ingredient_rate(records, &rep.main_ingredient_support, &rep.main_ingredient_excluded);
    rep.ratio_curve = detect_rate_by_ratio(records, bin_width);
    return rep;
}

std::string report_to_text(const EvaluationReport& report) {
    std::ostringstream out;
    out << "mac_f1=" << format_double(report.mac_f1) << "\n";
    out << "mic_f1=" << format_double(report.mic_f1) << "\n";
    out << "one_error=" << format_double(report.one_error) << "\n";
    out << "avg_prec=" << format_double(report.avg_prec) << "\n";
    out << "accuracy=" << format_double(report.accuracy) << "\n";
    out << "detect_rate=" << format_double(report.detect_rate) << "\n";
    out << "main_ingredient_rate=" << format_double(report.main_ingredient_rate) << "\n";
    out << "main_ingredient_support=" << report.main_ingredient_support << "\n";
    out << "main_ingredient_excluded=" << report.main_ingredient_excluded << "\n";
    for (std::size_t i = 0; i < report.ratio_curve.size(); ++i) {
        const RatioBin& bin = report.ratio_curve[i];
        out << "ratio_bin." << i << "=" << format_double(bin.lo) << " " << format_double(bin.hi)
            << " " << format_double(bin.rate) << " " << bin.support << " "
            << (bin.low_support ? "low-support" : "ok") << "\n";
    }
    return out.str();
}

namespace {

nlohmann::json report_json(const EvaluationReport& report) {
    nlohmann::json j;
    j["mac_f1"] = report.mac_f1;
    j["mic_f1"] = report.mic_f1;
    j["one_error"] = report.one_error;
    j["avg_prec"] = report.avg_prec;
    j["accuracy"] = report.accuracy;
    j["detect_rate"] = report.detect_rate;
    j["main_ingredient_rate"] = report.main_ingredient_rate;
    j["main_ingredient_support"] = report.main_ingredient_support;
    j["main_ingredient_excluded"] = report.main_ingredient_excluded;
    nlohmann::json curve = nlohmann::json::array();
    for (const RatioBin& bin : report.ratio_curve) {
        curve.push_back({{"lo", bin.lo},
                         {"hi", bin.hi},
                         {"rate", bin.rate},
                         {"support", bin.support},
                         {"low_support", bin.low_support}});
    }
    j["ratio_curve"] = curve;
    return j;
}

EvaluationReport report_from(const nlohmann::json& j) {
    EvaluationReport rep;
    rep.mac_f1 = j.at("mac_f1").get<double>();
    rep.mic_f1 = j.at("mic_f1").get<double>();
    rep.one_error = j.at("one_error").get<double>();
    rep.avg_prec = j.at("avg_prec").get<double>();
    rep.accuracy = j.at("accuracy").get<double>();
    rep.detect_rate = j.at("detect_rate").get<double>();
    rep.main_ingredient_rate = j.at("main_ingredient_rate").get<double>();
    rep.main_ingredient_support = j.at("main_ingredient_support").get<std::size_t>();
    rep.main_ingredient_excluded = j.at("main_ingredient_excluded").get<std::size_t>();
    for (const auto& b : j.at("ratio_curve")) {
        RatioBin bin;
        bin.lo = b.at("lo").get<double>();
        bin.hi = b.at("hi").get<double>();
        bin.rate = b.at("rate").get<double>();
        bin.support = b.at("support").get<std::size_t>();
        bin.low_support = b.at("low_support").get<bool>();
        rep.ratio_curve.push_back(bin);
    }
    return rep;
}

}  // namespace

std::string report_to_json(const EvaluationReport& report) {
    return report_json(report).dump(2);
}

EvaluationReport report_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("bad report JSON: ") + e.what());
    }
    try {
        return report_from(j);
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("report JSON missing fields: ") + e.what());
    }
}

}  // namespace oilml
