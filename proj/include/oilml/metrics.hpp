#ifndef OILML_METRICS_HPP
#define OILML_METRICS_HPP

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "oilml/dataset.hpp"

namespace oilml {

/// One evaluated example. Bipartition measures read `predicted`, ranking
/// measures read `scores`; `ranked` is the ordered top-k list emitted by the
/// ML-LVQ path (empty when the method does not rank).
struct PredictionRecord {
    std::string id;
    std::vector<int> truth;             ///< sorted label subset
    std::map<int, double> truth_ratios; ///< empty when not recorded
    std::vector<int> predicted;         ///< sorted; may be empty
    std::vector<double> scores;         ///< length L
    std::vector<int> ranked;            ///< ordered, distinct; empty = absent
};

/// One point of the detect-rate-vs-adulteration-ratio curve. Mixtures are
/// binned by their minor-component fraction; pure records form the 0% bin
/// (lo == hi == 0).
struct RatioBin {
    double lo = 0.0;
    double hi = 0.0;
    double rate = 0.0;
    std::size_t support = 0;
    bool low_support = false;  ///< support < 5
};

struct EvaluationReport {
    double mac_f1 = 0.0;
    double mic_f1 = 0.0;
    double one_error = 0.0;
    double avg_prec = 0.0;
    double accuracy = 0.0;
    double detect_rate = 0.0;
    double main_ingredient_rate = 1.0;
    std::size_t main_ingredient_support = 0;
    std::size_t main_ingredient_excluded = 0;
    std::vector<RatioBin> ratio_curve;
};

/// Ranking shared by one_error / average_precision / predict paths:
/// labels ordered by descending score, ties broken by smaller label index.
std::vector<int> rank_labels(const std::vector<double>& scores);

double micro_f1(const std::vector<PredictionRecord>& records);
double macro_f1(const std::vector<PredictionRecord>& records);
double one_error(const std::vector<PredictionRecord>& records);
double average_precision(const std::vector<PredictionRecord>& records);

/// Example-wise Jaccard |Y∩Z| / |Y∪Z|, with 0/0 defined as 1.
double multilabel_accuracy(const std::vector<PredictionRecord>& records);

/// Fraction of records whose predicted set equals the truth exactly.
double detect_rate(const std::vector<PredictionRecord>& records);

/// Over mixture records carrying both a ranked list and truth ratios: the
/// fraction whose top-ranked label is the true major ingredient. Exact ratio
/// ties accept either component. Mixtures lacking ratios or a ranking are
/// excluded and counted in `excluded`.
double main_ingredient_rate(const std::vector<PredictionRecord>& records,
                            std::size_t* support = nullptr,
                            std::size_t* excluded = nullptr);

std::vector<RatioBin> detect_rate_by_ratio(const std::vector<PredictionRecord>& records,
                                           double bin_width);

/// All measures plus the ratio curve in one report.
EvaluationReport evaluate(const std::vector<PredictionRecord>& records,
                          double bin_width = 0.05);

std::string report_to_text(const EvaluationReport& report);
std::string report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const std::string& json_text);

}  // namespace oilml

#endif
