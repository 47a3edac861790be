#ifndef OILML_BOOSTING_HPP
#define OILML_BOOSTING_HPP

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "oilml/dataset.hpp"
#include "oilml/errors.hpp"

namespace oilml {

// Depth-1 threshold rule on one attribute with per-label confidence values.
// The strict split x[feature] > threshold selects c_above, otherwise c_below.
struct DecisionStump {
    int feature = 0;
    double threshold = 0.0;
    std::vector<double> c_below;
    std::vector<double> c_above;
};

struct StumpEnsemble {
    LabelSpace space;
    std::size_t dim = 0;
    std::vector<DecisionStump> stumps;
    std::vector<double> z_history;  // realized per-round normalizers, each in (0, 1]
};

// Distribution over (example, label) pairs, row-major N x L.
struct WeightMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    WeightMatrix() = default;
    WeightMatrix(std::size_t n, std::size_t l, double fill)
        : rows(n), cols(l), values(n * l, fill) {}

    double& at(std::size_t i, std::size_t l) { return values[i * cols + l]; }
    double at(std::size_t i, std::size_t l) const { return values[i * cols + l]; }
};

// Per-round diagnostics captured during training.
struct TrainTrace {
    std::vector<double> weight_sum;   // total weight after the round's renormalization
    std::vector<double> z;            // realized normalizer of the round
    std::vector<double> train_error;  // fraction of (example, label) pairs misclassified so far
};

inline constexpr const char* kBoostModelTag = "oilml-boost";
inline constexpr const char* kBinaryModelTag = "oilml-binary";

// Candidate split thresholds for one attribute: one value below the minimum,
// then the midpoints of consecutive distinct sorted values.
std::vector<double> threshold_candidates(std::vector<double> values);

// Shared trainer core: signs[i][l] is +1/-1 over an N x L sign matrix.
StumpEnsemble train_on_signs(const std::vector<std::span<const double>>& rows,
                             const std::vector<std::vector<signed char>>& signs,
                             const LabelSpace& space, std::size_t rounds,
                             TrainTrace* trace = nullptr);

// Multi-label trainer: sign +1 iff the label is in the example's label set.
StumpEnsemble train_adaboost_mh(const Dataset& dataset, std::size_t rounds,
                                TrainTrace* trace = nullptr);

// Adulteration detector: the L=1 specialization over the pure-vs-mixture view.
StumpEnsemble train_binary_adaboost(const Dataset& dataset, std::size_t rounds,
                                    TrainTrace* trace = nullptr);

// Exhaustive search over attributes and candidate thresholds minimizing
// Z = 2 * sum over branches and labels of sqrt(W+ * W-); ties go to the
// smaller attribute index, then the smaller threshold.
DecisionStump best_stump(const Dataset& dataset, const WeightMatrix& weights);

std::vector<double> predict_scores(const StumpEnsemble& model, std::span<const double> x);

// Score using only the first `rounds` stumps (a prefix of the ensemble).
std::vector<double> predict_scores(const StumpEnsemble& model, std::span<const double> x,
                                   std::size_t rounds);

// {l : score[l] > 0}; may be empty.
std::vector<int> predict_labels(const StumpEnsemble& model, std::span<const double> x);

void save_ensemble(const StumpEnsemble& model, const std::filesystem::path& path,
                   const std::string& format_tag);
StumpEnsemble load_ensemble(const std::filesystem::path& path, std::string* format_tag = nullptr);

// Stream forms so other model files can embed an ensemble section.
void write_ensemble_text(std::ostream& out, const StumpEnsemble& model,
                         const std::string& format_tag);
StumpEnsemble read_ensemble_text(std::istream& in, std::string* format_tag = nullptr);

}  // namespace oilml

#endif
