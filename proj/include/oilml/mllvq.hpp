#ifndef OILML_MLLVQ_HPP
#define OILML_MLLVQ_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "oilml/boosting.hpp"
#include "oilml/dataset.hpp"
#include "oilml/errors.hpp"

namespace oilml {

enum class Polarity { positive, negative };

struct Prototype {
    int label = 0;
    Polarity polarity = Polarity::positive;
    std::vector<double> position;
};

// 2*L*S prototypes, ordered label-major with positives before negatives.
struct PrototypeBook {
    LabelSpace space;
    std::size_t S = 0;
    std::size_t dim = 0;
    std::vector<Prototype> prototypes;

    std::size_t index(int label, Polarity polarity, std::size_t s) const {
        return (static_cast<std::size_t>(label) * 2 +
                (polarity == Polarity::negative ? 1 : 0)) * S + s;
    }
    const Prototype& at(int label, Polarity polarity, std::size_t s) const {
        return prototypes[index(label, polarity, s)];
    }
};

struct LvqTrainConfig {
    std::size_t S = 1;
    std::size_t M = 40;            // epochs
    double alpha = 0.0;            // hinge margin
    std::optional<double> eta0;    // absent: resolved to 0.1 * cov after k-means init
    std::uint64_t seed = 0;
};

struct LvqTrainStats {
    double eta0 = 0.0;                     // resolved initial learning rate
    std::size_t skipped_examples = 0;      // visits whose irrelevant-label set was empty
    std::vector<double> epoch_mean_loss;   // mean at-visit surrogate loss per epoch
};

// Boosted predictor of the label-set size, trained over the observed sizes.
struct MetaLabeler {
    StumpEnsemble model;               // label space: the sizes as decimal strings
    std::vector<std::size_t> counts;   // sorted observed label-set sizes
};

struct MlLvqModel {
    PrototypeBook book;
    MetaLabeler meta;
    std::vector<AttributeRange> scaling;  // training (min, max) per attribute
};

inline constexpr const char* kMlLvqModelTag = "oilml-mllvq";

// K-means per (label, polarity) group; groups smaller than S fall back to
// jittered copies of their points.
PrototypeBook kmeans_init(const Dataset& dataset, std::size_t S, std::uint64_t seed);

// cov: mean Euclidean distance of every example to its nearest prototype.
double mean_nearest_center_distance(const Dataset& dataset, const PrototypeBook& book);

// s(x, l) = d_neg(x, l) - d_pos(x, l) with squared Euclidean nearest distances.
std::vector<double> score_labels(const PrototypeBook& book, std::span<const double> x);

// Pairwise hinge surrogate for one example, normalized by 1/(|Y| * |Ybar|).
double surrogate_loss(const PrototypeBook& book, std::span<const double> x,
                      const std::vector<int>& labels, double alpha);

// Per-prototype coefficients of one SGD visit with frozen nearest assignments;
// the applied update is w += eta * coef * (x - w), so the surrogate gradient
// with respect to prototype k is -coef[k] * (x - w_k).
std::vector<double> visit_coefficients(const PrototypeBook& book, std::span<const double> x,
                                       const std::vector<int>& labels, double alpha);

PrototypeBook train_mllvq(const Dataset& dataset, const LvqTrainConfig& config,
                          LvqTrainStats* stats = nullptr);

MetaLabeler train_meta_labeler(const Dataset& dataset, std::size_t stumps = 100);

std::size_t predict_label_count(const MetaLabeler& meta, std::span<const double> x);

// Top-k(x) labels by descending score; position 0 is the predicted major
// ingredient. Input must already be scaled with the model's stored scaling.
std::vector<int> predict_ranked(const MlLvqModel& model, std::span<const double> x);

// Scales internally and trains prototypes plus the meta-labeler.
MlLvqModel train_mllvq_model(const Dataset& raw, const LvqTrainConfig& config,
                             std::size_t meta_stumps = 100, LvqTrainStats* stats = nullptr);

void save_mllvq(const MlLvqModel& model, const std::filesystem::path& path);
MlLvqModel load_mllvq(const std::filesystem::path& path);
void write_mllvq_text(std::ostream& out, const MlLvqModel& model);
MlLvqModel read_mllvq_text(std::istream& in);

}  // namespace oilml

#endif
