#ifndef OILML_DATASET_HPP
#define OILML_DATASET_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

#include "oilml/errors.hpp"

namespace oilml {

/// Ordered list of base-oil names. Label indices are positions in name order.
class LabelSpace {
public:
    LabelSpace() = default;

    /// Names must be unique, non-empty and free of the CSV metacharacters
    /// `,:|"` and whitespace.
    explicit LabelSpace(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t l) const { return names_.at(l); }
    const std::vector<std::string>& names() const { return names_; }

    /// Index of a name, or -1 when unknown.
    int index_of(const std::string& name) const;

    bool operator==(const LabelSpace&) const = default;

private:
    std::vector<std::string> names_;
};

/// One sample: a feature vector plus its label set and, when recorded, the
/// true mixing fractions. Pure samples may omit ratios (implied 1.0).
struct Example {
    std::string id;
    std::vector<double> features;
    std::vector<int> labels;        ///< sorted, distinct, non-empty
    std::map<int, double> ratios;   ///< keyed exactly by `labels` when present

    bool has_ratios() const { return !ratios.empty(); }
    bool is_mixture() const { return labels.size() >= 2; }
};

/// Per-attribute (min, max) recorded when scaling, reused on test data.
struct AttributeRange {
    double min = 0.0;
    double max = 0.0;
};

struct Dataset {
    LabelSpace space;
    std::vector<Example> examples;
    std::size_t dim = 0;
    std::vector<AttributeRange> scaling;  ///< empty until scale_to_unit

    std::size_t size() const { return examples.size(); }
};

/// Checks all Dataset invariants; throws data_error naming the first violation.
void validate(const Dataset& dataset);

/// Reads the `id,labels,f0,...` CSV format. The labels column is
/// `name:ratio|name:ratio`, ratio optional for single-label rows.
/// Ratio sums further than 1e-6 from 1 are rejected; sums within 1e-6 but
/// beyond 1e-9 are normalized once so the stored dataset is valid.
Dataset load_csv(const std::string& path, const LabelSpace& space);

/// Writes the same CSV format with 17 significant digits, so that a
/// save/load round trip is bit-exact.
void save_csv(const Dataset& dataset, const std::string& path);

/// The exact bytes save_csv would write; also the basis of dataset digests.
std::string to_csv_text(const Dataset& dataset);

/// Scans the labels column and returns the names in first-appearance order.
LabelSpace infer_label_space(const std::string& path);

/// Affine map of each attribute onto [-1, +1]: x' = 2(x-min)/(max-min) - 1.
/// Constant attributes map to 0. The input (min, max) pairs are stored in
/// the result for reuse on test data.
Dataset scale_to_unit(const Dataset& dataset);

/// Applies previously stored (min, max) pairs without clamping, so test
/// values outside the training range land outside [-1, +1].
Dataset apply_scaling(const Dataset& dataset, const std::vector<AttributeRange>& scaling);

/// The pure-vs-adulterant binary view: sign +1 iff the example carries two
/// or more labels.
struct SignedExample {
    std::span<const double> features;
    int sign = 0;
};
std::vector<SignedExample> binary_view(const Dataset& dataset);

}  // namespace oilml

#endif
