#ifndef OILML_PCA_HPP
#define OILML_PCA_HPP

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "oilml/dataset.hpp"
#include "oilml/errors.hpp"

namespace oilml {

struct PcaModel {
    std::vector<double> mean;                      // length d
    std::vector<std::vector<double>> components;   // orthonormal rows, each length d
    std::vector<double> eigenvalues;               // non-increasing; near-zero values clamped to 0
};

// Component selection: smallest count reaching the cumulative variance
// threshold, or the count of strictly positive eigenvalues.
struct PcaRule {
    bool positive_only = false;
    double threshold = 0.99;
};

PcaModel fit_pca(const Dataset& dataset);

std::size_t select_components(const PcaModel& model, const PcaRule& rule);

std::vector<double> project(const PcaModel& model, std::span<const double> x, std::size_t m);

// Projects every example; ids, labels and ratios are preserved.
Dataset project_dataset(const PcaModel& model, const Dataset& dataset, std::size_t m);

void save_pca(const PcaModel& model, const std::filesystem::path& path);
PcaModel load_pca(const std::filesystem::path& path);
void write_pca_text(std::ostream& out, const PcaModel& model);
PcaModel read_pca_text(std::istream& in);

}  // namespace oilml

#endif
