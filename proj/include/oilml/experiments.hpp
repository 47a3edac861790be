#ifndef OILML_EXPERIMENTS_HPP
#define OILML_EXPERIMENTS_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oilml/dataset.hpp"
#include "oilml/errors.hpp"
#include "oilml/metrics.hpp"
#include "oilml/pca.hpp"

namespace oilml {

enum class Method { binary_boost, ml_boost, ml_lvq };

std::string method_name(Method method);
Method method_from_name(const std::string& name);

/// Model-selection grids plus the fixed training constants shared by every
/// fold. The optional PCA rule applies to the nested split and the final
/// fold model alike, fitted on training rows only.
struct GridSpec {
    std::vector<std::size_t> t_binary{100, 200, 300, 400, 500};
    std::vector<std::size_t> t_multilabel{20, 40, 60, 80, 100};
    std::vector<std::size_t> s_lvq{1, 3, 5, 7, 9};
    std::optional<PcaRule> pca;
    std::size_t lvq_epochs = 40;
    double lvq_alpha = 0.0;
    std::size_t meta_stumps = 100;
};

struct FoldAssignment {
    std::size_t run = 0;
    std::size_t fold = 0;
    std::vector<std::size_t> train_rows;  // ascending indices into the source dataset
    std::vector<std::size_t> test_rows;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};

struct SelectedParams {
    std::size_t value = 0;          // rounds T, or prototype count S for ml-lvq
    double validation_score = 0.0;  // accuracy (binary) or micro-F1 (multi-label)
};

struct FoldResult {
    std::size_t run = 0;
    std::size_t fold = 0;
    SelectedParams selected;
    std::size_t pca_components = 0;  // 0 when PCA is off
    EvaluationReport report;
    std::vector<PredictionRecord> records;
};

struct MeasureStats {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation over folds
};

struct CvReport {
    Method method = Method::binary_boost;
    std::size_t runs = 0;
    std::size_t folds = 0;
    std::uint64_t seed = 0;
    std::uint64_t digest = 0;  // dataset_digest of the evaluated dataset
    GridSpec grid;
    std::vector<FoldResult> fold_results;
    std::map<std::string, MeasureStats> aggregate;
    EvaluationReport pooled;  // all fold records evaluated together
};

/// Per-fold fitted preprocessing, exposed so leakage checks can compare
/// artifacts across runs with perturbed test rows.
struct FoldArtifacts {
    std::vector<AttributeRange> scaling;  // ml-lvq only
    PcaModel pca;                         // empty when PCA is off
    std::size_t pca_components = 0;
};

/// Copies the selected rows into a new dataset (same label space; any stored
/// scaling is dropped since it described the full set).
Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& rows);

/// Label-set-stratified k-fold assignment. Every stratum is shuffled and
/// dealt round-robin from a seeded offset, so per-fold class counts differ by
/// at most one and strata smaller than k still land in distinct folds.
std::vector<FoldAssignment> stratified_kfold(const Dataset& dataset, std::size_t k,
                                             std::uint64_t seed);

/// Inner model selection on a 2/3 : 1/3 stratified split of the training
/// rows. Grid points that fail to train are skipped with a warning; if all
/// fail, throws train_error. Ties prefer the smallest parameter value.
SelectedParams nested_select(const Dataset& train, const GridSpec& grid, Method method,
                             std::uint64_t seed);

/// Full treatment of one fold: nested selection, preprocessing fitted on the
/// training rows, final training and test-row prediction records.
FoldResult run_single_fold(const Dataset& dataset, const FoldAssignment& fold,
                           const GridSpec& grid, Method method, std::uint64_t fold_seed,
                           FoldArtifacts* artifacts = nullptr);

/// The repeated nested cross-validation protocol: `runs` independent
/// stratified k-fold splits, each fold handled by run_single_fold.
CvReport run_protocol(const Dataset& dataset, const GridSpec& grid, Method method,
                      std::size_t runs, std::size_t folds, std::uint64_t seed);

/// FNV-1a 64 over the canonical CSV bytes.
std::uint64_t dataset_digest(const Dataset& dataset);

std::string cv_report_to_json(const CvReport& report);
CvReport cv_report_from_json(const std::string& json_text);

/// Reproducibility manifest: digest, dataset shape, method, grid and seeds.
std::string manifest_json(const Dataset& dataset, const GridSpec& grid, Method method,
                          std::size_t runs, std::size_t folds, std::uint64_t seed);

}  // namespace oilml

#endif
