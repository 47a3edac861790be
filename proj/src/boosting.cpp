#include "oilml/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "textio.hpp"

namespace oilml {

namespace {

using textio::format_double;

// Presorted per-attribute example orders, built once per training.
struct Columns {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<int> order;          // d blocks of n example indices
    std::vector<double> sorted_vals; // d blocks of n values, ascending
};

Columns build_columns(const std::vector<std::span<const double>>& rows, std::size_t d) {
    Columns cols;
    cols.n = rows.size();
    cols.d = d;
    cols.order.resize(d * cols.n);
    cols.sorted_vals.resize(d * cols.n);
    std::vector<int> idx(cols.n);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            const double va = rows[static_cast<std::size_t>(a)][j];
            const double vb = rows[static_cast<std::size_t>(b)][j];
            if (va != vb) return va < vb;
            return a < b;
        });
        for (std::size_t k = 0; k < cols.n; ++k) {
            cols.order[j * cols.n + k] = idx[k];
            cols.sorted_vals[j * cols.n + k] = rows[static_cast<std::size_t>(idx[k])][j];
        }
    }
    return cols;
}

struct SplitChoice {
    double z = 0.0;
    int feature = 0;
    double theta = 0.0;
};

bool better_than(const SplitChoice& a, const SplitChoice& b) {
    if (a.z != b.z) return a.z < b.z;
    if (a.feature != b.feature) return a.feature < b.feature;
    return a.theta < b.theta;
}

double midpoint_theta(double lo, double hi) {
    double theta = 0.5 * (lo + hi);
    if (!(theta < hi)) theta = lo;  // keep lo <= theta < hi despite rounding
    return theta;
}

// Best split over attributes [j_begin, j_end); the same bit pattern is
// produced for a given attribute regardless of how the range is chunked.
SplitChoice search_range(const Columns& cols, std::size_t j_begin, std::size_t j_end,
                         const std::vector<signed char>& sgn, const std::vector<double>& weights,
                         std::size_t L, const std::vector<double>& wt_pos,
                         const std::vector<double>& wt_neg, double base_z) {
    const std::size_t n = cols.n;
    std::vector<double> wb_pos(L), wb_neg(L);
    SplitChoice best{base_z, static_cast<int>(j_begin),
                     cols.sorted_vals[j_begin * n] - 1.0};
    for (std::size_t j = j_begin; j < j_end; ++j) {
        const int* order = &cols.order[j * n];
        const double* vals = &cols.sorted_vals[j * n];
        std::fill(wb_pos.begin(), wb_pos.end(), 0.0);
        std::fill(wb_neg.begin(), wb_neg.end(), 0.0);
        SplitChoice local{base_z, static_cast<int>(j), vals[0] - 1.0};
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const std::size_t i = static_cast<std::size_t>(order[k]);
            const double* wrow = &weights[i * L];
            const signed char* srow = &sgn[i * L];
            for (std::size_t l = 0; l < L; ++l) {
                if (srow[l] > 0) wb_pos[l] += wrow[l];
                else wb_neg[l] += wrow[l];
            }
            if (vals[k + 1] > vals[k]) {
                double z = 0.0;
                for (std::size_t l = 0; l < L; ++l) {
                    const double ap = std::max(0.0, wt_pos[l] - wb_pos[l]);
                    const double an = std::max(0.0, wt_neg[l] - wb_neg[l]);
                    z += std::sqrt(wb_pos[l] * wb_neg[l]) + std::sqrt(ap * an);
                }
                z *= 2.0;
                if (z < local.z) {
                    local.z = z;
                    local.theta = midpoint_theta(vals[k], vals[k + 1]);
                }
            }
        }
        if (better_than(local, best)) best = local;
    }
    return best;
}

SplitChoice search_all(const Columns& cols, const std::vector<signed char>& sgn,
                       const std::vector<double>& weights, std::size_t L,
                       const std::vector<double>& wt_pos, const std::vector<double>& wt_neg) {
    double base_z = 0.0;
    for (std::size_t l = 0; l < L; ++l) base_z += std::sqrt(wt_pos[l] * wt_neg[l]);
    base_z *= 2.0;

    const std::size_t d = cols.d;
    unsigned threads = std::min<unsigned>(std::thread::hardware_concurrency(), 16);
    if (threads < 2 || d < 64) {
        return search_range(cols, 0, d, sgn, weights, L, wt_pos, wt_neg, base_z);
    }
    const std::size_t chunks = std::min<std::size_t>(threads, d);
    std::vector<SplitChoice> results(chunks);
    std::vector<std::thread> pool;
    pool.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t lo = d * c / chunks;
        const std::size_t hi = d * (c + 1) / chunks;
        pool.emplace_back([&, c, lo, hi] {
            results[c] = search_range(cols, lo, hi, sgn, weights, L, wt_pos, wt_neg, base_z);
        });
    }
    for (std::thread& t : pool) t.join();
    SplitChoice best = results[0];
    for (std::size_t c = 1; c < chunks; ++c) {
        if (better_than(results[c], best)) best = results[c];
    }
    return best;
}

void branch_weight_totals(const std::vector<std::span<const double>>& rows,
                          const std::vector<signed char>& sgn, const std::vector<double>& weights,
                          std::size_t L, int feature, double theta,
                          std::vector<double>& below_pos, std::vector<double>& below_neg,
                          std::vector<double>& above_pos, std::vector<double>& above_neg) {
    below_pos.assign(L, 0.0);
    below_neg.assign(L, 0.0);
    above_pos.assign(L, 0.0);
    above_neg.assign(L, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const bool above = rows[i][static_cast<std::size_t>(feature)] > theta;
        std::vector<double>& pos = above ? above_pos : below_pos;
        std::vector<double>& neg = above ? above_neg : below_neg;
        for (std::size_t l = 0; l < L; ++l) {
            if (sgn[i * L + l] > 0) pos[l] += weights[i * L + l];
            else neg[l] += weights[i * L + l];
        }
    }
}

void validate_inputs(const std::vector<std::span<const double>>& rows,
                     const std::vector<std::vector<signed char>>& signs,
                     const LabelSpace& space, std::size_t rounds) {
    if (rounds < 1) throw data_error("round count must be at least 1");
    if (rows.empty()) throw data_error("cannot train on an empty example list");
    if (signs.size() != rows.size()) throw data_error("sign matrix row count differs from examples");
    const std::size_t d = rows.front().size();
    if (d < 1) throw data_error("examples carry no features");
    const std::size_t L = space.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != d) throw data_error("examples disagree on the feature dimension");
        if (signs[i].size() != L) throw data_error("sign matrix width differs from the label count");
        for (signed char s : signs[i]) {
            if (s != 1 && s != -1) throw data_error("sign matrix entries must be +1 or -1");
        }
    }
}

std::string read_token(std::istream& in, const char* what) {
    std::string tok;
    if (!(in >> tok)) throw data_error(std::string("model file ends before ") + what);
    return tok;
}

void expect_token(std::istream& in, const char* keyword) {
    const std::string tok = read_token(in, keyword);
    if (tok != keyword) {
        throw data_error("model file: expected '" + std::string(keyword) + "', found '" + tok + "'");
    }
}

}  // namespace

std::vector<double> threshold_candidates(std::vector<double> values) {
    if (values.empty()) throw data_error("no attribute values to split");
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> candidates;
    candidates.reserve(values.size());
    candidates.push_back(values.front() - 1.0);
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        candidates.push_back(midpoint_theta(values[k], values[k + 1]));
    }
    return candidates;
}

StumpEnsemble train_on_signs(const std::vector<std::span<const double>>& rows,
                             const std::vector<std::vector<signed char>>& signs,
                             const LabelSpace& space, std::size_t rounds, TrainTrace* trace) {
    validate_inputs(rows, signs, space, rounds);
    const std::size_t n = rows.size();
    const std::size_t L = space.size();
    const std::size_t d = rows.front().size();

    std::vector<signed char> sgn(n * L);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(signs[i].begin(), signs[i].end(), sgn.begin() + static_cast<std::ptrdiff_t>(i * L));
    }
    if (L == 1) {
        const bool all_same = std::all_of(sgn.begin(), sgn.end(),
                                          [&](signed char s) { return s == sgn[0]; });
        if (all_same) {
            throw train_error(
                "degenerate training set: every example carries the same sign, so a "
                "single-label discriminator cannot be fit");
        }
    }

    const Columns cols = build_columns(rows, d);
    const double eps = 1.0 / (static_cast<double>(n) * static_cast<double>(L));
    std::vector<double> weights(n * L, eps);  // uniform 1/(N*L)
    std::vector<double> scores(n * L, 0.0);

    StumpEnsemble model;
    model.space = space;
    model.dim = d;
    model.stumps.reserve(rounds);
    model.z_history.reserve(rounds);

    std::vector<double> wt_pos(L), wt_neg(L);
    std::vector<double> below_pos, below_neg, above_pos, above_neg;
    std::vector<double> mult(4 * L);  // exp(-sign * c) lookup per (branch, sign, label)

    for (std::size_t t = 0; t < rounds; ++t) {
        std::fill(wt_pos.begin(), wt_pos.end(), 0.0);
        std::fill(wt_neg.begin(), wt_neg.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t l = 0; l < L; ++l) {
                if (sgn[i * L + l] > 0) wt_pos[l] += weights[i * L + l];
                else wt_neg[l] += weights[i * L + l];
            }
        }

        const SplitChoice choice = search_all(cols, sgn, weights, L, wt_pos, wt_neg);

        DecisionStump stump;
        stump.feature = choice.feature;
        stump.threshold = choice.theta;
        stump.c_below.resize(L);
        stump.c_above.resize(L);
        branch_weight_totals(rows, sgn, weights, L, stump.feature, stump.threshold,
                             below_pos, below_neg, above_pos, above_neg);
        for (std::size_t l = 0; l < L; ++l) {
            stump.c_below[l] = 0.5 * std::log((below_pos[l] + eps) / (below_neg[l] + eps));
            stump.c_above[l] = 0.5 * std::log((above_pos[l] + eps) / (above_neg[l] + eps));
        }

        for (std::size_t l = 0; l < L; ++l) {
            mult[0 * L + l] = std::exp(-stump.c_below[l]);  // below, sign +1
            mult[1 * L + l] = std::exp(stump.c_below[l]);   // below, sign -1
            mult[2 * L + l] = std::exp(-stump.c_above[l]);  // above, sign +1
            mult[3 * L + l] = std::exp(stump.c_above[l]);   // above, sign -1
        }
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool above = rows[i][static_cast<std::size_t>(stump.feature)] > stump.threshold;
            const double* c = above ? stump.c_above.data() : stump.c_below.data();
            const double* m = &mult[(above ? 2 : 0) * L];
            for (std::size_t l = 0; l < L; ++l) {
                scores[i * L + l] += c[l];
                weights[i * L + l] *= (sgn[i * L + l] > 0) ? m[l] : m[L + l];
                z += weights[i * L + l];
            }
        }
        const double inv_z = 1.0 / z;
        for (double& w : weights) w *= inv_z;

        model.stumps.push_back(std::move(stump));
        model.z_history.push_back(z);

        if (trace) {
            double wsum = 0.0;
            for (double w : weights) wsum += w;
            std::size_t wrong = 0;
            for (std::size_t p = 0; p < n * L; ++p) {
                if ((scores[p] > 0.0) != (sgn[p] > 0)) ++wrong;
            }
            trace->weight_sum.push_back(wsum);
            trace->z.push_back(z);
            trace->train_error.push_back(static_cast<double>(wrong) /
                                         (static_cast<double>(n) * static_cast<double>(L)));
        }
    }
    return model;
}

StumpEnsemble train_adaboost_mh(const Dataset& dataset, std::size_t rounds, TrainTrace* trace) {
    validate(dataset);
    const std::size_t L = dataset.space.size();
    std::vector<std::span<const double>> rows;
    std::vector<std::vector<signed char>> signs;
    rows.reserve(dataset.examples.size());
    signs.reserve(dataset.examples.size());
    for (const Example& ex : dataset.examples) {
        rows.emplace_back(ex.features);
        std::vector<signed char> row(L, -1);
        for (int l : ex.labels) row[static_cast<std::size_t>(l)] = 1;
        signs.push_back(std::move(row));
    }
    return train_on_signs(rows, signs, dataset.space, rounds, trace);
}

StumpEnsemble train_binary_adaboost(const Dataset& dataset, std::size_t rounds, TrainTrace* trace) {
    validate(dataset);
    const std::vector<SignedExample> view = binary_view(dataset);
    std::vector<std::span<const double>> rows;
    std::vector<std::vector<signed char>> signs;
    rows.reserve(view.size());
    signs.reserve(view.size());
    for (const SignedExample& se : view) {
        rows.push_back(se.features);
        signs.push_back({static_cast<signed char>(se.sign)});
    }
    return train_on_signs(rows, signs, LabelSpace({"adulterant"}), rounds, trace);
}

DecisionStump best_stump(const Dataset& dataset, const WeightMatrix& weights) {
    validate(dataset);
    const std::size_t n = dataset.examples.size();
    const std::size_t L = dataset.space.size();
    if (weights.rows != n || weights.cols != L) {
        throw data_error("weight matrix shape differs from the dataset");
    }
    double total = 0.0;
    for (double w : weights.values) {
        if (w < 0.0) throw data_error("weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw data_error("weights must sum to 1");

    std::vector<std::span<const double>> rows;
    rows.reserve(n);
    std::vector<signed char> sgn(n * L, -1);
    for (std::size_t i = 0; i < n; ++i) {
        rows.emplace_back(dataset.examples[i].features);
        for (int l : dataset.examples[i].labels) sgn[i * L + static_cast<std::size_t>(l)] = 1;
    }
    const Columns cols = build_columns(rows, dataset.dim);

    std::vector<double> wt_pos(L, 0.0), wt_neg(L, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < L; ++l) {
            if (sgn[i * L + l] > 0) wt_pos[l] += weights.values[i * L + l];
            else wt_neg[l] += weights.values[i * L + l];
        }
    }
    const SplitChoice choice = search_all(cols, sgn, weights.values, L, wt_pos, wt_neg);

    DecisionStump stump;
    stump.feature = choice.feature;
    stump.threshold = choice.theta;
    stump.c_below.resize(L);
    stump.c_above.resize(L);
    std::vector<double> below_pos, below_neg, above_pos, above_neg;
    branch_weight_totals(rows, sgn, weights.values, L, stump.feature, stump.threshold,
                         below_pos, below_neg, above_pos, above_neg);
    const double eps = 1.0 / (static_cast<double>(n) * static_cast<double>(L));
    for (std::size_t l = 0; l < L; ++l) {
        stump.c_below[l] = 0.5 * std::log((below_pos[l] + eps) / (below_neg[l] + eps));
        stump.c_above[l] = 0.5 * std::log((above_pos[l] + eps) / (above_neg[l] + eps));
    }
    return stump;
}

std::vector<double> predict_scores(const StumpEnsemble& model, std::span<const double> x,
                                   std::size_t rounds) {
    if (x.size() != model.dim) {
        throw data_error("input dimension " + std::to_string(x.size()) +
                         " differs from the model dimension " + std::to_string(model.dim));
    }
    if (rounds > model.stumps.size()) {
        throw data_error("requested more rounds than the ensemble holds");
    }
    std::vector<double> scores(model.space.size(), 0.0);
    for (std::size_t t = 0; t < rounds; ++t) {
        const DecisionStump& s = model.stumps[t];
        const std::vector<double>& c =
            x[static_cast<std::size_t>(s.feature)] > s.threshold ? s.c_above : s.c_below;
        for (std::size_t l = 0; l < scores.size(); ++l) scores[l] += c[l];
    }
    return scores;
}

std::vector<double> predict_scores(const StumpEnsemble& model, std::span<const double> x) {
    return predict_scores(model, x, model.stumps.size());
}

std::vector<int> predict_labels(const StumpEnsemble& model, std::span<const double> x) {
    const std::vector<double> scores = predict_scores(model, x);
    std::vector<int> labels;
    for (std::size_t l = 0; l < scores.size(); ++l) {
        if (scores[l] > 0.0) labels.push_back(static_cast<int>(l));
    }
    return labels;
}

void write_ensemble_text(std::ostream& out, const StumpEnsemble& model,
                         const std::string& format_tag) {
    if (format_tag != kBoostModelTag && format_tag != kBinaryModelTag) {
        throw data_error("unknown model format tag '" + format_tag + "'");
    }
    if (model.stumps.empty()) throw data_error("cannot save an empty ensemble");
    if (model.z_history.size() != model.stumps.size()) {
        throw data_error("normalizer history length differs from the stump count");
    }
    const std::size_t L = model.space.size();
    out << format_tag << " 1\n";
    out << "labels " << L;
    for (const std::string& name : model.space.names()) out << ' ' << name;
    out << "\ndim " << model.dim << "\nrounds " << model.stumps.size() << "\n";
    for (const DecisionStump& s : model.stumps) {
        if (s.c_below.size() != L || s.c_above.size() != L) {
            throw data_error("stump confidence width differs from the label count");
        }
        out << "stump " << s.feature << ' ' << format_double(s.threshold);
        for (double c : s.c_below) out << ' ' << format_double(c);
        for (double c : s.c_above) out << ' ' << format_double(c);
        out << "\n";
    }
    out << "z";
    for (double z : model.z_history) out << ' ' << format_double(z);
    out << "\nend\n";
}

StumpEnsemble read_ensemble_text(std::istream& in, std::string* format_tag) {
    const std::string tag = read_token(in, "the format tag");
    if (tag != kBoostModelTag && tag != kBinaryModelTag) {
        throw data_error("unknown model format tag '" + tag + "'");
    }
    const std::string version = read_token(in, "the format version");
    if (version != "1") throw data_error("unknown model format version '" + version + "'");

    expect_token(in, "labels");
    const long long L = textio::parse_int(read_token(in, "the label count"), "label count");
    if (L < 1) throw data_error("model file declares no labels");
    std::vector<std::string> names;
    for (long long l = 0; l < L; ++l) names.push_back(read_token(in, "a label name"));

    StumpEnsemble model;
    model.space = LabelSpace(names);
    expect_token(in, "dim");
    const long long dim = textio::parse_int(read_token(in, "the dimension"), "dimension");
    if (dim < 1) throw data_error("model file declares a non-positive dimension");
    model.dim = static_cast<std::size_t>(dim);
    expect_token(in, "rounds");
    const long long rounds = textio::parse_int(read_token(in, "the round count"), "round count");
    if (rounds < 1) throw data_error("model file declares no rounds");

    for (long long t = 0; t < rounds; ++t) {
        expect_token(in, "stump");
        DecisionStump s;
        const long long j = textio::parse_int(read_token(in, "a feature index"), "feature index");
        if (j < 0 || j >= dim) throw data_error("stump feature index out of range");
        s.feature = static_cast<int>(j);
        s.threshold = textio::parse_double(read_token(in, "a threshold"), "threshold");
        s.c_below.resize(static_cast<std::size_t>(L));
        s.c_above.resize(static_cast<std::size_t>(L));
        for (double& c : s.c_below) {
            c = textio::parse_double(read_token(in, "a confidence"), "confidence");
        }
        for (double& c : s.c_above) {
            c = textio::parse_double(read_token(in, "a confidence"), "confidence");
        }
        for (double c : s.c_below) {
            if (!std::isfinite(c)) throw data_error("non-finite confidence in model file");
        }
        for (double c : s.c_above) {
            if (!std::isfinite(c)) throw data_error("non-finite confidence in model file");
        }
        model.stumps.push_back(std::move(s));
    }
    expect_token(in, "z");
    for (long long t = 0; t < rounds; ++t) {
        const double z = textio::parse_double(read_token(in, "a normalizer"), "normalizer");
        if (!(z > 0.0) || z > 1.0 + 1e-9) throw data_error("normalizer outside (0, 1] in model file");
        model.z_history.push_back(z);
    }
    expect_token(in, "end");
    if (format_tag) *format_tag = tag;
    return model;
}

void save_ensemble(const StumpEnsemble& model, const std::filesystem::path& path,
                   const std::string& format_tag) {
    std::ostringstream out;
    write_ensemble_text(out, model, format_tag);
    textio::atomic_write(path, out.str());
}

StumpEnsemble load_ensemble(const std::filesystem::path& path, std::string* format_tag) {
    std::istringstream in(textio::read_file(path));
    return read_ensemble_text(in, format_tag);
}

}  // namespace oilml
