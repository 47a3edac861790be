#include "oilml/mllvq.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "oilml/metrics.hpp"
#include "oilml/rng.hpp"
#include "textio.hpp"

namespace oilml {

namespace {

using textio::format_double;

constexpr double kSmallGroupJitter = 1e-3;

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        acc += diff * diff;
    }
    return acc;
}

// K-means over one (label, polarity) group. `points` are dataset row indices.
std::vector<std::vector<double>> group_centers(const Dataset& dataset,
                                               const std::vector<std::size_t>& points,
                                               std::size_t S, Rng& rng) {
    const std::size_t g = points.size();
    const std::size_t d = dataset.dim;
    std::vector<std::vector<double>> centers(S);
    if (g < S) {
        for (std::size_t s = 0; s < S; ++s) {
            const std::vector<double>& base = dataset.examples[points[s % g]].features;
            centers[s].resize(d);
            for (std::size_t j = 0; j < d; ++j) {
                centers[s][j] = base[j] + rng.uniform(-kSmallGroupJitter, kSmallGroupJitter);
            }
        }
        return centers;
    }

    std::vector<std::size_t> pool(g);
    for (std::size_t i = 0; i < g; ++i) pool[i] = i;
    for (std::size_t s = 0; s < S; ++s) {
        const std::size_t pick = s + static_cast<std::size_t>(rng.uniform_index(g - s));
        std::swap(pool[s], pool[pick]);
        centers[s] = dataset.examples[points[pool[s]]].features;
    }

    std::vector<int> assign(g, -1);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < g; ++i) {
            const std::vector<double>& x = dataset.examples[points[i]].features;
            int best = 0;
            double best_d = squared_distance(x, centers[0]);
            for (std::size_t c = 1; c < S; ++c) {
                const double dist = squared_distance(x, centers[c]);
                if (dist < best_d) {
                    best_d = dist;
                    best = static_cast<int>(c);
                }
            }
            if (best != assign[i]) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
        for (std::size_t c = 0; c < S; ++c) {
            std::vector<double> mean(d, 0.0);
            std::size_t count = 0;
            for (std::size_t i = 0; i < g; ++i) {
                if (assign[i] != static_cast<int>(c)) continue;
                ++count;
                const std::vector<double>& x = dataset.examples[points[i]].features;
                for (std::size_t j = 0; j < d; ++j) mean[j] += x[j];
            }
            if (count == 0) continue;  // empty cluster keeps its previous center
            for (std::size_t j = 0; j < d; ++j) centers[c][j] = mean[j] / static_cast<double>(count);
        }
    }
    return centers;
}

// Nearest positive/negative prototype index and squared distance per label.
struct NearestPerLabel {
    std::vector<std::size_t> pos_index, neg_index;
    std::vector<double> pos_dist, neg_dist;
};

NearestPerLabel nearest_prototypes(const PrototypeBook& book, std::span<const double> x) {
    const std::size_t L = book.space.size();
    NearestPerLabel out;
    out.pos_index.resize(L);
    out.neg_index.resize(L);
    out.pos_dist.resize(L);
    out.neg_dist.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        for (int pol = 0; pol < 2; ++pol) {
            std::size_t best_idx = 0;
            double best = 0.0;
            for (std::size_t s = 0; s < book.S; ++s) {
                const std::size_t idx = (l * 2 + static_cast<std::size_t>(pol)) * book.S + s;
                const double dist = squared_distance(x, book.prototypes[idx].position);
                if (s == 0 || dist < best) {
                    best = dist;
                    best_idx = idx;
                }
            }
            if (pol == 0) {
                out.pos_index[l] = best_idx;
                out.pos_dist[l] = best;
            } else {
                out.neg_index[l] = best_idx;
                out.neg_dist[l] = best;
            }
        }
    }
    return out;
}

std::vector<int> complement_labels(const std::vector<int>& labels, std::size_t L) {
    std::vector<int> out;
    out.reserve(L - labels.size());
    std::size_t cursor = 0;
    for (std::size_t l = 0; l < L; ++l) {
        if (cursor < labels.size() && labels[cursor] == static_cast<int>(l)) {
            ++cursor;
        } else {
            out.push_back(static_cast<int>(l));
        }
    }
    return out;
}

void check_dimension(const PrototypeBook& book, std::span<const double> x) {
    if (x.size() != book.dim) {
        throw data_error("input dimension " + std::to_string(x.size()) +
                         " differs from the prototype dimension " + std::to_string(book.dim));
    }
}

}  // namespace

PrototypeBook kmeans_init(const Dataset& dataset, std::size_t S, std::uint64_t seed) {
    validate(dataset);
    if (S < 1) throw data_error("prototype count must be at least 1");
    const std::size_t L = dataset.space.size();
    const std::size_t n = dataset.examples.size();

    PrototypeBook book;
    book.space = dataset.space;
    book.S = S;
    book.dim = dataset.dim;
    book.prototypes.resize(2 * L * S);

    for (std::size_t l = 0; l < L; ++l) {
        std::vector<std::size_t> positives, negatives;
        for (std::size_t i = 0; i < n; ++i) {
            const std::vector<int>& labels = dataset.examples[i].labels;
            if (std::binary_search(labels.begin(), labels.end(), static_cast<int>(l))) {
                positives.push_back(i);
            } else {
                negatives.push_back(i);
            }
        }
        if (positives.empty()) {
            throw train_error("label '" + dataset.space.name(l) + "' has no positive training example");
        }
        if (negatives.empty()) {
            throw train_error("label '" + dataset.space.name(l) +
                              "' appears in every training example, so it has no negative group");
        }
        for (int pol = 0; pol < 2; ++pol) {
            Rng rng(mix_seed(seed, l * 2 + static_cast<std::uint64_t>(pol)));
            const std::vector<std::size_t>& group = pol == 0 ? positives : negatives;
            std::vector<std::vector<double>> centers = group_centers(dataset, group, S, rng);
            for (std::size_t s = 0; s < S; ++s) {
                Prototype& p = book.prototypes[(l * 2 + static_cast<std::size_t>(pol)) * S + s];
                p.label = static_cast<int>(l);
                p.polarity = pol == 0 ? Polarity::positive : Polarity::negative;
                p.position = std::move(centers[s]);
            }
        }
    }
    return book;
}

double mean_nearest_center_distance(const Dataset& dataset, const PrototypeBook& book) {
    validate(dataset);
    if (book.prototypes.empty()) throw data_error("prototype book is empty");
    double sum = 0.0;
    for (const Example& ex : dataset.examples) {
        check_dimension(book, ex.features);
        double best = squared_distance(ex.features, book.prototypes[0].position);
        for (std::size_t k = 1; k < book.prototypes.size(); ++k) {
            best = std::min(best, squared_distance(ex.features, book.prototypes[k].position));
        }
        sum += std::sqrt(best);
    }
    return sum / static_cast<double>(dataset.examples.size());
}

std::vector<double> score_labels(const PrototypeBook& book, std::span<const double> x) {
    check_dimension(book, x);
    const NearestPerLabel near = nearest_prototypes(book, x);
    const std::size_t L = book.space.size();
    std::vector<double> scores(L);
    for (std::size_t l = 0; l < L; ++l) scores[l] = near.neg_dist[l] - near.pos_dist[l];
    return scores;
}

double surrogate_loss(const PrototypeBook& book, std::span<const double> x,
                      const std::vector<int>& labels, double alpha) {
    check_dimension(book, x);
    const std::size_t L = book.space.size();
    const std::vector<int> irrelevant = complement_labels(labels, L);
    if (labels.empty() || irrelevant.empty()) return 0.0;
    const NearestPerLabel near = nearest_prototypes(book, x);
    const double u = 1.0 / (static_cast<double>(labels.size()) *
                            static_cast<double>(irrelevant.size()));
    double loss = 0.0;
    for (int p : labels) {
        const double sp = near.neg_dist[static_cast<std::size_t>(p)] -
                          near.pos_dist[static_cast<std::size_t>(p)];
        for (int q : irrelevant) {
            const double sq = near.neg_dist[static_cast<std::size_t>(q)] -
                              near.pos_dist[static_cast<std::size_t>(q)];
            loss += u * std::max(0.0, alpha - (sp - sq));
        }
    }
    return loss;
}

std::vector<double> visit_coefficients(const PrototypeBook& book, std::span<const double> x,
                                       const std::vector<int>& labels, double alpha) {
    check_dimension(book, x);
    std::vector<double> coef(book.prototypes.size(), 0.0);
    const std::size_t L = book.space.size();
    const std::vector<int> irrelevant = complement_labels(labels, L);
    if (labels.empty() || irrelevant.empty()) return coef;
    const NearestPerLabel near = nearest_prototypes(book, x);
    const double u = 1.0 / (static_cast<double>(labels.size()) *
                            static_cast<double>(irrelevant.size()));
    for (int p : labels) {
        const std::size_t pi = static_cast<std::size_t>(p);
        const double sp = near.neg_dist[pi] - near.pos_dist[pi];
        for (int q : irrelevant) {
            const std::size_t qi = static_cast<std::size_t>(q);
            const double sq = near.neg_dist[qi] - near.pos_dist[qi];
            if (alpha - (sp - sq) > 0.0) {
                coef[near.pos_index[pi]] += 2.0 * u;  // toward x
                coef[near.neg_index[pi]] -= 2.0 * u;  // away
                coef[near.pos_index[qi]] -= 2.0 * u;  // away
                coef[near.neg_index[qi]] += 2.0 * u;  // toward x
            }
        }
    }
    return coef;
}

PrototypeBook train_mllvq(const Dataset& dataset, const LvqTrainConfig& config,
                          LvqTrainStats* stats) {
    validate(dataset);
    if (config.S < 1) throw data_error("prototype count must be at least 1");
    if (config.M < 1) throw data_error("epoch count must be at least 1");
    if (config.alpha < 0.0) throw data_error("margin must be non-negative");
    if (config.eta0 && !(*config.eta0 > 0.0)) {
        throw data_error("initial learning rate must be positive");
    }

    PrototypeBook book = kmeans_init(dataset, config.S, mix_seed(config.seed, 1));
    const double eta0 =
        config.eta0 ? *config.eta0 : 0.1 * mean_nearest_center_distance(dataset, book);
    if (!(eta0 > 0.0)) {
        throw train_error("resolved initial learning rate is not positive; the examples "
                          "coincide with their cluster centers");
    }
    if (stats) {
        stats->eta0 = eta0;
        stats->skipped_examples = 0;
        stats->epoch_mean_loss.clear();
    }

    const std::size_t n = dataset.examples.size();
    const std::size_t L = dataset.space.size();
    const std::size_t d = dataset.dim;
    const double total_steps = static_cast<double>(config.M) * static_cast<double>(n);

    Rng order_rng(mix_seed(config.seed, 2));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    std::size_t t = 0;
    for (std::size_t epoch = 0; epoch < config.M; ++epoch) {
        order_rng.shuffle(perm);
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t visit = 0; visit < n; ++visit) {
            const Example& ex = dataset.examples[perm[visit]];
            const double eta = eta0 * (1.0 - static_cast<double>(t) / total_steps);
            const std::vector<int> irrelevant = complement_labels(ex.labels, L);
            if (irrelevant.empty()) {
                if (stats) ++stats->skipped_examples;
                ++t;
                continue;
            }

            const NearestPerLabel near = nearest_prototypes(book, ex.features);
            const double u = 1.0 / (static_cast<double>(ex.labels.size()) *
                                    static_cast<double>(irrelevant.size()));
            std::vector<double> coef_pos(L, 0.0), coef_neg(L, 0.0);
            double loss = 0.0;
            for (int p : ex.labels) {
                const std::size_t pi = static_cast<std::size_t>(p);
                const double sp = near.neg_dist[pi] - near.pos_dist[pi];
                for (int q : irrelevant) {
                    const std::size_t qi = static_cast<std::size_t>(q);
                    const double sq = near.neg_dist[qi] - near.pos_dist[qi];
                    const double margin = config.alpha - (sp - sq);
                    if (margin > 0.0) {
                        loss += u * margin;
                        coef_pos[pi] += 2.0 * u;
                        coef_neg[pi] -= 2.0 * u;
                        coef_pos[qi] -= 2.0 * u;
                        coef_neg[qi] += 2.0 * u;
                    }
                }
            }
            if (stats) {
                loss_sum += loss;
                ++loss_count;
            }
            for (std::size_t l = 0; l < L; ++l) {
                if (coef_pos[l] != 0.0) {
                    std::vector<double>& w = book.prototypes[near.pos_index[l]].position;
                    const double step = eta * coef_pos[l];
                    for (std::size_t j = 0; j < d; ++j) w[j] += step * (ex.features[j] - w[j]);
                }
                if (coef_neg[l] != 0.0) {
                    std::vector<double>& w = book.prototypes[near.neg_index[l]].position;
                    const double step = eta * coef_neg[l];
                    for (std::size_t j = 0; j < d; ++j) w[j] += step * (ex.features[j] - w[j]);
                }
            }
            ++t;
        }
        if (stats) {
            stats->epoch_mean_loss.push_back(loss_count > 0 ? loss_sum / static_cast<double>(loss_count)
                                                            : 0.0);
        }
    }
    return book;
}

MetaLabeler train_meta_labeler(const Dataset& dataset, std::size_t stumps) {
    validate(dataset);
    std::set<std::size_t> sizes;
    for (const Example& ex : dataset.examples) sizes.insert(ex.labels.size());

    MetaLabeler meta;
    meta.counts.assign(sizes.begin(), sizes.end());
    if (meta.counts.size() == 1) return meta;  // constant predictor, no model needed

    std::vector<std::string> names;
    for (std::size_t c : meta.counts) names.push_back(std::to_string(c));
    const LabelSpace count_space{names};

    std::vector<std::span<const double>> rows;
    std::vector<std::vector<signed char>> signs;
    rows.reserve(dataset.examples.size());
    signs.reserve(dataset.examples.size());
    for (const Example& ex : dataset.examples) {
        rows.emplace_back(ex.features);
        std::vector<signed char> row(meta.counts.size(), -1);
        const auto it = std::find(meta.counts.begin(), meta.counts.end(), ex.labels.size());
        row[static_cast<std::size_t>(it - meta.counts.begin())] = 1;
        signs.push_back(std::move(row));
    }
    meta.model = train_on_signs(rows, signs, count_space, stumps);
    return meta;
}

std::size_t predict_label_count(const MetaLabeler& meta, std::span<const double> x) {
    if (meta.counts.empty()) throw data_error("meta-labeler holds no count classes");
    if (meta.counts.size() == 1) return meta.counts.front();
    const std::vector<double> scores = predict_scores(meta.model, x);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < scores.size(); ++c) {
        if (scores[c] > scores[arg]) arg = c;  // ties keep the smaller count
    }
    return meta.counts[arg];
}

std::vector<int> predict_ranked(const MlLvqModel& model, std::span<const double> x) {
    const std::vector<double> scores = score_labels(model.book, x);
    std::size_t k = predict_label_count(model.meta, x);
    k = std::min(k, scores.size());
    const std::vector<int> order = rank_labels(scores);
    return std::vector<int>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
}

MlLvqModel train_mllvq_model(const Dataset& raw, const LvqTrainConfig& config,
                             std::size_t meta_stumps, LvqTrainStats* stats) {
    const Dataset scaled = scale_to_unit(raw);
    MlLvqModel model;
    model.book = train_mllvq(scaled, config, stats);
    model.meta = train_meta_labeler(scaled, meta_stumps);
    model.scaling = scaled.scaling;
    return model;
}

void write_mllvq_text(std::ostream& out, const MlLvqModel& model) {
    const std::size_t L = model.book.space.size();
    const std::size_t S = model.book.S;
    const std::size_t d = model.book.dim;
    if (model.book.prototypes.size() != 2 * L * S) {
        throw data_error("prototype book shape is inconsistent");
    }
    if (model.scaling.size() != d) {
        throw data_error("scaling record length differs from the prototype dimension");
    }
    out << kMlLvqModelTag << " 1\n";
    out << "labels " << L;
    for (const std::string& name : model.book.space.names()) out << ' ' << name;
    out << "\ndim " << d << "\nprototypes " << S << "\nscaling";
    for (const AttributeRange& r : model.scaling) {
        out << ' ' << format_double(r.min) << ' ' << format_double(r.max);
    }
    out << "\n";
    for (const Prototype& p : model.book.prototypes) {
        if (p.position.size() != d) throw data_error("prototype dimension is inconsistent");
        out << "prototype " << p.label << ' '
            << (p.polarity == Polarity::positive ? "pos" : "neg");
        for (double v : p.position) out << ' ' << format_double(v);
        out << "\n";
    }
    out << "counts " << model.meta.counts.size();
    for (std::size_t c : model.meta.counts) out << ' ' << c;
    out << "\nmeta " << (model.meta.counts.size() > 1 ? "embedded" : "none") << "\n";
    if (model.meta.counts.size() > 1) write_ensemble_text(out, model.meta.model, kBoostModelTag);
    out << "end\n";
}

namespace {

std::string lvq_token(std::istream& in, const char* what) {
    std::string tok;
    if (!(in >> tok)) throw data_error(std::string("model file ends before ") + what);
    return tok;
}

void lvq_expect(std::istream& in, const char* keyword) {
    const std::string tok = lvq_token(in, keyword);
    if (tok != keyword) {
        throw data_error("model file: expected '" + std::string(keyword) + "', found '" + tok + "'");
    }
}

}  // namespace

MlLvqModel read_mllvq_text(std::istream& in) {
    lvq_expect(in, kMlLvqModelTag);
    if (lvq_token(in, "the format version") != "1") {
        throw data_error("unknown model format version");
    }
    lvq_expect(in, "labels");
    const long long L = textio::parse_int(lvq_token(in, "the label count"), "label count");
    if (L < 1) throw data_error("model file declares no labels");
    std::vector<std::string> names;
    for (long long l = 0; l < L; ++l) names.push_back(lvq_token(in, "a label name"));

    MlLvqModel model;
    model.book.space = LabelSpace(names);
    lvq_expect(in, "dim");
    const long long d = textio::parse_int(lvq_token(in, "the dimension"), "dimension");
    lvq_expect(in, "prototypes");
    const long long S = textio::parse_int(lvq_token(in, "the prototype count"), "prototype count");
    if (d < 1 || S < 1) throw data_error("model file declares a bad shape");
    model.book.dim = static_cast<std::size_t>(d);
    model.book.S = static_cast<std::size_t>(S);

    lvq_expect(in, "scaling");
    model.scaling.resize(static_cast<std::size_t>(d));
    for (AttributeRange& r : model.scaling) {
        r.min = textio::parse_double(lvq_token(in, "a scaling bound"), "scaling bound");
        r.max = textio::parse_double(lvq_token(in, "a scaling bound"), "scaling bound");
    }

    const std::size_t proto_count = 2 * static_cast<std::size_t>(L) * model.book.S;
    model.book.prototypes.resize(proto_count);
    for (std::size_t k = 0; k < proto_count; ++k) {
        lvq_expect(in, "prototype");
        Prototype& p = model.book.prototypes[k];
        const long long label = textio::parse_int(lvq_token(in, "a label index"), "label index");
        if (label < 0 || label >= L) throw data_error("prototype label index out of range");
        p.label = static_cast<int>(label);
        const std::string pol = lvq_token(in, "a polarity");
        if (pol != "pos" && pol != "neg") throw data_error("bad prototype polarity '" + pol + "'");
        p.polarity = pol == "pos" ? Polarity::positive : Polarity::negative;
        const std::size_t expected =
            (static_cast<std::size_t>(label) * 2 + (p.polarity == Polarity::negative ? 1 : 0)) *
                model.book.S;
        if (k < expected || k >= expected + model.book.S) {
            throw data_error("prototype order in model file is inconsistent");
        }
        p.position.resize(static_cast<std::size_t>(d));
        for (double& v : p.position) {
            v = textio::parse_double(lvq_token(in, "a coordinate"), "coordinate");
        }
    }

    lvq_expect(in, "counts");
    const long long k = textio::parse_int(lvq_token(in, "the count-class count"), "count-class count");
    if (k < 1) throw data_error("model file declares no count classes");
    for (long long c = 0; c < k; ++c) {
        const long long size = textio::parse_int(lvq_token(in, "a count class"), "count class");
        if (size < 1) throw data_error("count class must be positive");
        model.meta.counts.push_back(static_cast<std::size_t>(size));
    }
    lvq_expect(in, "meta");
    const std::string meta_kind = lvq_token(in, "the meta-labeler marker");
    if (meta_kind == "embedded") {
        model.meta.model = read_ensemble_text(in);
        if (model.meta.model.space.size() != model.meta.counts.size()) {
            throw data_error("meta-labeler label count differs from the count classes");
        }
    } else if (meta_kind != "none") {
        throw data_error("bad meta-labeler marker '" + meta_kind + "'");
    }
    lvq_expect(in, "end");
    return model;
}

void save_mllvq(const MlLvqModel& model, const std::filesystem::path& path) {
    std::ostringstream out;
    write_mllvq_text(out, model);
    textio::atomic_write(path, out.str());
}

MlLvqModel load_mllvq(const std::filesystem::path& path) {
    std::istringstream in(textio::read_file(path));
    return read_mllvq_text(in);
}

}  // namespace oilml
