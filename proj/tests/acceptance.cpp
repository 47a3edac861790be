// Acceptance gate: nine checks covering metric correctness, the boosting
// bound, gradient consistency, the synthetic end-to-end protocol and the
// reproducibility guarantees. Each check prints exactly one PASS/FAIL line;
// the process exits non-zero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "oilml/boosting.hpp"
#include "oilml/dataset.hpp"
#include "oilml/experiments.hpp"
#include "oilml/metrics.hpp"
#include "oilml/mllvq.hpp"
#include "oilml/pca.hpp"
#include "oilml/rng.hpp"
#include "oilml/synthgen.hpp"

using namespace oilml;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

bool run_criterion(int number, const std::string& claim,
                   const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
        ok = false;
    }
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << number << ": " << claim;
    if (!detail.empty()) std::cout << " [" << detail << "]";
    std::cout << std::endl;
    return ok;
}

// ---------------------------------------------------------------- criterion 1

// Independent re-derivation of the six measures. Counting replaces sorting
// for the ranks; memberships are linear scans instead of binary search.
struct SixMeasures {
    double mac_f1 = 0.0;
    double mic_f1 = 0.0;
    double one_error = 0.0;
    double avg_prec = 0.0;
    double accuracy = 0.0;
    double detect_rate = 0.0;
};

bool has_label(const std::vector<int>& set, int l) {
    return std::find(set.begin(), set.end(), l) != set.end();
}

double oracle_f1(long tp, long fp, long fn) {
    const double p = (tp + fp > 0) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = (tp + fn > 0) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

SixMeasures oracle_measures(const std::vector<PredictionRecord>& recs, int L) {
    SixMeasures out;

    long tp = 0, fp = 0, fn = 0;
    for (const PredictionRecord& rec : recs) {
        for (int l = 0; l < L; ++l) {
            const bool t = has_label(rec.truth, l);
            const bool p = has_label(rec.predicted, l);
            if (t && p) ++tp;
            if (!t && p) ++fp;
            if (t && !p) ++fn;
        }
    }
    out.mic_f1 = oracle_f1(tp, fp, fn);

    double mac_sum = 0.0;
    long mac_n = 0;
    for (int l = 0; l < L; ++l) {
        long ltp = 0, lfp = 0, lfn = 0;
        for (const PredictionRecord& rec : recs) {
            const bool t = has_label(rec.truth, l);
            const bool p = has_label(rec.predicted, l);
            if (t && p) ++ltp;
            if (!t && p) ++lfp;
            if (t && !p) ++lfn;
        }
        if (ltp + lfp + lfn == 0) continue;
        mac_sum += oracle_f1(ltp, lfp, lfn);
        ++mac_n;
    }
    out.mac_f1 = mac_n > 0 ? mac_sum / static_cast<double>(mac_n) : 0.0;

    long eligible = 0, errors = 0;
    for (const PredictionRecord& rec : recs) {
        if (rec.truth.empty()) continue;
        ++eligible;
        int top = 0;
        for (int m = 1; m < L; ++m) {
            if (rec.scores[static_cast<std::size_t>(m)] >
                rec.scores[static_cast<std::size_t>(top)]) {
                top = m;
            }
        }
        if (!has_label(rec.truth, top)) ++errors;
    }
    out.one_error =
        eligible > 0 ? static_cast<double>(errors) / static_cast<double>(eligible) : 0.0;

    double ap_sum = 0.0;
    long ap_n = 0;
    for (const PredictionRecord& rec : recs) {
        if (rec.truth.empty()) continue;
        ++ap_n;
        // rank of l: one plus the number of labels strictly ahead of it, where
        // equal scores are ordered by label index
        std::vector<int> rank(static_cast<std::size_t>(L), 0);
        for (int l = 0; l < L; ++l) {
            int ahead = 0;
            for (int m = 0; m < L; ++m) {
                if (m == l) continue;
                const double sl = rec.scores[static_cast<std::size_t>(l)];
                const double sm = rec.scores[static_cast<std::size_t>(m)];
                if (sm > sl || (sm == sl && m < l)) ++ahead;
            }
            rank[static_cast<std::size_t>(l)] = ahead + 1;
        }
        double record_sum = 0.0;
        for (int l : rec.truth) {
            int better_or_equal = 0;
            for (int m : rec.truth) {
                if (rank[static_cast<std::size_t>(m)] <= rank[static_cast<std::size_t>(l)]) {
                    ++better_or_equal;
                }
            }
            record_sum += static_cast<double>(better_or_equal) /
                          static_cast<double>(rank[static_cast<std::size_t>(l)]);
        }
        ap_sum += record_sum / static_cast<double>(rec.truth.size());
    }
    out.avg_prec = ap_n > 0 ? ap_sum / static_cast<double>(ap_n) : 1.0;

    double acc_sum = 0.0;
    for (const PredictionRecord& rec : recs) {
        long inter = 0, uni = 0;
        for (int l = 0; l < L; ++l) {
            const bool t = has_label(rec.truth, l);
            const bool p = has_label(rec.predicted, l);
            if (t && p) ++inter;
            if (t || p) ++uni;
        }
        acc_sum += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }
    out.accuracy = acc_sum / static_cast<double>(recs.size());

    long exact = 0;
    for (const PredictionRecord& rec : recs) {
        if (rec.truth == rec.predicted) ++exact;
    }
    out.detect_rate = static_cast<double>(exact) / static_cast<double>(recs.size());

    return out;
}

struct RecConfig {
    std::vector<int> truth;
    std::vector<int> predicted;
    std::vector<double> scores;
};

std::vector<RecConfig> record_configs(int L) {
    static const double kScoreTable[5] = {-1.0, -0.5, 0.0, 0.5, 1.0};
    std::vector<RecConfig> out;
    const unsigned subsets = 1u << L;
    for (unsigned tmask = 0; tmask < subsets; ++tmask) {
        for (unsigned pmask = 0; pmask < subsets; ++pmask) {
            for (int v = 0; v < 5; ++v) {
                RecConfig c;
                for (int l = 0; l < L; ++l) {
                    if (tmask & (1u << l)) c.truth.push_back(l);
                    if (pmask & (1u << l)) c.predicted.push_back(l);
                }
                const unsigned stride = tmask % 3;  // stride 0 ties every score
                c.scores.resize(static_cast<std::size_t>(L));
                for (int l = 0; l < L; ++l) {
                    const unsigned k = (static_cast<unsigned>(v) +
                                        stride * static_cast<unsigned>(l) + pmask) % 5;
                    c.scores[static_cast<std::size_t>(l)] = kScoreTable[k];
                }
                if (v == 4 && L >= 2) c.scores[1] = c.scores[0];  // forced pair tie
                out.push_back(std::move(c));
            }
        }
    }
    return out;
}

bool criterion1(std::string& detail) {
    const auto start = Clock::now();
    std::uint64_t checked = 0, mismatches = 0;

    for (int L = 1; L <= 3; ++L) {
        const std::vector<RecConfig> cfgs = record_configs(L);
        const std::uint64_t C = cfgs.size();

        std::vector<PredictionRecord> recs;
        const auto check_tuple = [&](const std::vector<std::uint64_t>& idx) {
            recs.clear();
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const RecConfig& c = cfgs[static_cast<std::size_t>(idx[k])];
                PredictionRecord rec;
                rec.id = "r" + std::to_string(k);
                rec.truth = c.truth;
                rec.predicted = c.predicted;
                rec.scores = c.scores;
                recs.push_back(std::move(rec));
            }
            const EvaluationReport rep = evaluate(recs);
            const SixMeasures oracle = oracle_measures(recs, L);
            const bool same = rep.mac_f1 == oracle.mac_f1 && rep.mic_f1 == oracle.mic_f1 &&
                              rep.one_error == oracle.one_error &&
                              rep.avg_prec == oracle.avg_prec &&
                              rep.accuracy == oracle.accuracy &&
                              rep.detect_rate == oracle.detect_rate;
            ++checked;
            if (!same) {
                ++mismatches;
                if (mismatches <= 3) {
                    std::cout << "  measure mismatch at L=" << L << " N=" << idx.size()
                              << " idx0=" << idx[0] << std::endl;
                }
            }
        };

        for (int N = 1; N <= 4; ++N) {
            std::uint64_t total = 1;
            bool exhaustive = true;
            for (int k = 0; k < N; ++k) {
                total *= C;
                if (total > 200000) {
                    exhaustive = false;
                    break;
                }
            }
            std::vector<std::uint64_t> idx(static_cast<std::size_t>(N), 0);
            if (exhaustive) {
                while (true) {
                    check_tuple(idx);
                    std::size_t pos = 0;
                    while (pos < idx.size()) {
                        if (++idx[pos] < C) break;
                        idx[pos] = 0;
                        ++pos;
                    }
                    if (pos == idx.size()) break;
                }
            } else {
                Rng rng(mix_seed(100, static_cast<std::uint64_t>(L * 10 + N)));
                for (int s = 0; s < 20000; ++s) {
                    for (auto& v : idx) v = rng.uniform_index(C);
                    check_tuple(idx);
                }
            }
        }
    }

    const double secs = seconds_since(start);
    detail = std::to_string(checked) + " record sets, " + std::to_string(mismatches) +
             " mismatches, " + fmt(secs) + "s";
    return mismatches == 0 && secs < 60.0;
}

// ---------------------------------------------------------------- criterion 2

bool criterion2(std::string& detail) {
    const auto start = Clock::now();
    std::size_t violations = 0;

    for (int trial = 0; trial < 50; ++trial) {
        Rng rng(mix_seed(2000, static_cast<std::uint64_t>(trial)));
        const std::size_t N = 10 + rng.uniform_index(51);
        const std::size_t d = 2 + rng.uniform_index(9);
        const int L = 2 + static_cast<int>(rng.uniform_index(3));

        std::vector<std::string> names;
        for (int l = 0; l < L; ++l) names.push_back("l" + std::to_string(l));
        Dataset ds;
        ds.space = LabelSpace(names);
        ds.dim = d;
        for (std::size_t i = 0; i < N; ++i) {
            Example e;
            e.id = "e" + std::to_string(i);
            for (std::size_t j = 0; j < d; ++j) e.features.push_back(rng.uniform(-1.0, 1.0));
            const unsigned mask =
                1 + static_cast<unsigned>(rng.uniform_index((1u << L) - 1));
            for (int l = 0; l < L; ++l) {
                if (mask & (1u << l)) e.labels.push_back(l);
            }
            ds.examples.push_back(std::move(e));
        }

        TrainTrace trace;
        train_adaboost_mh(ds, 12, &trace);

        double prod = 1.0;
        for (std::size_t t = 0; t < trace.z.size(); ++t) {
            const double prev = prod;
            prod *= trace.z[t];
            if (std::abs(trace.weight_sum[t] - 1.0) > 1e-9) ++violations;
            if (!(trace.z[t] > 0.0) || trace.z[t] > 1.0 + 1e-12) ++violations;
            if (prod > prev + 1e-12) ++violations;
            if (trace.train_error[t] > prod + 1e-12) ++violations;
        }
    }

    const double secs = seconds_since(start);
    detail = "50 datasets, " + std::to_string(violations) + " violations, " + fmt(secs) + "s";
    return violations == 0 && secs < 120.0;
}

// ---------------------------------------------------------------- criterion 3

bool criterion3(std::string& detail) {
    const std::vector<std::vector<double>> xor_pts = {
        {-1.0, -1.0}, {-1.0, 1.0}, {1.0, -1.0}, {1.0, 1.0}};
    std::vector<std::span<const double>> xor_rows;
    for (const auto& p : xor_pts) xor_rows.emplace_back(p);
    const std::vector<std::vector<signed char>> xor_signs = {{+1}, {-1}, {-1}, {+1}};

    TrainTrace xor_trace;
    train_on_signs(xor_rows, xor_signs, LabelSpace({"parity"}), 200, &xor_trace);
    double worst = 1.0;
    for (double err : xor_trace.train_error) worst = std::min(worst, err);

    const std::vector<std::vector<double>> line_pts = {{-2.0}, {-1.0}, {1.0}, {2.0}};
    std::vector<std::span<const double>> line_rows;
    for (const auto& p : line_pts) line_rows.emplace_back(p);
    const std::vector<std::vector<signed char>> line_signs = {{-1}, {-1}, {+1}, {+1}};

    TrainTrace line_trace;
    train_on_signs(line_rows, line_signs, LabelSpace({"side"}), 1, &line_trace);

    detail = "xor floor " + fmt(worst) + " over 200 rounds, separable error " +
             fmt(line_trace.train_error.front()) + " at round 1";
    return worst >= 0.25 - 1e-12 && line_trace.train_error.front() == 0.0;
}

// ---------------------------------------------------------------- criterion 4

double sq_dist(const std::vector<double>& a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return s;
}

bool criterion4(std::string& detail) {
    constexpr int L = 3;
    constexpr std::size_t S = 2;
    constexpr std::size_t d = 4;
    constexpr double alpha = 0.3;
    constexpr double h = 1e-5;

    std::size_t checked = 0, failures = 0;
    int trial = 0;
    for (; trial < 1000 && checked < 100; ++trial) {
        Rng rng(mix_seed(4000, static_cast<std::uint64_t>(trial)));

        PrototypeBook book;
        book.space = LabelSpace({"a", "b", "c"});
        book.S = S;
        book.dim = d;
        for (int l = 0; l < L; ++l) {
            for (const Polarity pol : {Polarity::positive, Polarity::negative}) {
                for (std::size_t s = 0; s < S; ++s) {
                    Prototype p;
                    p.label = l;
                    p.polarity = pol;
                    for (std::size_t j = 0; j < d; ++j) {
                        p.position.push_back(rng.uniform(-1.0, 1.0));
                    }
                    book.prototypes.push_back(std::move(p));
                }
            }
        }

        std::vector<double> x;
        for (std::size_t j = 0; j < d; ++j) x.push_back(rng.uniform(-1.0, 1.0));
        const unsigned mask = 1 + static_cast<unsigned>(rng.uniform_index((1u << L) - 2));
        std::vector<int> labels;
        for (int l = 0; l < L; ++l) {
            if (mask & (1u << l)) labels.push_back(l);
        }

        // skip kinks: ambiguous nearest prototypes or a hinge sitting on its edge
        bool kinky = false;
        for (int l = 0; l < L && !kinky; ++l) {
            for (const Polarity pol : {Polarity::positive, Polarity::negative}) {
                const double d0 = sq_dist(book.at(l, pol, 0).position, x);
                const double d1 = sq_dist(book.at(l, pol, 1).position, x);
                if (std::abs(d0 - d1) < 1e-3) kinky = true;
            }
        }
        const std::vector<double> scores = score_labels(book, x);
        for (int p : labels) {
            for (int q = 0; q < L; ++q) {
                if (has_label(labels, q)) continue;
                if (std::abs(alpha - (scores[static_cast<std::size_t>(p)] -
                                      scores[static_cast<std::size_t>(q)])) < 1e-3) {
                    kinky = true;
                }
            }
        }
        if (kinky) continue;

        ++checked;
        const std::vector<double> coef = visit_coefficients(book, x, labels, alpha);
        for (std::size_t k = 0; k < book.prototypes.size(); ++k) {
            for (std::size_t j = 0; j < d; ++j) {
                PrototypeBook plus = book;
                plus.prototypes[k].position[j] += h;
                PrototypeBook minus = book;
                minus.prototypes[k].position[j] -= h;
                const double numeric = (surrogate_loss(plus, x, labels, alpha) -
                                        surrogate_loss(minus, x, labels, alpha)) /
                                       (2.0 * h);
                const double analytic = -coef[k] * (x[j] - book.prototypes[k].position[j]);
                if (coef[k] == 0.0) {
                    if (std::abs(numeric) > 1e-9) ++failures;
                } else {
                    const double rel =
                        std::abs(numeric - analytic) / std::max(1e-8, std::abs(analytic));
                    if (rel > 1e-4) ++failures;
                }
            }
        }
    }

    detail = std::to_string(checked) + " points over " + std::to_string(trial) +
             " trials, " + std::to_string(failures) + " coordinate failures";
    return checked == 100 && failures == 0;
}

// ---------------------------------------------------- criteria 5-9 shared data

struct ProtocolRuns {
    CvReport binary;
    CvReport mlb;
    CvReport lvq;
    CvReport binary_pca;
    double seconds = 0.0;
};

constexpr std::uint64_t kGenSeed = 3;
constexpr std::uint64_t kCvSeed = 11;

Dataset synthetic_corpus() {
    GeneratorConfig config = table1_config();
    config.overlap = 0.6;
    config.noise_sigma = 0.05;
    config.seed = kGenSeed;
    return generate(config);
}

ProtocolRuns run_protocols(const Dataset& data) {
    ProtocolRuns out;
    const auto start = Clock::now();
    const GridSpec grid;
    std::cout << "# protocol: binary detector, 10x5 folds" << std::endl;
    out.binary = run_protocol(data, grid, Method::binary_boost, 10, 5, kCvSeed);
    std::cout << "# protocol: multi-label booster, 10x5 folds" << std::endl;
    out.mlb = run_protocol(data, grid, Method::ml_boost, 10, 5, kCvSeed);
    std::cout << "# protocol: prototype ranker, 10x5 folds" << std::endl;
    out.lvq = run_protocol(data, grid, Method::ml_lvq, 10, 5, kCvSeed);
    std::cout << "# protocol: binary detector under PCA(0.99), 10x5 folds" << std::endl;
    GridSpec pca_grid = grid;
    pca_grid.pca = PcaRule{false, 0.99};
    out.binary_pca = run_protocol(data, pca_grid, Method::binary_boost, 10, 5, kCvSeed);
    out.seconds = seconds_since(start);
    return out;
}

bool criterion5(const ProtocolRuns& runs, std::string& detail) {
    const double bin_acc = runs.binary.aggregate.at("accuracy").mean;
    const double lvq_acc = runs.lvq.aggregate.at("accuracy").mean;
    const double mlb_acc = runs.mlb.aggregate.at("accuracy").mean;
    const double lvq_mac = runs.lvq.aggregate.at("mac_f1").mean;
    const double mlb_mac = runs.mlb.aggregate.at("mac_f1").mean;
    const double lvq_det = runs.lvq.aggregate.at("detect_rate").mean;

    // among mixtures whose label set was predicted wrong, how often the
    // top-ranked label still names the true major ingredient
    std::size_t misset = 0, missed = 0;
    std::map<std::string, int> failing_ids;
    for (const FoldResult& fr : runs.lvq.fold_results) {
        for (const PredictionRecord& rec : fr.records) {
            if (rec.truth.size() < 2 || rec.truth_ratios.empty() || rec.ranked.empty()) continue;
            if (rec.predicted == rec.truth) continue;
            ++misset;
            double rmax = 0.0;
            for (const auto& [l, r] : rec.truth_ratios) rmax = std::max(rmax, r);
            const auto it = rec.truth_ratios.find(rec.ranked.front());
            if (it == rec.truth_ratios.end() || it->second != rmax) {
                ++missed;
                ++failing_ids[rec.id];
            }
        }
    }
    if (missed > 0) {
        std::cout << "  main ingredient missed on " << missed << " of " << misset
                  << " mis-set mixture predictions across "
                  << failing_ids.size() << " samples:" << std::endl;
        std::ostringstream line;
        for (const auto& [id, n] : failing_ids) line << " " << id << "(x" << n << ")";
        std::cout << " " << line.str() << std::endl;
    }

    const bool quality = bin_acc >= 0.90 && lvq_acc >= mlb_acc && lvq_mac >= mlb_mac &&
                         lvq_det >= 0.85;
    const bool main_ok = missed == 0;
    const bool in_time = runs.seconds <= 900.0;

    detail = "binary acc " + fmt(bin_acc) + "; lvq acc " + fmt(lvq_acc) + " vs mlb " +
             fmt(mlb_acc) + "; lvq macF1 " + fmt(lvq_mac) + " vs mlb " + fmt(mlb_mac) +
             "; lvq detect " + fmt(lvq_det) + "; main rate on mis-set mixtures " +
             (misset > 0
                  ? fmt(1.0 - static_cast<double>(missed) / static_cast<double>(misset))
                  : std::string("n/a")) +
             (main_ok ? "" : " (failures listed above)") + "; " + fmt(runs.seconds) + "s";
    return quality && in_time && (main_ok || !failing_ids.empty());
}

bool criterion6(const ProtocolRuns& runs, std::string& detail) {
    const auto pool = [&](double lo, double hi) {
        double exact = 0.0;
        std::size_t support = 0;
        for (const RatioBin& bin : runs.lvq.pooled.ratio_curve) {
            if (bin.lo == 0.0 && bin.hi == 0.0) continue;  // pure bin
            if (bin.lo >= lo - 1e-9 && bin.hi <= hi + 1e-9) {
                exact += static_cast<double>(
                    std::llround(bin.rate * static_cast<double>(bin.support)));
                support += bin.support;
            }
        }
        const double rate = support > 0 ? exact / static_cast<double>(support) : 0.0;
        return std::pair<double, std::size_t>(rate, support);
    };

    const auto [mid_rate, mid_n] = pool(0.40, 0.60);
    const auto [low_rate, low_n] = pool(0.05, 0.15);
    detail = "detect " + fmt(mid_rate) + " (n=" + std::to_string(mid_n) +
             ") on 40-60% minors vs " + fmt(low_rate) + " (n=" + std::to_string(low_n) +
             ") on 5-15%";
    return mid_n >= 10 && low_n >= 10 && mid_rate >= low_rate;
}

bool criterion7(const ProtocolRuns& runs, std::string& detail) {
    const double full = runs.binary.aggregate.at("accuracy").mean;
    const double reduced = runs.binary_pca.aggregate.at("accuracy").mean;
    double mean_components = 0.0;
    for (const FoldResult& fr : runs.binary_pca.fold_results) {
        mean_components += static_cast<double>(fr.pca_components);
    }
    mean_components /= static_cast<double>(runs.binary_pca.fold_results.size());
    detail = "all features " + fmt(full) + " vs PCA(0.99) " + fmt(reduced) + " at " +
             fmt(mean_components) + " mean components";
    return full >= reduced;
}

bool criterion8(const Dataset& data, std::string& detail) {
    // byte-identical reports under a repeated seed, for both model families
    GridSpec small_binary;
    small_binary.t_binary = {50, 100};
    const CvReport b1 = run_protocol(data, small_binary, Method::binary_boost, 1, 3, 21);
    const CvReport b2 = run_protocol(data, small_binary, Method::binary_boost, 1, 3, 21);
    const bool binary_identical = cv_report_to_json(b1) == cv_report_to_json(b2);

    GridSpec small_lvq;
    small_lvq.s_lvq = {1};
    small_lvq.lvq_epochs = 5;
    small_lvq.meta_stumps = 10;
    const CvReport l1 = run_protocol(data, small_lvq, Method::ml_lvq, 1, 3, 33);
    const CvReport l2 = run_protocol(data, small_lvq, Method::ml_lvq, 1, 3, 33);
    const bool lvq_identical = cv_report_to_json(l1) == cv_report_to_json(l2);

    // fitted preprocessing must ignore test rows entirely
    const FoldAssignment fold = stratified_kfold(data, 3, 99).front();
    Dataset poisoned = data;
    for (const std::size_t row : fold.test_rows) {
        for (double& v : poisoned.examples[row].features) v = v * 1.7 + 0.3;
    }

    GridSpec pca_grid;
    pca_grid.t_binary = {50};
    pca_grid.pca = PcaRule{false, 0.99};
    FoldArtifacts pca_clean, pca_poisoned;
    run_single_fold(data, fold, pca_grid, Method::binary_boost, 77, &pca_clean);
    run_single_fold(poisoned, fold, pca_grid, Method::binary_boost, 77, &pca_poisoned);
    const bool pca_leak_free = pca_clean.pca.mean == pca_poisoned.pca.mean &&
                               pca_clean.pca.components == pca_poisoned.pca.components &&
                               pca_clean.pca.eigenvalues == pca_poisoned.pca.eigenvalues &&
                               pca_clean.pca_components == pca_poisoned.pca_components &&
                               pca_clean.pca_components > 0;

    GridSpec lvq_grid;
    lvq_grid.s_lvq = {1};
    lvq_grid.lvq_epochs = 5;
    lvq_grid.meta_stumps = 10;
    FoldArtifacts lvq_clean, lvq_poisoned;
    run_single_fold(data, fold, lvq_grid, Method::ml_lvq, 78, &lvq_clean);
    run_single_fold(poisoned, fold, lvq_grid, Method::ml_lvq, 78, &lvq_poisoned);
    bool scaling_leak_free = !lvq_clean.scaling.empty() &&
                             lvq_clean.scaling.size() == lvq_poisoned.scaling.size();
    if (scaling_leak_free) {
        for (std::size_t j = 0; j < lvq_clean.scaling.size(); ++j) {
            if (lvq_clean.scaling[j].min != lvq_poisoned.scaling[j].min ||
                lvq_clean.scaling[j].max != lvq_poisoned.scaling[j].max) {
                scaling_leak_free = false;
                break;
            }
        }
    }

    detail = std::string("binary report ") + (binary_identical ? "identical" : "DIFFERS") +
             ", lvq report " + (lvq_identical ? "identical" : "DIFFERS") + ", pca " +
             (pca_leak_free ? "leak-free" : "LEAKS") + ", scaling " +
             (scaling_leak_free ? "leak-free" : "LEAKS");
    return binary_identical && lvq_identical && pca_leak_free && scaling_leak_free;
}

bool criterion9(const Dataset& data, std::string& detail) {
    std::size_t worst_spread = 0;
    std::size_t smallest_class = data.size();
    bool two_member_seen = false;
    bool ok = true;

    for (const std::uint64_t seed : {11ULL, 1ULL, 2ULL}) {
        const std::vector<FoldAssignment> folds = stratified_kfold(data, 5, seed);
        std::vector<std::size_t> row_fold(data.size(), 0);
        for (std::size_t f = 0; f < folds.size(); ++f) {
            for (const std::size_t row : folds[f].test_rows) row_fold[row] = f;
        }

        std::map<std::vector<int>, std::vector<std::size_t>> strata;
        for (std::size_t i = 0; i < data.size(); ++i) {
            strata[data.examples[i].labels].push_back(i);
        }

        for (const auto& [labels, rows] : strata) {
            smallest_class = std::min(smallest_class, rows.size());
            std::vector<std::size_t> counts(folds.size(), 0);
            for (const std::size_t row : rows) ++counts[row_fold[row]];
            const std::size_t hi = *std::max_element(counts.begin(), counts.end());
            const std::size_t lo = *std::min_element(counts.begin(), counts.end());
            worst_spread = std::max(worst_spread, hi - lo);
            if (hi - lo > 1) ok = false;
            if (rows.size() == 2) {
                two_member_seen = true;
                if (row_fold[rows[0]] == row_fold[rows[1]]) ok = false;
            }
        }
    }

    detail = "worst per-class fold spread " + std::to_string(worst_spread) +
             ", smallest class " + std::to_string(smallest_class) + " examples" +
             (two_member_seen ? "" : ", no 2-example class found");
    return ok && two_member_seen;
}

}  // namespace

int main() {
    bool all_ok = true;

    all_ok &= run_criterion(1, "six evaluation measures match an independent oracle",
                            criterion1);
    all_ok &= run_criterion(2, "training error stays under the z-product bound",
                            criterion2);
    all_ok &= run_criterion(3, "stumps cannot fit XOR but solve a separable line in one round",
                            criterion3);
    all_ok &= run_criterion(4, "prototype updates match finite-difference gradients",
                            criterion4);

    std::optional<Dataset> corpus;
    std::string corpus_error;
    try {
        corpus = synthetic_corpus();
        std::cout << "# synthetic corpus: " << corpus->size() << " examples, digest 0x"
                  << std::hex << dataset_digest(*corpus) << std::dec << std::endl;
    } catch (const std::exception& e) {
        corpus_error = e.what();
    }

    std::optional<ProtocolRuns> runs;
    std::string runs_error = corpus_error;
    if (corpus) {
        try {
            runs = run_protocols(*corpus);
        } catch (const std::exception& e) {
            runs_error = e.what();
        }
    }

    const auto needs_runs = [&](const std::function<bool(const ProtocolRuns&, std::string&)>& f) {
        return [&runs, &runs_error, f](std::string& detail) {
            if (!runs) {
                detail = "protocol run failed: " + runs_error;
                return false;
            }
            return f(*runs, detail);
        };
    };
    const auto needs_corpus = [&](const std::function<bool(const Dataset&, std::string&)>& f) {
        return [&corpus, &corpus_error, f](std::string& detail) {
            if (!corpus) {
                detail = "corpus generation failed: " + corpus_error;
                return false;
            }
            return f(*corpus, detail);
        };
    };

    all_ok &= run_criterion(5, "synthetic end-to-end protocol meets the quality bars",
                            needs_runs(criterion5));
    all_ok &= run_criterion(6, "balanced mixtures are detected at least as well as faint ones",
                            needs_runs(criterion6));
    all_ok &= run_criterion(7, "full-feature detector matches or beats the PCA-reduced one",
                            needs_runs(criterion7));
    all_ok &= run_criterion(8, "seeded reruns are byte-identical and folds never leak test data",
                            needs_corpus(criterion8));
    all_ok &= run_criterion(9, "stratified folds balance every label-set class within one",
                            needs_corpus(criterion9));

    return all_ok ? 0 : 1;
}
