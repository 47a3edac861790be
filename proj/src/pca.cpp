#include "oilml/pca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "textio.hpp"

namespace oilml {

namespace {

constexpr double kZeroEigenvalueRatio = 1e-12;

using textio::format_double;

}  // namespace

PcaModel fit_pca(const Dataset& dataset) {
    validate(dataset);
    const std::size_t n = dataset.examples.size();
    const std::size_t d = dataset.dim;
    if (n < 2) throw data_error("PCA needs at least 2 examples");

    Eigen::MatrixXd x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) x(i, j) = dataset.examples[i].features[j];
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    const Eigen::MatrixXd& v = svd.matrixV();

    const std::size_t retained = std::min<std::size_t>({n - 1, d,
                                                        static_cast<std::size_t>(sigma.size())});
    PcaModel model;
    model.mean.assign(mean.data(), mean.data() + d);
    model.components.resize(retained);
    model.eigenvalues.resize(retained);
    for (std::size_t k = 0; k < retained; ++k) {
        const double s = sigma(static_cast<Eigen::Index>(k));
        model.eigenvalues[k] = s * s / static_cast<double>(n - 1);
        model.components[k].resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            model.components[k][j] = v(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
        }
        // sign convention: the largest-magnitude coordinate is positive
        std::size_t arg = 0;
        double best = std::abs(model.components[k][0]);
        for (std::size_t j = 1; j < d; ++j) {
            const double mag = std::abs(model.components[k][j]);
            if (mag > best) {
                best = mag;
                arg = j;
            }
        }
        if (model.components[k][arg] < 0.0) {
            for (double& c : model.components[k]) c = -c;
        }
    }
    if (!model.eigenvalues.empty()) {
        const double cutoff = kZeroEigenvalueRatio * model.eigenvalues.front();
        for (double& ev : model.eigenvalues) {
            if (ev < cutoff) ev = 0.0;
        }
    }
    return model;
}

std::size_t select_components(const PcaModel& model, const PcaRule& rule) {
    if (model.components.empty()) throw data_error("PCA model holds no components");
    if (rule.positive_only) {
        std::size_t count = 0;
        for (double ev : model.eigenvalues) {
            if (ev > 0.0) ++count;
        }
        return count;
    }
    if (!(rule.threshold > 0.0) || rule.threshold > 1.0) {
        throw data_error("variance threshold must lie in (0, 1]");
    }
    double total = 0.0;
    for (double ev : model.eigenvalues) total += ev;
    if (total == 0.0) return 0;
    double cum = 0.0;
    for (std::size_t m = 0; m < model.eigenvalues.size(); ++m) {
        cum += model.eigenvalues[m];
        if (cum >= rule.threshold * total) return m + 1;
    }
    return model.eigenvalues.size();
}

std::vector<double> project(const PcaModel& model, std::span<const double> x, std::size_t m) {
    if (m > model.components.size()) {
        throw data_error("requested " + std::to_string(m) + " components, model holds " +
                         std::to_string(model.components.size()));
    }
    if (x.size() != model.mean.size()) {
        throw data_error("input dimension differs from the PCA model dimension");
    }
    std::vector<double> out(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        double dot = 0.0;
        const std::vector<double>& comp = model.components[k];
        for (std::size_t j = 0; j < x.size(); ++j) dot += (x[j] - model.mean[j]) * comp[j];
        out[k] = dot;
    }
    return out;
}

Dataset project_dataset(const PcaModel& model, const Dataset& dataset, std::size_t m) {
    Dataset out;
    out.space = dataset.space;
    out.dim = m;
    out.examples.reserve(dataset.examples.size());
    for (const Example& ex : dataset.examples) {
        Example proj;
        proj.id = ex.id;
        proj.labels = ex.labels;
        proj.ratios = ex.ratios;
        proj.features = project(model, ex.features, m);
        out.examples.push_back(std::move(proj));
    }
    return out;
}

void write_pca_text(std::ostream& out, const PcaModel& model) {
    if (model.components.size() != model.eigenvalues.size()) {
        throw data_error("PCA component and eigenvalue counts differ");
    }
    out << "oilml-pca 1\n";
    out << "dim " << model.mean.size() << "\ncomponents " << model.components.size() << "\n";
    out << "mean";
    for (double v : model.mean) out << ' ' << format_double(v);
    out << "\neigenvalues";
    for (double ev : model.eigenvalues) out << ' ' << format_double(ev);
    out << "\n";
    for (const std::vector<double>& comp : model.components) {
        out << "component";
        for (double v : comp) out << ' ' << format_double(v);
        out << "\n";
    }
    out << "end\n";
}

namespace {

std::string pca_token(std::istream& in, const char* what) {
    std::string tok;
    if (!(in >> tok)) throw data_error(std::string("PCA model file ends before ") + what);
    return tok;
}

void pca_expect(std::istream& in, const char* keyword) {
    const std::string tok = pca_token(in, keyword);
    if (tok != keyword) {
        throw data_error("PCA model file: expected '" + std::string(keyword) + "', found '" + tok +
                         "'");
    }
}

}  // namespace

PcaModel read_pca_text(std::istream& in) {
    pca_expect(in, "oilml-pca");
    if (pca_token(in, "the format version") != "1") {
        throw data_error("unknown PCA model format version");
    }
    pca_expect(in, "dim");
    const long long d = textio::parse_int(pca_token(in, "the dimension"), "dimension");
    pca_expect(in, "components");
    const long long r = textio::parse_int(pca_token(in, "the component count"), "component count");
    if (d < 1 || r < 0) throw data_error("PCA model file declares a bad shape");

    PcaModel model;
    pca_expect(in, "mean");
    model.mean.resize(static_cast<std::size_t>(d));
    for (double& v : model.mean) v = textio::parse_double(pca_token(in, "a mean value"), "mean value");
    pca_expect(in, "eigenvalues");
    model.eigenvalues.resize(static_cast<std::size_t>(r));
    for (double& ev : model.eigenvalues) {
        ev = textio::parse_double(pca_token(in, "an eigenvalue"), "eigenvalue");
        if (!(ev >= 0.0)) throw data_error("negative eigenvalue in PCA model file");
    }
    model.components.resize(static_cast<std::size_t>(r));
    for (std::vector<double>& comp : model.components) {
        pca_expect(in, "component");
        comp.resize(static_cast<std::size_t>(d));
        for (double& v : comp) {
            v = textio::parse_double(pca_token(in, "a component value"), "component value");
        }
    }
    pca_expect(in, "end");
    return model;
}

void save_pca(const PcaModel& model, const std::filesystem::path& path) {
    std::ostringstream out;
    write_pca_text(out, model);
    textio::atomic_write(path, out.str());
}

PcaModel load_pca(const std::filesystem::path& path) {
    std::istringstream in(textio::read_file(path));
    return read_pca_text(in);
}

}  // namespace oilml
