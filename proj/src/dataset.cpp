#include "oilml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "textio.hpp"

namespace oilml {

namespace {

using textio::format_double;

constexpr double kRatioLoadTolerance = 1e-6;
constexpr double kRatioStoreTolerance = 1e-9;

// Splits a CSV line; a field may be wrapped in double quotes.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    for (char ch : line) {
        if (in_quotes) {
            if (ch == '"') in_quotes = false;
            else cur.push_back(ch);
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            parts.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    parts.push_back(std::move(cur));
    return parts;
}

[[noreturn]] void row_error(std::size_t line_no, const std::string& what) {
    throw data_error("row " + std::to_string(line_no) + ": " + what);
}

// Parses the labels column of one row. Each segment is `name[:ratio]`;
// either all segments carry ratios or none do.
void parse_labels_field(const std::string& field, const LabelSpace& space,
                        std::size_t line_no, std::vector<int>& labels,
                        std::map<int, double>& ratios) {
    labels.clear();
    ratios.clear();
    if (field.empty()) row_error(line_no, "empty labels field");

    const std::vector<std::string> segments = split(field, '|');
    bool any_ratio = false;
    bool all_ratio = true;
    for (const std::string& seg : segments) {
        const auto colon = seg.find(':');
        const std::string name = seg.substr(0, colon);
        const int idx = space.index_of(name);
        if (idx < 0) row_error(line_no, "unknown label name '" + name + "'");
        if (std::find(labels.begin(), labels.end(), idx) != labels.end()) {
            row_error(line_no, "duplicate label '" + name + "'");
        }
        labels.push_back(idx);
        if (colon == std::string::npos) {
            all_ratio = false;
            continue;
        }
        any_ratio = true;
        double r = 0.0;
        if (!textio::try_parse_double(std::string_view(seg).substr(colon + 1), r) ||
            !std::isfinite(r) || r <= 0.0 || r > 1.0) {
            row_error(line_no, "bad ratio in segment '" + seg + "'");
        }
        ratios[idx] = r;
    }
    if (any_ratio && !all_ratio) {
        row_error(line_no, "ratios present on some labels but not all");
    }
    std::sort(labels.begin(), labels.end());

    if (!ratios.empty()) {
        double sum = 0.0;
        for (const auto& [l, r] : ratios) sum += r;
        if (std::abs(sum - 1.0) > kRatioLoadTolerance) {
            row_error(line_no, "ratio sum " + format_double(sum) + " outside 1 +/- 1e-06");
        }
        // Normalize only when the raw values miss the stored tolerance, so a
        // save/load round trip leaves already-valid ratios bit-identical.
        if (std::abs(sum - 1.0) > kRatioStoreTolerance) {
            for (auto& [l, r] : ratios) r /= sum;
        }
    }
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

LabelSpace::LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw data_error("label space must hold at least one name");
    std::set<std::string> seen;
    for (const std::string& n : names_) {
        if (n.empty()) throw data_error("empty label name");
        for (char ch : n) {
            if (ch == ',' || ch == ':' || ch == '|' || ch == '"' || std::isspace(static_cast<unsigned char>(ch))) {
                throw data_error("label name '" + n + "' contains a reserved character");
            }
        }
        if (!seen.insert(n).second) throw data_error("duplicate label name '" + n + "'");
    }
}

int LabelSpace::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return static_cast<int>(i);
    }
    return -1;
}

void validate(const Dataset& dataset) {
    if (dataset.space.size() == 0) throw data_error("dataset has an empty label space");
    if (dataset.examples.empty()) throw data_error("dataset holds no examples");
    for (const Example& ex : dataset.examples) {
        if (ex.features.size() != dataset.dim) {
            throw data_error("example '" + ex.id + "' has dimension " +
                             std::to_string(ex.features.size()) + ", expected " +
                             std::to_string(dataset.dim));
        }
        for (double v : ex.features) {
            if (!std::isfinite(v)) throw data_error("example '" + ex.id + "' has a non-finite feature");
        }
        if (ex.labels.empty()) throw data_error("example '" + ex.id + "' has no labels");
        for (std::size_t i = 0; i < ex.labels.size(); ++i) {
            const int l = ex.labels[i];
            if (l < 0 || static_cast<std::size_t>(l) >= dataset.space.size()) {
                throw data_error("example '" + ex.id + "' has a label index out of range");
            }
            if (i > 0 && ex.labels[i - 1] >= l) {
                throw data_error("example '" + ex.id + "' labels are not sorted and distinct");
            }
        }
        if (ex.has_ratios()) {
            if (ex.ratios.size() != ex.labels.size()) {
                throw data_error("example '" + ex.id + "' ratio keys differ from labels");
            }
            double sum = 0.0;
            for (int l : ex.labels) {
                const auto it = ex.ratios.find(l);
                if (it == ex.ratios.end()) {
                    throw data_error("example '" + ex.id + "' ratio keys differ from labels");
                }
                sum += it->second;
            }
            if (std::abs(sum - 1.0) > kRatioStoreTolerance) {
                throw data_error("example '" + ex.id + "' ratios sum to " + format_double(sum));
            }
        }
    }
    if (!dataset.scaling.empty() && dataset.scaling.size() != dataset.dim) {
        throw data_error("scaling record length differs from the feature dimension");
    }
}

Dataset load_csv(const std::string& path, const LabelSpace& space) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw data_error("'" + path + "' is empty");
    const std::vector<std::string> header = split_csv_line(strip_cr(line));
    if (header.size() < 3 || header[0] != "id" || header[1] != "labels") {
        throw data_error("'" + path + "' header must start with id,labels and one feature column");
    }
    const std::size_t dim = header.size() - 2;

    Dataset ds;
    ds.space = space;
    ds.dim = dim;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != dim + 2) {
            row_error(line_no, "expected " + std::to_string(dim + 2) + " fields, found " +
                               std::to_string(fields.size()));
        }
        Example ex;
        ex.id = fields[0];
        parse_labels_field(fields[1], space, line_no, ex.labels, ex.ratios);
        ex.features.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            double v = 0.0;
            if (!textio::try_parse_double(fields[j + 2], v)) {
                row_error(line_no, "unparseable feature value '" + fields[j + 2] + "'");
            }
            if (!std::isfinite(v)) row_error(line_no, "non-finite feature value");
            ex.features[j] = v;
        }
        ds.examples.push_back(std::move(ex));
    }
    if (ds.examples.empty()) throw data_error("'" + path + "' holds no data rows");
    return ds;
}

std::string to_csv_text(const Dataset& dataset) {
    validate(dataset);
    std::ostringstream out;
    out << "id,labels";
    for (std::size_t j = 0; j < dataset.dim; ++j) out << ",f" << j;
    out << "\n";
    for (const Example& ex : dataset.examples) {
        if (ex.id.find_first_of(",\"\n") != std::string::npos) {
            throw data_error("example id '" + ex.id + "' contains a reserved character");
        }
        out << ex.id << ",\"";
        bool first = true;
        for (int l : ex.labels) {
            if (!first) out << '|';
            first = false;
            out << dataset.space.name(static_cast<std::size_t>(l));
            if (ex.has_ratios()) out << ':' << format_double(ex.ratios.at(l));
        }
        out << '"';
        for (double v : ex.features) out << ',' << format_double(v);
        out << "\n";
    }
    return out.str();
}

void save_csv(const Dataset& dataset, const std::string& path) {
    textio::atomic_write(path, to_csv_text(dataset));
}

LabelSpace infer_label_space(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw data_error("'" + path + "' is empty");

    std::vector<std::string> names;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() < 2) row_error(line_no, "missing labels column");
        for (const std::string& seg : split(fields[1], '|')) {
            const std::string name = seg.substr(0, seg.find(':'));
            if (name.empty()) row_error(line_no, "empty label name");
            if (std::find(names.begin(), names.end(), name) == names.end()) {
                names.push_back(name);
            }
        }
    }
    if (names.empty()) throw data_error("'" + path + "' holds no data rows");
    return LabelSpace(names);
}

Dataset scale_to_unit(const Dataset& dataset) {
    if (dataset.examples.empty()) throw data_error("cannot scale an empty dataset");
    std::vector<AttributeRange> ranges(dataset.dim);
    for (std::size_t j = 0; j < dataset.dim; ++j) {
        double lo = dataset.examples.front().features[j];
        double hi = lo;
        for (const Example& ex : dataset.examples) {
            lo = std::min(lo, ex.features[j]);
            hi = std::max(hi, ex.features[j]);
        }
        ranges[j] = {lo, hi};
    }
    return apply_scaling(dataset, ranges);
}

Dataset apply_scaling(const Dataset& dataset, const std::vector<AttributeRange>& scaling) {
    if (scaling.size() != dataset.dim) {
        throw data_error("scaling holds " + std::to_string(scaling.size()) +
                         " ranges for dimension " + std::to_string(dataset.dim));
    }
    Dataset out;
    out.space = dataset.space;
    out.dim = dataset.dim;
    out.scaling = scaling;
    out.examples.reserve(dataset.examples.size());
    for (const Example& ex : dataset.examples) {
        Example scaled = ex;
        for (std::size_t j = 0; j < dataset.dim; ++j) {
            const auto& [lo, hi] = scaling[j];
            scaled.features[j] = (hi > lo) ? 2.0 * (ex.features[j] - lo) / (hi - lo) - 1.0 : 0.0;
        }
        out.examples.push_back(std::move(scaled));
    }
    return out;
}

std::vector<SignedExample> binary_view(const Dataset& dataset) {
    std::vector<SignedExample> view;
    view.reserve(dataset.examples.size());
    for (const Example& ex : dataset.examples) {
        view.push_back({std::span<const double>(ex.features), ex.is_mixture() ? +1 : -1});
    }
    return view;
}

}  // namespace oilml
