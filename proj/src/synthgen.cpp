#include "oilml/synthgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "oilml/rng.hpp"
#include "textio.hpp"

namespace oilml {

namespace {

using textio::format_double;

constexpr std::size_t kPeakCount = 7;

// Shared template: six broad bumps plus a narrow low-amplitude marker near the
// tail.  The marker carries little variance, so aggressive dimensionality
// reduction tends to drop it.
constexpr double kBaseCenter[kPeakCount] = {180.0, 420.0, 660.0, 900.0, 1140.0, 1380.0, 1520.0};
constexpr double kBaseWidth[kPeakCount] = {28.0, 38.0, 33.0, 43.0, 30.0, 35.0, 8.0};
constexpr double kBaseHeight[kPeakCount] = {0.55, 0.95, 0.75, 1.00, 0.60, 0.40, 0.06};

const char* const kOilNames[9] = {
    "soybean", "peanut", "sunflower", "corn", "palm", "sesame", "cotton", "rap", "rice_bran",
};

constexpr double kCenterOffset[9][kPeakCount] = {
    {+5, -10, +11, -2, +6, -13, +12},     // soybean
    {-11, +7, -2, +9, -13, +3, -9},       // peanut
    {+21, -4, -16, +20, +3, +17, +3},     // sunflower
    {-13, +42, +18, -34, +31, -5, -13},   // corn
    {+4, -14, +35, +10, -18, +27, +7},    // palm
    {-9, +11, -5, -14, +3, +7, -5},       // sesame
    {+45, +11, +35, +28, -18, -45, +13},  // cotton
    {-8, -15, +3, +16, +14, +6, -12},     // rap
    {+10, +5, -16, -7, -14, -5, +6},      // rice_bran
};

constexpr double kHeightScale[9][kPeakCount] = {
    {1.050, 0.925, 1.000, 0.975, 1.075, 0.950, 1.0},
    {0.950, 1.075, 1.025, 1.050, 0.900, 1.025, 1.0},
    {1.100, 0.975, 0.925, 1.000, 1.050, 1.075, 1.0},
    {0.925, 1.025, 1.100, 0.950, 0.975, 1.050, 1.0},
    {1.025, 1.100, 0.950, 1.075, 0.925, 0.975, 1.0},
    {0.975, 0.950, 1.050, 0.925, 1.100, 1.025, 1.0},
    {1.075, 1.000, 0.975, 1.100, 1.025, 0.925, 1.0},
    {0.900, 1.050, 1.075, 1.025, 0.950, 1.100, 1.0},
    {1.000, 0.900, 0.975, 1.050, 1.075, 0.925, 1.0},
};

constexpr double kWidthScale[9][kPeakCount] = {
    {1.00, 1.10, 0.90, 1.05, 0.95, 1.00, 1.0},
    {1.10, 0.95, 1.05, 0.90, 1.00, 1.10, 1.0},
    {0.90, 1.00, 1.10, 0.95, 1.05, 0.90, 1.0},
    {1.05, 0.90, 1.00, 1.10, 0.90, 1.05, 1.0},
    {0.95, 1.05, 0.95, 1.00, 1.10, 0.95, 1.0},
    {1.10, 0.90, 1.05, 0.95, 1.00, 1.10, 1.0},
    {1.00, 1.05, 0.90, 1.10, 0.95, 1.00, 1.0},
    {0.90, 1.10, 1.00, 0.90, 1.05, 0.95, 1.0},
    {1.05, 0.95, 1.10, 1.00, 0.90, 1.05, 1.0},
};

struct RowSpec {
    const char* a;
    const char* b;  // nullptr for pure rows
    std::size_t count;
};

constexpr RowSpec kTable1Rows[21] = {
    {"soybean", nullptr, 34},
    {"peanut", nullptr, 39},
    {"sunflower", nullptr, 17},
    {"corn", nullptr, 10},
    {"palm", nullptr, 27},
    {"sesame", nullptr, 37},
    {"cotton", nullptr, 0},
    {"rap", nullptr, 58},
    {"rice_bran", nullptr, 24},
    {"soybean", "sesame", 21},
    {"soybean", "palm", 9},
    {"soybean", "corn", 3},
    {"soybean", "sunflower", 3},
    {"soybean", "peanut", 9},
    {"sunflower", "sesame", 21},
    {"palm", "sesame", 9},
    {"peanut", "sesame", 20},
    {"peanut", "palm", 9},
    {"peanut", "corn", 2},
    {"peanut", "sunflower", 9},
    {"sesame", "cotton", 9},
};

void fail_key(const std::string& key, const std::string& detail) {
    throw data_error("generator config: " + key + " " + detail);
}

void validate_config(const GeneratorConfig& config) {
    if (config.d < 8) fail_key("d", "must be at least 8");
    if (!(config.noise_sigma >= 0.0) || !std::isfinite(config.noise_sigma))
        fail_key("noise_sigma", "must be a finite value >= 0");
    if (!(config.overlap >= 0.0 && config.overlap <= 1.0))
        fail_key("overlap", "must lie in [0, 1]");
    if (config.profiles.empty()) fail_key("profiles", "must list at least one oil");

    std::vector<std::string> names;
    for (const auto& profile : config.profiles) names.push_back(profile.name);
    LabelSpace space(names);  // throws on duplicate or malformed names
    for (const auto& profile : config.profiles) {
        if (profile.peaks.size() < 3)
            fail_key("profile." + profile.name, "needs at least 3 peaks");
        for (const auto& peak : profile.peaks) {
            if (!(peak.width > 0.0) || !(peak.height > 0.0))
                fail_key("profile." + profile.name, "has a peak with non-positive width/height");
            if (!(peak.center >= 0.0) || !(peak.center < static_cast<double>(config.d)))
                fail_key("profile." + profile.name, "has a peak center outside [0, d)");
        }
    }

    if (config.rows.empty()) fail_key("rows", "must list at least one row");
    for (std::size_t r = 0; r < config.rows.size(); ++r) {
        const auto& row = config.rows[r];
        const std::string key = "row." + std::to_string(r);
        if (row.components.empty() || row.components.size() > 2)
            fail_key(key, "must name one or two components");
        for (const auto& name : row.components) {
            if (space.index_of(name) < 0)
                fail_key(key, "references unknown oil \"" + name + "\"");
        }
        if (row.components.size() == 2) {
            if (row.components[0] == row.components[1])
                fail_key(key, "lists the same oil twice");
            if (!(row.lo >= 0.05 && row.lo <= row.hi && row.hi <= 0.99))
                fail_key(key, "needs a ratio range inside [0.05, 0.99]");
        }
    }
}

}  // namespace

GeneratorConfig table1_config() {
    GeneratorConfig config;
    config.d = 1607;
    config.noise_sigma = 0.05;
    config.overlap = 0.6;
    config.seed = 1;
    for (std::size_t o = 0; o < 9; ++o) {
        OilProfile profile;
        profile.name = kOilNames[o];
        for (std::size_t k = 0; k < kPeakCount; ++k) {
            Peak peak;
            peak.center = kBaseCenter[k] + kCenterOffset[o][k];
            peak.width = kBaseWidth[k] * kWidthScale[o][k];
            peak.height = kBaseHeight[k] * kHeightScale[o][k];
            profile.peaks.push_back(peak);
        }
        config.profiles.push_back(std::move(profile));
    }
    for (const auto& row : kTable1Rows) {
        MixtureSpec spec;
        spec.components.push_back(row.a);
        if (row.b != nullptr) {
            spec.components.push_back(row.b);
            spec.lo = 0.05;
            spec.hi = 0.99;
        } else {
            spec.lo = 1.0;
            spec.hi = 1.0;
        }
        spec.count = row.count;
        config.rows.push_back(std::move(spec));
    }
    return config;
}

std::vector<double> render_profile(const OilProfile& profile, std::size_t d) {
    if (d == 0) throw data_error("render_profile: d must be positive");
    if (profile.peaks.empty()) throw data_error("render_profile: profile has no peaks");
    std::vector<double> x(d, 0.0);
    for (const auto& peak : profile.peaks) {
        if (!(peak.width > 0.0)) throw data_error("render_profile: peak width must be positive");
        const double denom = 2.0 * peak.width * peak.width;
        for (std::size_t i = 0; i < d; ++i) {
            const double delta = static_cast<double>(i) - peak.center;
            x[i] += peak.height * std::exp(-delta * delta / denom);
        }
    }
    const double peak_value = *std::max_element(x.begin(), x.end());
    if (!(peak_value > 0.0)) throw data_error("render_profile: rendered profile is flat");
    for (double& v : x) v /= peak_value;
    return x;
}

std::vector<OilProfile> effective_profiles(const GeneratorConfig& config) {
    validate_config(config);
    std::size_t max_peaks = 0;
    for (const auto& profile : config.profiles) max_peaks = std::max(max_peaks, profile.peaks.size());

    // Per-index mean over the profiles that define that peak slot.
    std::vector<Peak> mean(max_peaks);
    std::vector<std::size_t> hits(max_peaks, 0);
    for (const auto& profile : config.profiles) {
        for (std::size_t k = 0; k < profile.peaks.size(); ++k) {
            mean[k].center += profile.peaks[k].center;
            mean[k].width += profile.peaks[k].width;
            mean[k].height += profile.peaks[k].height;
            ++hits[k];
        }
    }
    for (std::size_t k = 0; k < max_peaks; ++k) {
        mean[k].center /= static_cast<double>(hits[k]);
        mean[k].width /= static_cast<double>(hits[k]);
        mean[k].height /= static_cast<double>(hits[k]);
    }

    const double a = config.overlap;
    std::vector<OilProfile> out = config.profiles;
    for (auto& profile : out) {
        for (std::size_t k = 0; k < profile.peaks.size(); ++k) {
            Peak& p = profile.peaks[k];
            p.center += a * (mean[k].center - p.center);
            p.width += a * (mean[k].width - p.width);
            p.height += a * (mean[k].height - p.height);
        }
    }
    return out;
}

Dataset generate(const GeneratorConfig& config) {
    const auto profiles = effective_profiles(config);  // validates

    std::vector<std::string> names;
    for (const auto& profile : profiles) names.push_back(profile.name);
    LabelSpace space(names);

    std::vector<std::vector<double>> rendered;
    rendered.reserve(profiles.size());
    for (const auto& profile : profiles) rendered.push_back(render_profile(profile, config.d));

    Dataset data;
    data.space = space;
    data.dim = config.d;

    for (std::size_t r = 0; r < config.rows.size(); ++r) {
        const auto& row = config.rows[r];
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(r)));
        const int la = space.index_of(row.components[0]);
        const int lb = row.components.size() == 2 ? space.index_of(row.components[1]) : -1;
        for (std::size_t k = 0; k < row.count; ++k) {
            Example ex;
            ex.id = "r" + std::to_string(r) + "_" + std::to_string(k);
            if (lb < 0) {
                ex.features = rendered[static_cast<std::size_t>(la)];
                ex.labels = {la};
                ex.ratios[la] = 1.0;
            } else {
                const double ratio = rng.uniform(row.lo, row.hi);
                const auto& xa = rendered[static_cast<std::size_t>(la)];
                const auto& xb = rendered[static_cast<std::size_t>(lb)];
                ex.features.resize(config.d);
                for (std::size_t i = 0; i < config.d; ++i)
                    ex.features[i] = ratio * xa[i] + (1.0 - ratio) * xb[i];
                ex.labels = {std::min(la, lb), std::max(la, lb)};
                ex.ratios[la] = ratio;
                ex.ratios[lb] = 1.0 - ratio;
            }
            if (config.noise_sigma > 0.0) {
                for (double& v : ex.features) {
                    v = std::max(0.0, v * (1.0 + config.noise_sigma * rng.normal()));
                }
            }
            data.examples.push_back(std::move(ex));
        }
    }

    validate(data);
    return data;
}

namespace {

std::vector<std::string> split_on(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

std::string peaks_to_text(const std::vector<Peak>& peaks) {
    std::string out;
    for (std::size_t k = 0; k < peaks.size(); ++k) {
        if (k > 0) out += "|";
        out += format_double(peaks[k].center) + ":" + format_double(peaks[k].width) + ":" +
               format_double(peaks[k].height);
    }
    return out;
}

std::vector<Peak> peaks_from_text(const std::string& text, const std::string& key) {
    std::vector<Peak> peaks;
    for (const auto& part : split_on(text, '|')) {
        const auto fields = split_on(part, ':');
        if (fields.size() != 3) fail_key(key, "expects peaks as center:width:height entries");
        Peak peak;
        auto read = [&](const std::string& field, double& slot) {
            if (!textio::try_parse_double(field, slot))
                fail_key(key, "has a non-numeric peak field \"" + field + "\"");
        };
        read(fields[0], peak.center);
        read(fields[1], peak.width);
        read(fields[2], peak.height);
        peaks.push_back(peak);
    }
    return peaks;
}

}  // namespace

void save_generator_config(const GeneratorConfig& config, const std::filesystem::path& path) {
    validate_config(config);
    std::ostringstream out;
    out << "d=" << config.d << "\n";
    out << "seed=" << config.seed << "\n";
    out << "noise_sigma=" << format_double(config.noise_sigma) << "\n";
    out << "overlap=" << format_double(config.overlap) << "\n";
    out << "profiles=" << config.profiles.size() << "\n";
    for (std::size_t i = 0; i < config.profiles.size(); ++i) {
        out << "profile." << i << ".name=" << config.profiles[i].name << "\n";
        out << "profile." << i << ".peaks=" << peaks_to_text(config.profiles[i].peaks) << "\n";
    }
    out << "rows=" << config.rows.size() << "\n";
    for (std::size_t i = 0; i < config.rows.size(); ++i) {
        const auto& row = config.rows[i];
        out << "row." << i << ".components=";
        for (std::size_t c = 0; c < row.components.size(); ++c) {
            if (c > 0) out << ",";
            out << row.components[c];
        }
        out << "\n";
        out << "row." << i << ".range=" << format_double(row.lo) << "," << format_double(row.hi)
            << "\n";
        out << "row." << i << ".count=" << row.count << "\n";
    }
    textio::atomic_write(path, out.str());
}

GeneratorConfig load_generator_config(const std::filesystem::path& path) {
    const std::string text = textio::read_file(path);
    std::map<std::string, std::string> kv;
    std::size_t line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw data_error("generator config line " + std::to_string(line_no) +
                             ": expected key=value");
        const std::string key = line.substr(0, eq);
        if (kv.count(key) != 0)
            throw data_error("generator config line " + std::to_string(line_no) +
                             ": duplicate key \"" + key + "\"");
        kv[key] = line.substr(eq + 1);
    }

    auto take = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) fail_key(key, "is missing");
        std::string value = it->second;
        kv.erase(it);
        return value;
    };
    auto take_size = [&](const std::string& key) {
        long long v = 0;
        if (!textio::try_parse_int(take(key), v) || v < 0)
            fail_key(key, "must be a non-negative integer");
        return static_cast<std::size_t>(v);
    };
    auto take_double = [&](const std::string& key) {
        double v = 0.0;
        if (!textio::try_parse_double(take(key), v)) fail_key(key, "must be numeric");
        return v;
    };

    GeneratorConfig config;
    config.d = take_size("d");
    {
        const std::string value = take("seed");
        unsigned long long seed = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
        if (ec != std::errc{} || ptr != value.data() + value.size())
            fail_key("seed", "must be a non-negative integer");
        config.seed = seed;
    }
    config.noise_sigma = take_double("noise_sigma");
    config.overlap = take_double("overlap");

    const std::size_t profile_count = take_size("profiles");
    for (std::size_t i = 0; i < profile_count; ++i) {
        const std::string base = "profile." + std::to_string(i);
        OilProfile profile;
        profile.name = take(base + ".name");
        profile.peaks = peaks_from_text(take(base + ".peaks"), base + ".peaks");
        config.profiles.push_back(std::move(profile));
    }

    const std::size_t row_count = take_size("rows");
    for (std::size_t i = 0; i < row_count; ++i) {
        const std::string base = "row." + std::to_string(i);
        MixtureSpec row;
        for (const auto& name : split_on(take(base + ".components"), ','))
            row.components.push_back(name);
        const auto range = split_on(take(base + ".range"), ',');
        if (range.size() != 2) fail_key(base + ".range", "expects lo,hi");
        if (!textio::try_parse_double(range[0], row.lo) ||
            !textio::try_parse_double(range[1], row.hi))
            fail_key(base + ".range", "must be numeric");
        row.count = take_size(base + ".count");
        config.rows.push_back(std::move(row));
    }

    if (!kv.empty()) fail_key(kv.begin()->first, "is not a recognized key");
    validate_config(config);
    return config;
}

}  // namespace oilml
