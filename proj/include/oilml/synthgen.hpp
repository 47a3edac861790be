#ifndef OILML_SYNTHGEN_HPP
#define OILML_SYNTHGEN_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oilml/dataset.hpp"
#include "oilml/errors.hpp"

namespace oilml {

struct Peak {
    double center = 0.0;
    double width = 1.0;
    double height = 1.0;
};

struct OilProfile {
    std::string name;
    std::vector<Peak> peaks;  // at least 3
};

// One dataset row: a pure oil (one component, ratio fixed at 1) or a two-oil
// mixture whose first component takes a ratio drawn from [lo, hi].
struct MixtureSpec {
    std::vector<std::string> components;
    double lo = 1.0;
    double hi = 1.0;
    std::size_t count = 0;
};

struct GeneratorConfig {
    std::size_t d = 1607;
    std::vector<OilProfile> profiles;
    std::vector<MixtureSpec> rows;
    double noise_sigma = 0.05;
    double overlap = 0.6;       // 0 = profiles as listed, 1 = all collapse to one template
    std::uint64_t seed = 1;
};

// The bundled nine-oil preset: 246 pure + 124 mixture examples over 21 rows.
GeneratorConfig table1_config();

// Sum of Gaussian bumps, normalized to unit maximum.
std::vector<double> render_profile(const OilProfile& profile, std::size_t d);

// Profiles after the overlap knob pulls peak parameters toward the per-index
// mean template.
std::vector<OilProfile> effective_profiles(const GeneratorConfig& config);

Dataset generate(const GeneratorConfig& config);

void save_generator_config(const GeneratorConfig& config, const std::filesystem::path& path);
GeneratorConfig load_generator_config(const std::filesystem::path& path);

}  // namespace oilml

#endif
