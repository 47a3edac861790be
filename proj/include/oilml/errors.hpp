#ifndef OILML_ERRORS_HPP
#define OILML_ERRORS_HPP

#include <stdexcept>

namespace oilml {

/// Malformed or inconsistent input data (CSV problems, dimension mismatches,
/// bad ratios, unknown labels).
class data_error : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A model cannot be trained on the given data (degenerate dataset, empty
/// label group, no usable grid point).
class train_error : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace oilml

#endif
