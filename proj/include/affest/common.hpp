#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace affest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Raised for malformed problem/estimator/observation documents. The message
// carries a JSON-path-style location, e.g. "$.channels[0].map_matrix".
struct SpecError : std::runtime_error {
    explicit SpecError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace affest
