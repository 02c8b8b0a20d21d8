#pragma once

#include <stdexcept>
#include <string>

namespace weakmeas {

/// Bad configuration or bad arguments. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure at run time (non-finite state, scheme blow-up, non-finite
/// output value). The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace weakmeas
