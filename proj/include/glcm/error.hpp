#ifndef GLCM_ERROR_HPP
#define GLCM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace glcm {

// Bad input, bad configuration, or a violated precondition. Maps to exit code 2.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure: solver divergence, non-finite loss. Maps to exit code 3.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace detail
}  // namespace glcm

#endif  // GLCM_ERROR_HPP
