#ifndef FCS_ERROR_HPP
#define FCS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fcs {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Contract violation by the caller: wrong dimensions, out-of-range options.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The data cannot support the requested computation (degenerate sample,
/// singular design, all-censored outcome, malformed input file).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to produce an estimate.
class EstimationError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace detail
}  // namespace fcs

#endif  // FCS_ERROR_HPP
