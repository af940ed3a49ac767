#pragma once

#include <stdexcept>
#include <string>

namespace hgeo {

/// Malformed input: bad parameters, size mismatches, unreadable or corrupt files.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw InputError(message);
}

}  // namespace detail
}  // namespace hgeo
