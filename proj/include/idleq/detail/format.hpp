#pragma once

#include <charconv>
#include <string>

namespace idleq::detail {

// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace idleq::detail
