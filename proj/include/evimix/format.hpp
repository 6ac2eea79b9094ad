#ifndef EVIMIX_FORMAT_HPP
#define EVIMIX_FORMAT_HPP

#include <cstdio>
#include <string>

namespace evimix {

/// Nine significant digits, the precision of every numeric CSV field.
inline std::string fmt9(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

}  // namespace evimix

#endif  // EVIMIX_FORMAT_HPP
