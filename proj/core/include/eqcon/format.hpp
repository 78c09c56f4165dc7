#pragma once

#include <string>

namespace eqcon {

/// Shortest round-trip decimal form of `x`, always with '.' as the decimal
/// separator. Non-finite values print as "nan", "inf" or "-inf".
std::string format_double(double x);

}  // namespace eqcon
