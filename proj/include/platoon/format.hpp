#pragma once

#include <string>

namespace platoon {

/// Shortest-round-trip decimal text; "nan"/"inf" for non-finite values.
std::string format_number(double x);

}  // namespace platoon
