#pragma once

#include <iosfwd>

namespace groundwork::cli {

/// Exit status: 0 success, 1 Error findings or failed input, 2 usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace groundwork::cli
