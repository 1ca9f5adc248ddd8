#pragma once

#include <iosfwd>

namespace psg {

/// Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

} // namespace psg
