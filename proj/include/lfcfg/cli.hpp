#pragma once

#include <exception>
#include <ostream>
#include <string>

namespace lfcfg {

/// `error: kind=<kind> message="<text>"` with quotes and backslashes escaped.
std::string error_line(const std::exception& e);

/// Exit status for a failed run: 2 for configuration errors, 3 for replay
/// manifest problems, 1 for everything else.
int exit_code_for(const std::exception& e);

/// Entry point shared by the lfcfg executable and the tests.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lfcfg
