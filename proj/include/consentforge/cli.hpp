#pragma once

#include <iosfwd>

namespace consentforge::cli {

/// Parses argv and runs one subcommand. Returns 0 on success, 1 on a failed
/// run, 2 on a usage error (including an unknown subcommand).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace consentforge::cli
