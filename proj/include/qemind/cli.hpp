#pragma once

#include <iosfwd>

namespace qemind::cli {

/// Multiplexed command-line entry point. Returns 0 on success, 1 when an
/// operation fails, 2 on usage errors (unknown subcommand or flag, missing input).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qemind::cli
