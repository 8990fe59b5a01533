#pragma once

#include <iosfwd>

namespace kbe::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,    // bad flags, bad config values
  kIo = 3,       // unreadable or unwritable files
  kData = 4,     // malformed data, unknown names, checkpoint mismatch
  kNumeric = 5,  // non-finite values during training
};

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kbe::cli
