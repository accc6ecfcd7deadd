#pragma once

#include <string>
#include <vector>

namespace pacc::cli {

// Runs one CLI invocation. Exit codes: 0 success, 1 usage error, 2 data
// error. Usage errors never leave partial output behind.
int dispatch(const std::vector<std::string>& args);

// Worker cap: min(hardware, PACC_THREADS when set); at least 1.
int thread_cap();

}  // namespace pacc::cli
