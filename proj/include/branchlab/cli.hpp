#pragma once

#include <string>
#include <vector>

namespace branchlab::cli {

/// Full command-line entry point; returns the process exit code.
/// 0 = ok/certified, 1 = falsified or failed check, 2 = inconclusive,
/// 64 = usage error, 65 = data format error.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, char** argv);

}  // namespace branchlab::cli
