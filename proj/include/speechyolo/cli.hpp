#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace speechyolo::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;
inline constexpr int kDiverged = 3;

// Runs one command line (args[0] is the program name) and returns the exit
// code. Commands: prepare, synth, pretrain, train, evaluate, decode,
// noise-eval.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace speechyolo::cli
