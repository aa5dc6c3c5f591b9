#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "visprompt/image.hpp"

namespace visprompt::cli {

/// Runs the command line `args` (program name excluded). Output goes to
/// `out`; failures print one JSON object {"error", "message"} to `err` and
/// return a nonzero code (2 for usage errors, 1 otherwise).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args);

/// Operator names accepted by `op`.
std::vector<std::string> operator_names();

/// What `op` does to an image: `params_json` is a JSON object of parameter
/// overrides; randomized operators draw from Rng(seed).
Image apply_named_operator(const std::string& name, const Image& img, const std::string& params_json,
                           std::uint64_t seed);

}  // namespace visprompt::cli
