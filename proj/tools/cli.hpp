#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dyadrobust::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Exit codes: 0 success, 2 module/usage error (JSON on `err`), 1 internal.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dyadrobust::cli
