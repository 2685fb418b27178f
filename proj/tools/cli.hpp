#pragma once

#include <cstdint>
#include <string>

namespace dbrn::cli {

// Exit codes: 0 ok, 2 usage/parameter, 3 data/format, 4 numeric abort.
int run(int argc, const char* const* argv);

std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace dbrn::cli
