#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace thermofuse {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Entry point for the `thermofuse` tool. `args` excludes the program name.
/// Returns 0 on success, 1 on validation errors and 2 on I/O errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// FNV-1a digest (16 hex digits) of a file, or of every regular file below a
/// directory in path order (relative names included).
std::string digest_path(const std::string& path);

const char* version();

}  // namespace thermofuse
