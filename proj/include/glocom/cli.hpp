#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace glocom {

inline constexpr const char* kToolVersion = "0.1.0";

// Process exit codes. Library errors map to their ErrorKind value (2..5);
// a failing pipeline stage exits with kPipelineStageBase + stage index.
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInternal = 10;
inline constexpr int kPipelineStageBase = 20;

/// FNV-1a 64 of a file's bytes, as 16 lowercase hex digits.
std::string file_digest(const std::filesystem::path& path);

int run_cli(int argc, char** argv);

}  // namespace glocom
