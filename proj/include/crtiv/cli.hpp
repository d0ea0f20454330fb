#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

namespace crtiv {

inline constexpr std::string_view kToolVersion = "0.3.0";

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
/// FNV-1a of a file's contents, as 16 lowercase hex digits.
std::string file_digest(const std::filesystem::path& path);

/// Entry point shared by the crtiv binary and the tests. Returns 0 on success,
/// 1 on usage or I/O problems and 2 on statistical degeneracy.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crtiv
