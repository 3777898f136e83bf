#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace rtpc::app {

/// Writes to a sibling temp file, then renames over `path`. Creates parent
/// directories. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Throws FileNotFound.
std::string read_text_file(const std::filesystem::path& path);

void ensure_directory(const std::filesystem::path& dir);

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Level from RTPC_LOG (error, warn, info, debug); warn when unset.
LogLevel log_level();
void log(LogLevel level, const std::string& message);

}  // namespace rtpc::app
