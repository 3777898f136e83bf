#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rtpc::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "rtpc_test");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
std::vector<unsigned char> read_bytes(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

/// Runs the rtpc binary named by RTPC_BIN with `args`; returns the exit
/// status and captures stdout and stderr.
struct CommandResult {
  int status = -1;
  std::string out;
  std::string err;
};
CommandResult run_rtpc(const std::vector<std::string>& args);

}  // namespace rtpc::testing
