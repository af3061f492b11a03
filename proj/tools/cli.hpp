#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tspace/net.hpp"

namespace tsbench {

/// Exit codes of every subcommand.
enum Exit : int { kOk = 0, kIncorrect = 1, kUsage = 2, kInfrastructure = 3 };

struct Context {
  std::ostream& out;
  std::ostream& err;
  /// Executable spawned for procs and hosts modes.
  std::filesystem::path self_exe;
};

/// Parses and runs one command line (argv[0] excluded).
int run_cli(const std::vector<std::string>& args, const Context& ctx);

/// `name host:port` per line, master first; blank lines and '#' comments
/// are skipped. Throws std::invalid_argument on a malformed line.
std::vector<tspace::NodeAddress> read_host_file(const std::filesystem::path& file);
void write_host_file(const std::filesystem::path& file,
                     const std::vector<tspace::NodeAddress>& nodes);

/// key=value lines; later keys win.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& file);

}  // namespace tsbench
