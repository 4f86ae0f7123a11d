#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mcr::cli {

enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kValidation = 2,
    kNumerical = 3,
    kIo = 4,
};

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// Flat `key = value` file; `#` starts a comment, blank lines are skipped.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace mcr::cli
