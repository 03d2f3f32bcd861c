#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtiqa/datasets.hpp"

namespace mtiqa {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

/// Entry point behind the `mtiqa` binary; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::filesystem::path dataset_path(const std::filesystem::path& dir, std::size_t dataset);

/// Loads dataset_0..dataset_{M-1} from a directory, checking headers agree
/// and the label-space hash matches.
std::vector<std::vector<ImageRecord>> load_datasets(const std::filesystem::path& dir);

}  // namespace mtiqa
