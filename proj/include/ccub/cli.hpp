// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccub/io.hpp"

namespace ccub::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

/// Environment variable naming an optional JSON run configuration.
inline constexpr const char* kConfigEnv = "CCUB_CONFIG";

/// Artifact locations and seeds shared by every command. Command-line flags
/// take precedence over values loaded from the config file.
struct RunConfig {
    std::optional<std::filesystem::path> manifest;
    std::filesystem::path captions_dir = "captions";
    std::filesystem::path corpus_dir = "corpora";
    std::filesystem::path checkpoint_dir = "checkpoints";
    std::filesystem::path output_dir = "out";
    std::filesystem::path data_dir = "survey-data";
    std::uint64_t seed = 0;
    /// Seed of the shared base model that fine-tuning starts from.
    std::uint64_t base_model_seed = 0;
    /// country -> fine-tuned checkpoint
    std::map<std::string, std::filesystem::path> checkpoints;
    /// country -> fine-tune corpus backing the augmentor
    std::map<std::string, std::filesystem::path> augmentors;
};

/// Relative paths resolve against `base_dir`. Unknown keys are rejected.
RunConfig run_config_from_json(const json& doc, const std::filesystem::path& base_dir = {});
json run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

/// Runs one command. `args` excludes the program name. Errors are written to
/// `err` as a single JSON line {"error": kind, "message": ..., ...}.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace ccub::cli
