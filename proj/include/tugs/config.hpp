#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "tugs/dataset.hpp"
#include "tugs/trainer.hpp"

namespace tugs {

/// Flat `key = value` file; '#' starts a comment, blank lines are ignored.
std::map<std::string, std::string> parse_kv_file(
    const std::filesystem::path& path);

/// Training configuration from a kv file. Unknown keys are an error.
TrainConfig parse_train_config(const std::map<std::string, std::string>& kv);

/// Synthetic scene spec from a kv file. Unknown keys are an error.
SyntheticSceneSpec parse_synthetic_spec(
    const std::map<std::string, std::string>& kv);

}  // namespace tugs
