#pragma once

// JSON (de)serialisation of run configurations. Readers reject unknown keys
// and accept partial objects, filling the rest from the passed-in defaults.

#include "mdmt/dataset.hpp"
#include "mdmt/harness.hpp"
#include "mdmt/trainer.hpp"

#include <json.hpp>

namespace mdmt {

nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const SweepConfig& c);
nlohmann::json to_json(const SyntheticSpec& s);

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});
SweepConfig sweep_config_from_json(const nlohmann::json& j, SweepConfig defaults = {});
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j, SyntheticSpec defaults = {});

/// Throws Error naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const std::string& where);

} // namespace mdmt
