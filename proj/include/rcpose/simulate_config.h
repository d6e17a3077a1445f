#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "rcpose/serialization.h"
#include "rcpose/simulator.h"

namespace rcpose {

// A validated simulate config. `normalized` is the same document with every
// default filled in; feeding it back reproduces the run.
struct SimulateConfig {
    ExperimentConfig experiment;
    Json normalized;
    std::vector<std::filesystem::path> inputs;  // files the config refers to
};

// Validates against the published schema (schemas/simulate_config.schema.json).
// Errors are FormatError with a field path such as "$.predictor.clamp.pixel_px".
// Relative paths resolve against `base_dir`. `seed` overrides the config seed.
SimulateConfig parse_simulate_config(const Json &doc, const std::filesystem::path &base_dir,
                                     std::optional<std::uint64_t> seed = std::nullopt);

SimulateConfig load_simulate_config(const std::filesystem::path &path,
                                    std::optional<std::uint64_t> seed = std::nullopt);

// Campaign report documents.
Json campaign_to_json(const CampaignReport &report, bool with_trajectories);
// One row per (arm, iteration) with the medians and accuracies.
void write_campaign_csv(std::ostream &out, const CampaignReport &report);

}  // namespace rcpose
