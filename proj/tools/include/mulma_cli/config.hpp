#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mulma/simkit.hpp"

/// Run configuration: one JSON document. Every accepted key appears in the
/// shipped defaults; user documents and `--set a.b=value` overrides are
/// overlaid on top of them and unknown keys are rejected.
namespace mulma::cli {

using nlohmann::json;

json default_config();
/// Shipped documents: "fig4", "fig5", "fig7", "fig8", "fig9", "set1".."set4".
std::optional<json> embedded_config(std::string_view name);

/// Overlays `user` onto `base`. Throws ConfigError for keys `base` lacks or for
/// values whose JSON type differs from the default (null defaults accept numbers).
void merge_config(json& base, const json& user, const std::string& where = "");
/// "a.b=value"; value is parsed as JSON and falls back to a plain string.
void apply_override(json& doc, std::string_view assignment);
/// Reads a config document, or the config embedded in a run record sidecar.
json config_from_file(const std::string& path);

/// Converts the whole document once so malformed values fail before any compute.
void validate_config(const json& doc);

ChannelConfig channel_config_from(const json& doc);
TrainParams train_from(const json& doc, const std::optional<std::string>& set = std::nullopt);
Scenario scenario_from(const json& doc, Algorithm algorithm);
StopRule stop_from(const json& doc);
/// `algorithms` when non-empty, else the single `algorithm`.
std::vector<Algorithm> algorithms_from(const json& doc);
std::vector<double> snr_from(const json& doc);
/// output_dir, else $MULMA_OUTPUT_DIR, else "mulma-out".
std::string output_dir_from(const json& doc);

}  // namespace mulma::cli
