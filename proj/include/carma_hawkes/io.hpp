#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "carma_hawkes/model.hpp"

namespace carma_hawkes::io {

/// Model files are JSON objects {"mu": float, "a": [...], "b": [...]}.
ModelSpec read_model(const std::string& path);
ModelSpec parse_model(const std::string& json_text);
std::string model_to_json(const ModelSpec& spec);
void write_model(const ModelSpec& spec, const std::string& path);

/// Event files are CSV with a single `time` column, one event per row,
/// written with round-trip (%.17g) precision.
std::vector<double> read_events(const std::string& path);
void write_events(const std::vector<double>& events, const std::string& path);

std::string format_double(double value);  // shortest round-trip decimal

struct RunManifest {
    std::string command;
    ModelSpec model;
    std::map<std::string, std::string> flags;
    std::uint64_t seed{0};
    std::string tool_version;
    std::string timestamp;  // ISO-8601 UTC
};

std::string manifest_to_json(const RunManifest& manifest);

/// Writes the manifest next to an output file as <output>.manifest.json.
void write_manifest(const RunManifest& manifest, const std::string& output_path);

std::string current_timestamp_utc();

}  // namespace carma_hawkes::io
