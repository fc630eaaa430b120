#include "carma_hawkes/io.hpp"

#include <charconv>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace carma_hawkes::io {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

std::string format_double(double value) {
    char buf[40];
    const int written = std::snprintf(buf, sizeof(buf), "%.17g", value);
    return {buf, static_cast<std::size_t>(written)};
}

ModelSpec parse_model(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& err) {
        throw std::runtime_error(std::string("invalid model JSON: ") + err.what());
    }
    if (!doc.is_object() || !doc.contains("mu") || !doc.contains("a") ||
        !doc.contains("b"))
        throw std::runtime_error("model JSON needs fields mu, a, b");
    ModelSpec spec;
    spec.mu = doc.at("mu").get<double>();
    spec.ar = doc.at("a").get<std::vector<double>>();
    spec.ma = doc.at("b").get<std::vector<double>>();
    spec.validate();
    return spec;
}

ModelSpec read_model(const std::string& path) {
    return parse_model(read_file(path));
}

std::string model_to_json(const ModelSpec& spec) {
    json doc;
    doc["mu"] = spec.mu;
    doc["a"] = spec.ar;
    doc["b"] = spec.ma;
    return doc.dump(2) + "\n";
}

void write_model(const ModelSpec& spec, const std::string& path) {
    write_file(path, model_to_json(spec));
}

std::vector<double> read_events(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "time")
        throw std::runtime_error(path + ": expected header line `time`");
    std::vector<double> events;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double value{};
        const auto* first = line.data();
        const auto* last = line.data() + line.size();
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last)
            throw std::runtime_error(path + ": bad value at line " +
                                     std::to_string(line_no));
        events.push_back(value);
    }
    return events;
}

void write_events(const std::vector<double>& events, const std::string& path) {
    std::ostringstream out;
    out << "time\n";
    for (const double t : events) out << format_double(t) << "\n";
    write_file(path, out.str());
}

std::string current_timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

std::string manifest_to_json(const RunManifest& manifest) {
    json doc;
    doc["command"] = manifest.command;
    doc["model"] = {{"mu", manifest.model.mu},
                    {"a", manifest.model.ar},
                    {"b", manifest.model.ma}};
    doc["flags"] = manifest.flags;
    doc["seed"] = manifest.seed;
    doc["tool_version"] = manifest.tool_version;
    doc["timestamp"] = manifest.timestamp;
    return doc.dump(2) + "\n";
}

void write_manifest(const RunManifest& manifest, const std::string& output_path) {
    write_file(output_path + ".manifest.json", manifest_to_json(manifest));
}

}  // namespace carma_hawkes::io
