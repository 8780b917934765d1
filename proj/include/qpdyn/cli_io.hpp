#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qpdyn/trace_fit.hpp"

namespace qpdyn {

using Json = nlohmann::ordered_json;

// Trace CSV: header `t,gamma[,sigma]`, t in s and gamma, sigma in 1/s unless a
// `# units: t=<time unit>, gamma=<rate unit>` line precedes the header.
// `# label: <text>` sets the trace label; other `#` lines are ignored.
DecayTrace parse_trace(std::string_view text);
DecayTrace read_trace(const std::filesystem::path& path);
std::string format_trace(const DecayTrace& trace);
void write_trace(const std::filesystem::path& path, const DecayTrace& trace);

// Steady-state points CSV: header `tau_ss,inv_t1[,sigma]`, SI units.
std::vector<SteadyStatePoint> parse_t1_points(std::string_view text);
std::vector<SteadyStatePoint> read_t1_points(const std::filesystem::path& path);
std::string format_t1_points(const std::vector<SteadyStatePoint>& points);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

std::string sha256_hex(std::string_view data);

// %.17g
std::string format_double(double v);

struct InputFile {
    std::string path;
    std::string sha256;
};

struct RunManifest {
    std::string command;
    Json parameters = Json::object();  // resolved, SI
    std::vector<InputFile> inputs;
    std::optional<std::uint64_t> seed;
    std::string library_version;
    std::optional<std::string> timestamp;  // UTC, ISO 8601

    Json to_json() const;
};

enum class OutputFormat { json, csv };

// A result as a JSON document and, where it has one, a plot-ready table.
struct CommandResult {
    Json json = Json::object();
    std::vector<std::string> csv_comments;  // written as `# <text>` after the manifest line
    std::vector<std::string> csv_header;
    std::vector<std::vector<std::string>> csv_rows;
};

// JSON: {"manifest": ..., "result": ...}. CSV: manifest as one `# manifest: `
// comment line followed by the table.
std::string render(const RunManifest& manifest, const CommandResult& result, OutputFormat format);

// Parses argv (without the program name) and runs one subcommand. Results go
// to `out` or the -o file; diagnostics go to `err`. Returns the exit code.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qpdyn
