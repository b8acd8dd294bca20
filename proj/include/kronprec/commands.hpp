#pragma once

// Subcommand implementations behind the kronprec CLI. Each command takes a
// JSON config, fills defaults (resolve_*), validates every field, runs, and
// writes its outputs. The resolved config is echoed into every output.

#include <iosfwd>
#include <string>

#include <json.hpp>

namespace kronprec::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaMajor = 1;
inline constexpr const char* kSchemaVersion = "1.0";

/// Throws ParseError / IoError.
Json load_config_file(const std::string& path);

/// Applies "a.b.c=value"; value is parsed as JSON when possible, else taken
/// as a string. Throws ConfigError on malformed assignments.
void apply_override(Json& config, const std::string& assignment);

/// Rejects a schema_version with a major other than kSchemaMajor.
void check_schema_version(const Json& document, const std::string& context);

Json resolve_simulate(const Json& config);
Json resolve_fit(const Json& config);
Json resolve_rate_sweep(const Json& config);
Json resolve_check_assumptions(const Json& config);
Json resolve_diagnose(const Json& config);

// Each returns the process exit code: 0 success, 1 numerical failure,
// 2 config/IO error. Messages go to `log`.
int cmd_simulate(const Json& config, std::ostream& log);
int cmd_fit(const Json& config, std::ostream& log);
int cmd_rate_sweep(const Json& config, std::ostream& log);
int cmd_check_assumptions(const Json& config, std::ostream& log);
int cmd_diagnose(const Json& config, std::ostream& log);

/// Serializes with 2-space indentation and a trailing newline.
void write_json_file(const std::string& path, const Json& document);

}  // namespace kronprec::cli
