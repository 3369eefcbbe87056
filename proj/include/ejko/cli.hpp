#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ejko::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitSolver = 2,
    kExitIo = 3,
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat `key = value` configuration. Lines starting with `#` and blank lines
/// are ignored; later assignments override earlier ones.
class Config {
public:
    /// Throws ConfigError on a malformed line (the message carries `source:line`).
    static Config parse(std::string_view text, const std::string& source = "<text>");
    /// Throws IoError if the file cannot be read.
    static Config load(const std::filesystem::path& path);

    /// Applies a `key=value` override.
    void set(std::string_view assignment);
    void set(const std::string& key, const std::string& value);

    std::optional<std::string> get(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

/// One invocation of `entropic-jko <command> --config <path> [--set k=v ...] [--out dir]`.
struct Request {
    std::string command;
    std::filesystem::path config_path;
    std::vector<std::string> overrides;
    std::optional<std::filesystem::path> out_dir;
};

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> list{"flow", "pde", "compare", "sinkhorn", "sweep"};
    return list;
}

/// Resolves and validates the configuration, runs the command and writes its
/// outputs. Never throws; failures are reported through the exit code and an
/// `error.txt` in the output directory.
int run(const Request& request);

/// Same, for an already parsed configuration.
int run(const std::string& command, Config config, const std::optional<std::filesystem::path>& out_dir);

/// Formats a double with 17 significant digits.
std::string format_value(double v);

}  // namespace ejko::cli
