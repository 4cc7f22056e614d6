#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mkest::harness {

inline constexpr const char* kVersion = "1.0.0";

using Config = nlohmann::json;

std::uint64_t fnv1a(std::string_view bytes) noexcept;

/// JSON object from a file; ConfigError when it does not parse.
Config load_config(const std::filesystem::path& path);
/// `overrides` patched onto `base`; override keys win.
Config merge(Config base, const Config& overrides);

/// Files written by one command. Unless commit() is called, they are all
/// removed when the guard goes out of scope.
class OutputSet {
public:
    OutputSet(std::filesystem::path dir, std::string command, const Config& config);
    ~OutputSet();
    OutputSet(const OutputSet&) = delete;
    OutputSet& operator=(const OutputSet&) = delete;

    /// Registers `name` in the output directory and returns its full path.
    std::filesystem::path add(const std::string& name);
    /// "mkest <version> seed=<s> config=<hash>", carried by every output file.
    const std::string& manifest_line() const noexcept { return manifest_; }
    std::uint64_t seed() const noexcept { return seed_; }
    /// Writes manifest.json with `extra` merged in, and keeps the files.
    void commit(const Config& extra = Config::object());

private:
    std::filesystem::path dir_;
    std::string command_;
    Config config_;
    std::uint64_t seed_;
    std::string manifest_;
    std::vector<std::filesystem::path> files_;
    bool committed_ = false;
};

/// Each command writes into `out` and returns the content of its manifest.
Config cmd_simulate(const Config& config, const std::filesystem::path& out);
Config cmd_fit(const Config& config, const std::filesystem::path& out);
Config cmd_predict(const Config& config, const std::filesystem::path& out);
Config cmd_benchmark(const Config& config, const std::filesystem::path& out);

/// Checks one data file ("matrix", "panel", "counts" or "posterior" key).
/// Returns problems found; throws when the file cannot be read at all.
std::vector<std::string> cmd_validate(const Config& config);

}  // namespace mkest::harness
