#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shapmarket/gain.hpp"
#include "shapmarket/market.hpp"

namespace shapmarket {

// Thrown for any malformed configuration; the message carries a JSON-pointer
// style path to the offending field plus what was expected.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Where a party's data comes from. Exactly one kind per source:
//   items: desk-scale integer items (coverage markets)
//   synth: Gaussian clusters, optionally with a pinned seed
//   csv:   header + label column
//   idx:   image/label file pair
struct SourceConfig {
    enum class Kind { Items, Synth, Csv, Idx };
    Kind kind = Kind::Items;
    std::vector<int> items;
    std::vector<ClusterSpec> clusters;
    std::optional<std::uint64_t> seed;
    std::filesystem::path path;
    std::string label_column = "label";
    std::filesystem::path images;
    std::filesystem::path labels;
};

struct PartyConfig {
    int id = 0;
    SourceConfig training;
    std::optional<SourceConfig> validation;  // absent => inherit task validation
    std::optional<std::vector<int>> label_filter;
};

struct GainConfig {
    GainKind kind = GainKind::SyntheticCoverage;
    std::size_t universe_size = 1;
    double exponent = 1.0;
    ModelSpec model;
    bool dedup = true;
};

struct RunConfig {
    MarketConfig market;
    GainConfig gain;
    std::vector<PartyConfig> parties;
    std::uint64_t hash = 0;  // canonical content hash of the parsed JSON
};

// Parse from a file (relative data paths resolve against the file's
// directory) or from text with an explicit base directory.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config_text(std::string_view text,
                            const std::filesystem::path& base_dir = ".");

GainFunction build_gain(const GainConfig& gain);

// Materialize the roster. Synthetic sources without a pinned seed derive one
// from `seed`, the party index, and the source role, so the whole roster is
// reproducible from a single number. Parties without a validation source
// inherit the first explicit validation in roster order (the shared-task
// convention); if none exists, validations stay empty.
std::vector<Party> build_roster(const RunConfig& config, std::uint64_t seed);

}  // namespace shapmarket
