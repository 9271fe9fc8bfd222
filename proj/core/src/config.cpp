#include "shapmarket/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "shapmarket/hashing.hpp"

namespace shapmarket {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError(path + ": " + message);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) fail(path + "/" + it.key(), "unknown key");
    }
}

const json& require(const json& obj, const std::string& path, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + "/" + key, "required field is missing");
    return *it;
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

const json& as_object(const json& v, const std::string& path) {
    if (!v.is_object()) fail(path, "expected an object");
    return v;
}

const json& as_array(const json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "expected an array");
    return v;
}

double as_double(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& path) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        fail(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) fail(path, "expected a boolean");
    return v.get<bool>();
}

std::vector<int> as_int_array(const json& v, const std::string& path) {
    const json& arr = as_array(v, path);
    std::vector<int> out;
    out.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
        out.push_back(as_int(arr[i], path + "/" + std::to_string(i)));
    return out;
}

std::filesystem::path resolve(const std::string& raw, const std::filesystem::path& base_dir) {
    std::filesystem::path p(raw);
    if (p.is_relative()) p = base_dir / p;
    return p;
}

void parse_market(const json& v, const std::string& path, MarketConfig& market) {
    const json& obj = as_object(v, path);
    check_keys(obj, path, {"unit_price", "tau", "lambda", "epsilon", "exact_cap"});
    if (const json* f = find(obj, "unit_price")) market.unit_price = as_double(*f, path + "/unit_price");
    if (const json* f = find(obj, "tau")) market.tau = as_double(*f, path + "/tau");
    if (const json* f = find(obj, "lambda")) market.lambda = as_double(*f, path + "/lambda");
    if (const json* f = find(obj, "epsilon")) market.epsilon = as_double(*f, path + "/epsilon");
    if (const json* f = find(obj, "exact_cap")) market.exact_cap = as_int(*f, path + "/exact_cap");
    try {
        validate(market);
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
}

void parse_model(const json& v, const std::string& path, ModelSpec& spec) {
    const json& obj = as_object(v, path);
    check_keys(obj, path,
               {"kind", "learning_rate", "epochs", "l2", "seed", "num_classes"});
    const std::string kind = as_string(require(obj, path, "kind"), path + "/kind");
    if (kind == "logistic") {
        spec.kind = ModelKind::LogisticRegression;
    } else if (kind == "nearest") {
        spec.kind = ModelKind::OneNearestNeighbor;
    } else {
        fail(path + "/kind", "expected \"logistic\" or \"nearest\", got \"" + kind + "\"");
    }
    if (const json* f = find(obj, "learning_rate")) {
        spec.learning_rate = as_double(*f, path + "/learning_rate");
        if (!(spec.learning_rate > 0)) fail(path + "/learning_rate", "must be > 0");
    }
    if (const json* f = find(obj, "epochs")) {
        spec.epochs = as_int(*f, path + "/epochs");
        if (spec.epochs < 1) fail(path + "/epochs", "must be >= 1");
    }
    if (const json* f = find(obj, "l2")) {
        spec.l2 = as_double(*f, path + "/l2");
        if (spec.l2 < 0) fail(path + "/l2", "must be >= 0");
    }
    if (const json* f = find(obj, "seed")) spec.seed = as_u64(*f, path + "/seed");
    if (const json* f = find(obj, "num_classes")) {
        spec.num_classes = as_int(*f, path + "/num_classes");
        if (spec.num_classes < 2) fail(path + "/num_classes", "must be >= 2");
    }
}

void parse_gain(const json& v, const std::string& path, GainConfig& gain) {
    const json& obj = as_object(v, path);
    check_keys(obj, path, {"kind", "universe_size", "exponent", "model", "dedup"});
    const std::string kind = as_string(require(obj, path, "kind"), path + "/kind");
    if (kind == "coverage") {
        gain.kind = GainKind::SyntheticCoverage;
        const json& universe = require(obj, path, "universe_size");
        const int n = as_int(universe, path + "/universe_size");
        if (n < 1) fail(path + "/universe_size", "must be >= 1");
        gain.universe_size = std::size_t(n);
        if (const json* f = find(obj, "exponent")) {
            gain.exponent = as_double(*f, path + "/exponent");
            if (!(gain.exponent > 0)) fail(path + "/exponent", "must be > 0");
        }
        if (find(obj, "model")) fail(path + "/model", "not valid for a coverage gain");
        if (find(obj, "dedup")) fail(path + "/dedup", "not valid for a coverage gain");
    } else if (kind == "model") {
        gain.kind = GainKind::ModelAccuracy;
        parse_model(require(obj, path, "model"), path + "/model", gain.model);
        if (const json* f = find(obj, "dedup")) gain.dedup = as_bool(*f, path + "/dedup");
        if (find(obj, "universe_size"))
            fail(path + "/universe_size", "not valid for a model gain");
        if (find(obj, "exponent")) fail(path + "/exponent", "not valid for a model gain");
    } else {
        fail(path + "/kind", "expected \"coverage\" or \"model\", got \"" + kind + "\"");
    }
}

ClusterSpec parse_cluster(const json& v, const std::string& path) {
    const json& obj = as_object(v, path);
    check_keys(obj, path, {"center", "stddev", "label", "count"});
    ClusterSpec cluster;
    const json& center = as_array(require(obj, path, "center"), path + "/center");
    if (center.empty()) fail(path + "/center", "must not be empty");
    for (std::size_t i = 0; i < center.size(); ++i)
        cluster.center.push_back(as_double(center[i], path + "/center/" + std::to_string(i)));
    if (const json* f = find(obj, "stddev")) {
        cluster.stddev = as_double(*f, path + "/stddev");
        if (cluster.stddev < 0) fail(path + "/stddev", "must be >= 0");
    }
    if (const json* f = find(obj, "label")) cluster.label = as_int(*f, path + "/label");
    cluster.count = as_int(require(obj, path, "count"), path + "/count");
    if (cluster.count < 1) fail(path + "/count", "must be >= 1");
    return cluster;
}

SourceConfig parse_source(const json& v, const std::string& path,
                          const std::filesystem::path& base_dir) {
    const json& obj = as_object(v, path);
    SourceConfig source;
    const std::string kind = as_string(require(obj, path, "kind"), path + "/kind");
    if (kind == "items") {
        check_keys(obj, path, {"kind", "items"});
        source.kind = SourceConfig::Kind::Items;
        source.items = as_int_array(require(obj, path, "items"), path + "/items");
        if (source.items.empty()) fail(path + "/items", "must not be empty");
    } else if (kind == "synth") {
        check_keys(obj, path, {"kind", "clusters", "seed"});
        source.kind = SourceConfig::Kind::Synth;
        const json& clusters = as_array(require(obj, path, "clusters"), path + "/clusters");
        if (clusters.empty()) fail(path + "/clusters", "must not be empty");
        for (std::size_t i = 0; i < clusters.size(); ++i)
            source.clusters.push_back(
                parse_cluster(clusters[i], path + "/clusters/" + std::to_string(i)));
        if (const json* f = find(obj, "seed")) source.seed = as_u64(*f, path + "/seed");
    } else if (kind == "csv") {
        check_keys(obj, path, {"kind", "path", "label_column"});
        source.kind = SourceConfig::Kind::Csv;
        source.path = resolve(as_string(require(obj, path, "path"), path + "/path"), base_dir);
        if (const json* f = find(obj, "label_column"))
            source.label_column = as_string(*f, path + "/label_column");
    } else if (kind == "idx") {
        check_keys(obj, path, {"kind", "images", "labels"});
        source.kind = SourceConfig::Kind::Idx;
        source.images =
            resolve(as_string(require(obj, path, "images"), path + "/images"), base_dir);
        source.labels =
            resolve(as_string(require(obj, path, "labels"), path + "/labels"), base_dir);
    } else {
        fail(path + "/kind",
             "expected \"items\", \"synth\", \"csv\" or \"idx\", got \"" + kind + "\"");
    }
    return source;
}

PartyConfig parse_party(const json& v, const std::string& path,
                        const std::filesystem::path& base_dir) {
    const json& obj = as_object(v, path);
    check_keys(obj, path, {"id", "training", "validation", "label_filter"});
    PartyConfig party;
    party.id = as_int(require(obj, path, "id"), path + "/id");
    party.training = parse_source(require(obj, path, "training"), path + "/training", base_dir);
    if (const json* f = find(obj, "validation"))
        party.validation = parse_source(*f, path + "/validation", base_dir);
    if (const json* f = find(obj, "label_filter")) {
        party.label_filter = as_int_array(*f, path + "/label_filter");
        if (party.label_filter->empty()) fail(path + "/label_filter", "must not be empty");
    }
    return party;
}

}  // namespace

RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("top level: expected an object");
    check_keys(root, "", {"market", "gain", "parties"});

    RunConfig config;
    if (const json* f = find(root, "market")) parse_market(*f, "/market", config.market);
    parse_gain(require(root, "", "gain"), "/gain", config.gain);

    const json& parties = as_array(require(root, "", "parties"), "/parties");
    if (parties.empty()) fail("/parties", "must not be empty");
    for (std::size_t i = 0; i < parties.size(); ++i) {
        config.parties.push_back(
            parse_party(parties[i], "/parties/" + std::to_string(i), base_dir));
    }
    for (std::size_t i = 0; i < config.parties.size(); ++i) {
        for (std::size_t j = i + 1; j < config.parties.size(); ++j) {
            if (config.parties[i].id == config.parties[j].id) {
                fail("/parties/" + std::to_string(j) + "/id",
                     "duplicate id " + std::to_string(config.parties[j].id));
            }
        }
    }

    config.hash = fnv1a(root.dump());  // nlohmann sorts keys, so the dump is canonical
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path.parent_path());
}

GainFunction build_gain(const GainConfig& gain) {
    if (gain.kind == GainKind::SyntheticCoverage)
        return GainFunction::synthetic_coverage(gain.universe_size, gain.exponent);
    return GainFunction::model_accuracy(gain.model, gain.dedup);
}

namespace {

LabeledDataset materialize(const SourceConfig& source, std::uint64_t derived_seed) {
    switch (source.kind) {
        case SourceConfig::Kind::Items:
            return items_dataset(source.items);
        case SourceConfig::Kind::Synth:
            return synth_clusters(source.clusters, source.seed.value_or(derived_seed));
        case SourceConfig::Kind::Csv:
            return load_csv(source.path, source.label_column);
        case SourceConfig::Kind::Idx:
            return load_idx(source.images, source.labels);
    }
    throw std::logic_error("unreachable source kind");
}

}  // namespace

std::vector<Party> build_roster(const RunConfig& config, std::uint64_t seed) {
    std::vector<Party> roster;
    roster.reserve(config.parties.size());
    for (std::size_t i = 0; i < config.parties.size(); ++i) {
        const PartyConfig& pc = config.parties[i];
        Party party;
        party.id = pc.id;
        party.training = materialize(pc.training, mix_seed(seed, 2 * std::uint64_t(i)));
        if (pc.label_filter) party.training = party.training.filter_labels(*pc.label_filter);
        if (pc.training.kind != SourceConfig::Kind::Items && party.training.empty()) {
            throw ConfigError("/parties/" + std::to_string(i) +
                              "/training: materialized dataset is empty" +
                              (pc.label_filter ? " after the label filter" : ""));
        }
        if (pc.validation) {
            party.validation = materialize(*pc.validation, mix_seed(seed, 2 * std::uint64_t(i) + 1));
        }
        roster.push_back(std::move(party));
    }
    // Shared-task convention: parties without their own validation inherit the
    // first explicit one in roster order.
    const LabeledDataset* shared = nullptr;
    for (std::size_t i = 0; i < config.parties.size(); ++i) {
        if (config.parties[i].validation) {
            shared = &roster[i].validation;
            break;
        }
    }
    if (shared != nullptr) {
        for (std::size_t i = 0; i < config.parties.size(); ++i) {
            if (!config.parties[i].validation) roster[i].validation = *shared;
        }
    }
    return roster;
}

}  // namespace shapmarket
