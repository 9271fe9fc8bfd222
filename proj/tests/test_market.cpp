#include <doctest.h>

#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapmarket/market.hpp"
#include "shapmarket/model.hpp"
#include "test_util.hpp"

using namespace shapmarket;
using namespace testutil;

TEST_CASE("the two-party coverage market clears to the hand-derived ledger") {
    ScenarioA sc;
    ClearOptions opts;
    opts.audit_table = true;
    const MarketOutcome out = clear_single(sc.parties, sc.validation, sc.gain, sc.config, opts);

    REQUIRE(out.parties.size() == 2);
    CHECK(out.exact_shapley);
    CHECK(close(out.grand_value, scenario_a::kVP));
    CHECK(close(out.pool, scenario_a::kPool));

    const PartyOutcome& p1 = out.parties[0];
    const PartyOutcome& p2 = out.parties[1];
    CHECK(p1.party_id == 1);
    CHECK(p2.party_id == 2);
    CHECK(close(p1.standalone_gain, scenario_a::kG1));
    CHECK(close(p2.standalone_gain, scenario_a::kG2));
    CHECK(close(p1.fee, scenario_a::kFee1));
    CHECK(close(p2.fee, scenario_a::kFee2));
    CHECK(close(p1.price, scenario_a::kPrice1));
    CHECK(close(p2.price, scenario_a::kPrice2));
    CHECK(close(p1.shapley_value, scenario_a::kPhi1));
    CHECK(close(p2.shapley_value, scenario_a::kPhi2));
    CHECK(close(p1.shapley_share, scenario_a::kShare1));
    CHECK(close(p2.shapley_share, scenario_a::kShare2));
    CHECK(close(p1.net, scenario_a::kNet1));
    CHECK(close(p2.net, scenario_a::kNet2));
    // refund identity: t_i = (alpha_i - c a'_i) + b_i
    CHECK(close(p1.refund, p1.fee - p1.price + p1.payout));
    CHECK(close(p2.refund, p2.fee - p2.price + p2.payout));

    // audit table holds every coalition of the characteristic function
    REQUIRE(out.char_table.size() == 4);
    CHECK(out.char_table[0].second == 0.0);
    CHECK(close(out.char_table[1].second, scenario_a::kV1));
    CHECK(close(out.char_table[2].second, scenario_a::kV2));
    CHECK(close(out.char_table[3].second, scenario_a::kVP));
}

TEST_CASE("char_single agrees with a direct transcription of the formula") {
    std::mt19937_64 rng(201);
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 2 + int(rng() % 4);
        const int universe = 2 * m + 2;
        std::vector<Party> parties;
        std::vector<int> all(static_cast<std::size_t>(universe));
        std::iota(all.begin(), all.end(), 0);
        for (int i = 0; i < m; ++i) {
            Party p;
            p.id = i + 1;
            std::vector<int> owned;
            for (int item : all)
                if (rng() % 3 == 0) owned.push_back(item);
            if (owned.empty()) owned.push_back(int(rng() % std::uint64_t(universe)));
            p.training = items_dataset(owned);
            parties.push_back(std::move(p));
        }
        const LabeledDataset validation = items_dataset(all);
        const GainFunction gain = GainFunction::synthetic_coverage(universe, 1.5);
        const CharacteristicFunction v = char_single(gain, validation, parties);
        for (Coalition s = 0; s <= v.full_coalition(); ++s)
            CHECK(close(v.value(s), char_single_oracle(gain, validation, parties, s)));
    }
}

TEST_CASE("randomized ledgers balance and ignore roster order") {
    std::mt19937_64 rng(202);
    for (int trial = 0; trial < 40; ++trial) {
        const int m = 2 + int(rng() % 5);
        const int universe = m + 2 + int(rng() % 6);
        std::vector<Party> parties;
        std::vector<int> all(static_cast<std::size_t>(universe));
        std::iota(all.begin(), all.end(), 0);
        for (int i = 0; i < m; ++i) {
            Party p;
            p.id = i + 1;
            std::vector<int> owned{i % universe};
            for (int item : all)
                if (rng() % 4 == 0) owned.push_back(item);
            p.training = items_dataset(owned);
            parties.push_back(std::move(p));
        }
        const LabeledDataset validation = items_dataset(all);
        const GainFunction gain = GainFunction::synthetic_coverage(universe, 2.0);
        MarketConfig cfg;
        cfg.unit_price = 0.5 + double(rng() % 4) * 0.5;

        const MarketOutcome out = clear_single(parties, validation, gain, cfg);

        double net_sum = 0.0, pool = 0.0, shares = 0.0;
        for (const PartyOutcome& p : out.parties) {
            net_sum += p.net;
            pool += p.price;
            shares += p.shapley_share;
            CHECK(p.price >= 0.0);
            CHECK(p.payout >= 0.0);
            // refund decomposition always holds
            CHECK(close(p.refund, p.fee - cfg.unit_price * p.price + p.payout));
            // zero-element buyers get the full fee back plus their payout
            if (p.price == 0.0) {
                CHECK(close(p.refund, p.fee + p.payout));
                CHECK(p.refund >= p.fee - 1e-12);
            }
        }
        CHECK(std::fabs(net_sum) <= 1e-9 * std::max(1.0, pool));  // budget balance
        CHECK(close(pool, out.pool));
        CHECK(close(shares, 1.0));

        // symmetry: clearing a reversed roster permutes, never changes, outcomes
        std::vector<Party> reversed(parties.rbegin(), parties.rend());
        const MarketOutcome rev = clear_single(reversed, validation, gain, cfg);
        for (const PartyOutcome& p : out.parties) {
            bool found = false;
            for (const PartyOutcome& q : rev.parties) {
                if (q.party_id != p.party_id) continue;
                found = true;
                CHECK(close(q.net, p.net, 1e-9));
                CHECK(close(q.shapley_value, p.shapley_value, 1e-9));
                CHECK(close(q.fee, p.fee));
            }
            CHECK(found);
        }
    }
}

TEST_CASE("duplicate-data parties are paid identically") {
    std::mt19937_64 rng(203);
    for (int trial = 0; trial < 10; ++trial) {
        const int universe = 6;
        std::vector<int> owned{int(rng() % 6), int(rng() % 6)};
        Party a;
        a.id = 1;
        a.training = items_dataset(owned);
        Party b = a;
        b.id = 2;
        Party c;
        c.id = 3;
        c.training = items_dataset(std::array{0, 3, 5});
        std::vector<int> all{0, 1, 2, 3, 4, 5};
        const LabeledDataset validation = items_dataset(all);
        const GainFunction gain = GainFunction::synthetic_coverage(universe, 2.0);
        const MarketOutcome out =
            clear_single({a, b, c}, validation, gain, MarketConfig{});
        CHECK(close(out.parties[0].shapley_value, out.parties[1].shapley_value));
        CHECK(close(out.parties[0].net, out.parties[1].net));
        CHECK(close(out.parties[0].fee, out.parties[1].fee));
    }
}

TEST_CASE("prices clamp at zero when a party's data hurts the final model") {
    // Party 2's points sit on party 1's clusters with flipped labels. Under
    // 1-NN a minority of flipped neighbors strictly degrades the pooled
    // model below party 1's perfect standalone, so party 1's raw price is
    // negative and must clamp; the majority stays right, so the market as a
    // whole still clears.
    auto blob = [](double cx, double cy, int label, int n, std::uint64_t seed) {
        const ClusterSpec spec{{cx, cy}, 0.1, label, n};
        return synth_clusters(std::array{spec}, seed);
    };
    Party good;
    good.id = 1;
    good.training = concat(blob(-2.0, 0.0, 0, 40, 11), blob(2.0, 0.0, 1, 40, 12));
    Party bad;
    bad.id = 2;
    bad.training = concat(blob(-2.0, 0.0, 1, 15, 13), blob(2.0, 0.0, 0, 15, 14));  // flipped
    const LabeledDataset validation =
        concat(blob(-2.0, 0.0, 0, 50, 15), blob(2.0, 0.0, 1, 50, 16));

    ModelSpec spec;
    spec.kind = ModelKind::OneNearestNeighbor;
    spec.num_classes = 2;
    const GainFunction gain = GainFunction::model_accuracy(spec);

    const MarketOutcome out = clear_single({good, bad}, validation, gain, MarketConfig{});
    CHECK(out.parties[0].standalone_gain >= 0.99);
    CHECK(out.grand_value > 0.0);
    CHECK(out.parties[1].price > 0.0);   // the poisoner still gains from the pool
    CHECK(out.parties[0].price == 0.0);  // clamped: the polluted pool cannot beat it
    CHECK_FALSE(out.warnings.empty());   // the clamp is reported
    CHECK(out.parties[0].refund >= out.parties[0].fee - 1e-12);
    double net_sum = out.parties[0].net + out.parties[1].net;
    CHECK(std::fabs(net_sum) <= 1e-9);
}

TEST_CASE("clearing refuses degenerate markets") {
    // No party holds a relevant item, so every gain and hence v(P) is zero.
    Party p1;
    p1.id = 1;
    p1.training = items_dataset(std::array{7, 8});
    Party p2;
    p2.id = 2;
    p2.training = items_dataset(std::array{9});
    const LabeledDataset validation = items_dataset(std::array{0, 1});
    const GainFunction gain = GainFunction::synthetic_coverage(10, 1.0);
    CHECK_THROWS_AS(
        (void)clear_single({p1, p2}, validation, gain, MarketConfig{}),
        std::domain_error);
    CHECK_THROWS_AS((void)clear_single({}, validation, gain, MarketConfig{}),
                    std::invalid_argument);
}

TEST_CASE("config validation names the offending field") {
    MarketConfig cfg;
    cfg.unit_price = 0.0;
    CHECK_THROWS_WITH_AS((void)validate(cfg), doctest::Contains("unit_price"),
                         std::invalid_argument);
    cfg = MarketConfig{};
    cfg.epsilon = -0.5;
    CHECK_THROWS_WITH_AS((void)validate(cfg), doctest::Contains("epsilon"),
                         std::invalid_argument);
    cfg = MarketConfig{};
    cfg.exact_cap = 0;
    CHECK_THROWS_WITH_AS((void)validate(cfg), doctest::Contains("exact_cap"),
                         std::invalid_argument);
    cfg = MarketConfig{};
    cfg.lambda = -1.0;
    CHECK_THROWS_WITH_AS((void)validate(cfg), doctest::Contains("lambda"),
                         std::invalid_argument);
}

TEST_CASE("sampled clearing approximates the exact ledger and warns") {
    ScenarioA sc;
    MarketConfig cfg = sc.config;
    cfg.exact_cap = 1;  // force the sampling path for this 2-party market
    ClearOptions opts;
    opts.sample_permutations = 2;  // 2 parties -> 2! permutations, exact again
    opts.sample_seed = 17;
    const MarketOutcome out = clear_single(sc.parties, sc.validation, sc.gain, cfg, opts);
    CHECK_FALSE(out.exact_shapley);
    CHECK_FALSE(out.warnings.empty());
    CHECK(close(out.parties[0].shapley_value, scenario_a::kPhi1));
    CHECK(close(out.parties[1].shapley_value, scenario_a::kPhi2));
    double net_sum = out.parties[0].net + out.parties[1].net;
    CHECK(std::fabs(net_sum) <= 1e-9);
}

TEST_CASE("participation screening flags parties no one benefits from") {
    // Item 0 is in every other party's endowment, so party 3 (holding only
    // item 0) improves no one; joining the market still improves party 3.
    Party p1;
    p1.id = 1;
    p1.training = items_dataset(std::array{0, 1});
    Party p2;
    p2.id = 2;
    p2.training = items_dataset(std::array{0, 2});
    Party p3;
    p3.id = 3;
    p3.training = items_dataset(std::array{0});
    const LabeledDataset validation = items_dataset(std::array{0, 1, 2});
    const GainFunction gain = GainFunction::synthetic_coverage(3, 1.0);

    const std::vector<ParticipationEntry> entries =
        participation_check({p1, p2, p3}, gain, validation);
    REQUIRE(entries.size() == 3);
    CHECK(entries[0].party_id == 1);
    CHECK(entries[0].helps_others);
    CHECK(entries[0].market_helps);
    CHECK(entries[0].eligible);
    CHECK(entries[1].eligible);
    // p3 adds nothing to anyone (item 0 is already universal), but joining helps p3
    CHECK_FALSE(entries[2].helps_others);
    CHECK(entries[2].market_helps);
    CHECK_FALSE(entries[2].eligible);
    CHECK_FALSE(entries[2].reason.empty());
}

TEST_CASE("reports serialize to parseable JSON and CSV") {
    ScenarioA sc;
    ClearOptions opts;
    opts.audit_table = true;
    const MarketOutcome out = clear_single(sc.parties, sc.validation, sc.gain, sc.config, opts);
    Provenance prov;
    prov.config_hash = 0xabcdef;
    prov.seed = 42;

    const nlohmann::json doc = nlohmann::json::parse(to_json_string(out, prov));
    CHECK(doc.at("provenance").at("seed").get<std::uint64_t>() == 42);
    CHECK(doc.at("parties").size() == 2);
    CHECK(close(doc.at("parties")[0].at("net").get<double>(), scenario_a::kNet1));
    CHECK(close(doc.at("grand_value").get<double>(), scenario_a::kVP));
    CHECK(doc.at("char_table").size() == 4);

    const std::string csv = outcome_to_csv(out);
    // header + one row per party
    int lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 3);
    CHECK(csv.find("party_id") != std::string::npos);
    CHECK(csv.find("shapley_share") != std::string::npos);

    const nlohmann::json pj = nlohmann::json::parse(
        to_json_string(participation_check(sc.parties, sc.gain, sc.validation)));
    CHECK(pj.size() == 2);
    CHECK(pj[0].at("eligible").get<bool>());
}
