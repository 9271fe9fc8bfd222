#include <doctest.h>

#include <array>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapmarket/custom_train.hpp"
#include "shapmarket/multi_task.hpp"
#include "test_util.hpp"

using namespace shapmarket;
using namespace testutil;

namespace {

LabeledDataset blob(double cx, double cy, int label, int n, std::uint64_t seed) {
    const ClusterSpec spec{{cx, cy}, 0.15, label, n};
    return synth_clusters(std::array{spec}, seed);
}

// Task A separates labels 0/1 along x; task B separates 2/3 along y. The
// feature directions are orthogonal, so degrading B costs A nothing.
struct TwoTasks {
    LabeledDataset a_train, a_val, b_train, b_val;
    ModelSpec spec;

    TwoTasks() {
        a_train = concat(blob(-2, 0, 0, 30, 21), blob(2, 0, 1, 30, 22));
        a_val = concat(blob(-2, 0, 0, 25, 23), blob(2, 0, 1, 25, 24));
        b_train = concat(blob(0, -2, 2, 30, 25), blob(0, 2, 3, 30, 26));
        b_val = concat(blob(0, -2, 2, 25, 27), blob(0, 2, 3, 25, 28));
        spec.kind = ModelKind::LogisticRegression;
        spec.num_classes = 4;
        spec.epochs = 80;
        spec.learning_rate = 0.05;
    }
};

}  // namespace

TEST_CASE("lambda == 0 and plain training produce byte-identical models") {
    const TwoTasks t;
    const TrainedModel plain = train(t.spec, t.a_train);
    const CustomTrainResult zero = train_custom(t.spec, t.a_train, {t.b_val}, 0.0);
    CHECK(zero.model.weights() == plain.weights());  // bitwise
    CHECK(zero.model.bias() == plain.bias());
    CHECK(zero.model.fingerprint() == plain.fingerprint());

    // no adversarial tasks: lambda is irrelevant, same bytes again
    const CustomTrainResult none = train_custom(t.spec, t.a_train, {}, 7.5);
    CHECK(none.model.weights() == plain.weights());
    CHECK(none.model.bias() == plain.bias());
}

TEST_CASE("raising lambda degrades the other task, not the own one") {
    // Train on the pooled market data (as utility_matrix does), so the
    // lambda == 0 model genuinely masters both tasks before customization.
    const TwoTasks t;
    const LabeledDataset pool = concat(t.a_train, t.b_train);
    double prev_other = 1.0;
    double own_mid = 0.0;
    for (double lambda : {0.0, 0.5, 1.0}) {
        const CustomTrainResult r = train_custom(t.spec, pool, {t.b_val}, lambda);
        const double own = accuracy(r.model, t.a_val);
        const double other = accuracy(r.model, t.b_val);
        CHECK(own >= 0.95);  // orthogonal directions: moderate customization is free
        if (lambda == 0.0) CHECK(other >= 0.95);  // the control masters task B too
        CHECK(other <= prev_other + 1e-9);
        prev_other = other;
        own_mid = own;
        REQUIRE(r.other_task_accuracy.size() == 1);
        CHECK(r.other_task_accuracy[0] == other);
    }
    CHECK(prev_other <= 0.5);  // task B is actively broken by lambda == 1

    // an extreme lambda keeps task B broken but starts costing the own task
    const CustomTrainResult strong = train_custom(t.spec, pool, {t.b_val}, 2.0);
    CHECK(accuracy(strong.model, t.b_val) <= 0.5);
    CHECK(accuracy(strong.model, t.a_val) <= own_mid + 1e-9);
}

TEST_CASE("customized training rejects invalid setups") {
    const TwoTasks t;
    ModelSpec nn;
    nn.kind = ModelKind::OneNearestNeighbor;
    nn.num_classes = 4;
    CHECK_THROWS_AS((void)train_custom(nn, t.a_train, {t.b_val}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)train_custom(t.spec, t.a_train, {t.b_val}, -0.25),
                    std::invalid_argument);
}

TEST_CASE("divergence in the adversarial pass names the epoch") {
    const TwoTasks t;
    ModelSpec hot = t.spec;
    hot.learning_rate = 1e18;
    CHECK_THROWS_WITH_AS((void)train_custom(hot, t.a_train, {t.b_val}, 2.0),
                         doctest::Contains("epoch"), std::runtime_error);
}

TEST_CASE("epsilon constraint reports slack with exact arithmetic") {
    const EpsilonReport ok = check_epsilon_constraint(0.95, 0.97, 0.05);
    CHECK(ok.satisfied);
    CHECK(close(ok.slack, 0.03));
    CHECK(ok.achieved == 0.95);
    CHECK(ok.g_star == 0.97);

    const EpsilonReport bad = check_epsilon_constraint(0.80, 0.97, 0.05);
    CHECK_FALSE(bad.satisfied);
    CHECK(close(bad.slack, -0.12));

    // epsilon = 1 makes the constraint vacuous even for a useless model
    CHECK(check_epsilon_constraint(0.0, 1.0, 1.0).satisfied);
    CHECK_THROWS_AS((void)check_epsilon_constraint(0.5, 0.5, -0.01), std::invalid_argument);
}

TEST_CASE("the utility matrix pits every party against every task") {
    const TwoTasks t;
    // split task A's data across two parties; party 3 owns task B
    std::vector<DataRecord> r1, r2;
    for (std::size_t i = 0; i < t.a_train.size(); ++i)
        ((i % 2 == 0) ? r1 : r2).push_back(t.a_train.record(i));
    const LabeledDataset a1(std::move(r1));
    const LabeledDataset a2(std::move(r2));
    Party p1;
    p1.id = 1;
    p1.training = a1;
    p1.validation = t.a_val;
    Party p2;
    p2.id = 2;
    p2.training = a2;
    p2.validation = t.a_val;
    Party p3;
    p3.id = 3;
    p3.training = t.b_train;
    p3.validation = t.b_val;

    const GainFunction gain = GainFunction::model_accuracy(t.spec);
    MarketConfig cfg;
    cfg.tau = 0.0;
    cfg.lambda = 1.0;
    cfg.epsilon = 0.5;  // generous: this test checks structure, not tightness

    const UtilityMatrix m = utility_matrix({p1, p2, p3}, gain, cfg);
    REQUIRE(m.party_ids == std::vector<int>{1, 2, 3});
    REQUIRE(m.task_representative_ids == std::vector<int>{1, 3});
    REQUIRE(m.accuracy.size() == 3);
    for (const std::vector<double>& row : m.accuracy) REQUIRE(row.size() == 2);

    // own-task entries stay near the uncustomized baseline
    CHECK(m.accuracy[0][0] >= m.g_star[0] - cfg.epsilon);
    CHECK(m.accuracy[2][1] >= m.g_star[2] - cfg.epsilon);
    for (const EpsilonReport& e : m.epsilon_reports) CHECK(e.satisfied);
    // cross-task entries are the designed externality: strictly worse
    CHECK(m.accuracy[0][1] <= 0.5);
    CHECK(m.accuracy[2][0] <= 0.5);

    const std::string csv = to_csv(m);
    CHECK(csv.find("party_id,task_1,task_3,g_star,epsilon_slack") == 0);
    const nlohmann::json j = nlohmann::json::parse(to_json_string(m));
    CHECK(j.at("rows").size() == 3);
    CHECK(j.at("rows")[0].at("epsilon").at("satisfied").get<bool>());

    // structural validation
    const GainFunction coverage = GainFunction::synthetic_coverage(4, 1.0);
    CHECK_THROWS_AS((void)utility_matrix({p1, p2, p3}, coverage, cfg), std::invalid_argument);
    Party bare = p1;
    bare.validation = LabeledDataset();
    CHECK_THROWS_AS((void)utility_matrix({bare, p2, p3}, gain, cfg), std::invalid_argument);
}
