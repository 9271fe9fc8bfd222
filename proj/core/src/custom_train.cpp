#include "shapmarket/custom_train.hpp"

#include <cstdio>
#include <stdexcept>

#include <json.hpp>

#include "market_internal.hpp"
#include "shapmarket/multi_task.hpp"

namespace shapmarket {

CustomTrainResult train_custom(const ModelSpec& spec, const LabeledDataset& own_train,
                               const std::vector<LabeledDataset>& other_tasks, double lambda) {
    if (spec.kind != ModelKind::LogisticRegression) {
        throw std::invalid_argument(
            "customized training requires a gradient-trained model (logistic regression)");
    }
    if (!(lambda >= 0.0))
        throw std::invalid_argument("customized training requires lambda >= 0");

    // Same canonicalization as plain train(): with lambda == 0 the two paths
    // produce byte-identical weights.
    const LabeledDataset own = distinct(own_train);
    std::vector<LabeledDataset> tasks;
    tasks.reserve(other_tasks.size());
    for (const LabeledDataset& t : other_tasks) tasks.push_back(distinct(t));

    CustomTrainResult result;
    result.model = detail::logreg_gradient_descent(spec, own, tasks, lambda);
    result.own_train_accuracy = accuracy(result.model, own_train);
    result.other_task_accuracy.reserve(other_tasks.size());
    for (const LabeledDataset& t : other_tasks)
        result.other_task_accuracy.push_back(t.empty() ? 0.0 : accuracy(result.model, t));
    return result;
}

EpsilonReport check_epsilon_constraint(double achieved, double g_star, double epsilon) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
    EpsilonReport report;
    report.achieved = achieved;
    report.g_star = g_star;
    report.epsilon = epsilon;
    report.slack = achieved - (g_star - epsilon);
    report.satisfied = report.slack >= -1e-12;
    return report;
}

UtilityMatrix utility_matrix(const std::vector<Party>& parties, const GainFunction& gain,
                             const MarketConfig& config) {
    validate(config);
    detail_market::validate_roster(parties);
    if (gain.kind() != GainKind::ModelAccuracy)
        throw std::invalid_argument("the utility matrix needs a model-backed gain");
    for (const Party& p : parties) {
        if (p.validation.empty()) {
            throw std::invalid_argument("party " + std::to_string(p.id) +
                                        " has no validation data for its task");
        }
    }

    const TaskIndex index = distinct_tasks(parties);
    const RelevanceMap relevance = select_relevance(parties, gain, config.tau, config.exact_cap);
    const ModelSpec& spec = gain.model_spec();

    UtilityMatrix m;
    m.lambda = config.lambda;
    for (int rep : index.distinct)
        m.task_representative_ids.push_back(parties[std::size_t(rep)].id);

    for (std::size_t i = 0; i < parties.size(); ++i) {
        const Party& p = parties[i];
        m.party_ids.push_back(p.id);

        LabeledDataset own_pool;
        for (std::size_t j = 0; j < parties.size(); ++j) {
            if (relevance[i] & (Coalition(1) << j)) own_pool = concat(own_pool, parties[j].training);
        }

        // The adversarial targets are the other distinct tasks, not the
        // other parties: a same-task peer must not be degraded.
        const int own_rep = index.representative[i];
        std::vector<LabeledDataset> others;
        for (int rep : index.distinct) {
            if (rep != own_rep) others.push_back(parties[std::size_t(rep)].validation);
        }

        const CustomTrainResult custom =
            train_custom(spec, own_pool, others, config.lambda);
        const TrainedModel baseline = train(spec, own_pool, gain.dedup());
        const double g_star = accuracy(baseline, p.validation);
        m.g_star.push_back(g_star);

        std::vector<double> row;
        row.reserve(index.distinct.size());
        for (int rep : index.distinct)
            row.push_back(accuracy(custom.model, parties[std::size_t(rep)].validation));
        m.accuracy.push_back(std::move(row));

        m.epsilon_reports.push_back(check_epsilon_constraint(
            accuracy(custom.model, p.validation), g_star, config.epsilon));
    }
    return m;
}

std::string to_csv(const UtilityMatrix& m) {
    std::string csv = "party_id";
    for (int rep : m.task_representative_ids) csv += ",task_" + std::to_string(rep);
    csv += ",g_star,epsilon_slack\n";
    char buf[64];
    for (std::size_t i = 0; i < m.party_ids.size(); ++i) {
        csv += std::to_string(m.party_ids[i]);
        for (double a : m.accuracy[i]) {
            std::snprintf(buf, sizeof(buf), ",%.17g", a);
            csv += buf;
        }
        std::snprintf(buf, sizeof(buf), ",%.17g,%.17g\n", m.g_star[i],
                      m.epsilon_reports[i].slack);
        csv += buf;
    }
    return csv;
}

std::string to_json_string(const UtilityMatrix& m, int indent) {
    nlohmann::json j;
    j["lambda"] = m.lambda;
    j["task_representative_ids"] = m.task_representative_ids;
    auto& rows = j["rows"] = nlohmann::json::array();
    for (std::size_t i = 0; i < m.party_ids.size(); ++i) {
        const EpsilonReport& e = m.epsilon_reports[i];
        rows.push_back({{"party_id", m.party_ids[i]},
                        {"accuracy", m.accuracy[i]},
                        {"g_star", m.g_star[i]},
                        {"epsilon", {{"satisfied", e.satisfied},
                                     {"achieved", e.achieved},
                                     {"g_star", e.g_star},
                                     {"epsilon", e.epsilon},
                                     {"slack", e.slack}}}});
    }
    return j.dump(indent);
}

}  // namespace shapmarket
