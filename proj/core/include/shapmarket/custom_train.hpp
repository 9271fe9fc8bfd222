#pragma once

#include <string>
#include <vector>

#include "shapmarket/market.hpp"
#include "shapmarket/model.hpp"

namespace shapmarket {

// Customized training: fit the owner's model while actively degrading the
// other tasks, by gradient descent on
//   CE(own_train) - lambda * sum_t CE(other_tasks[t]) + l2/2 ||W||^2.
struct CustomTrainResult {
    TrainedModel model;
    double own_train_accuracy = 0.0;
    std::vector<double> other_task_accuracy;  // aligned with other_tasks
};

CustomTrainResult train_custom(const ModelSpec& spec,
                               const LabeledDataset& own_train,
                               const std::vector<LabeledDataset>& other_tasks,
                               double lambda);

// Post-hoc epsilon constraint: the customized model must keep
//   accuracy >= g_star - epsilon
// on the reference set. slack = achieved - (g_star - epsilon); negative
// slack means the constraint failed.
struct EpsilonReport {
    bool satisfied = false;
    double achieved = 0.0;
    double g_star = 0.0;
    double epsilon = 0.0;
    double slack = 0.0;
};

EpsilonReport check_epsilon_constraint(double achieved, double g_star, double epsilon);

// Cross-task utility matrix: entry (i, j) is the accuracy of party i's
// customized model on task j's validation data. Diagonal entries should
// stay within epsilon of the uncustomized model; off-diagonal entries are
// the externality the customization is designed to create.
struct UtilityMatrix {
    std::vector<int> party_ids;
    std::vector<int> task_representative_ids;        // task owner per column
    std::vector<std::vector<double>> accuracy;       // [party][task]
    std::vector<double> g_star;                      // uncustomized own-task accuracy
    std::vector<EpsilonReport> epsilon_reports;      // per party, on own validation
    double lambda = 1.0;
};

// Builds the matrix for a roster: selects each party's relevant data at
// config.tau, trains the customized model with config.lambda, and evaluates
// it on every distinct task. Model-backed gains only.
UtilityMatrix utility_matrix(const std::vector<Party>& parties,
                             const GainFunction& gain,
                             const MarketConfig& config);

std::string to_csv(const UtilityMatrix& m);
std::string to_json_string(const UtilityMatrix& m, int indent = 2);

}  // namespace shapmarket
