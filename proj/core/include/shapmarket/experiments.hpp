#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shapmarket/custom_train.hpp"
#include "shapmarket/market.hpp"
#include "shapmarket/model.hpp"

namespace shapmarket {

// "Digit" data for experiments: ten well-separated Gaussian clusters in
// R^dim, one per label, center_scale along axis `label`. Separation is large
// relative to stddev so 1-NN and logistic models behave like they do on the
// real digits at desk scale.
struct SyntheticDigitsOptions {
    int dim = 16;
    double center_scale = 10.0;
    double stddev = 0.4;
};

LabeledDataset synth_digits(std::span<const int> labels, int per_label, std::uint64_t seed,
                            const SyntheticDigitsOptions& options = {});

// Shared source switch: synthetic digits (default) or an IDX digit file
// pair. Draws are deterministic in `seed`.
struct DatasetSourceOptions {
    bool use_mnist = false;
    std::filesystem::path mnist_images;
    std::filesystem::path mnist_labels;
    std::uint64_t seed = 1;
    SyntheticDigitsOptions synth;
};

// ---- replication experiment ------------------------------------------------
// Two honest parties (labels {0,8} and {2,8}) on a shared validation task
// over labels {0,2,8}; party 2 is replicated 0..max_replicas times. Shares
// are computed both under the plain gain characteristic u(S) = G(f_S)
// (replication pays) and under the market characteristic v (it does not).
struct Fig3Options {
    DatasetSourceOptions data;
    int per_party = 100;           // training records per party (split over its labels)
    int validation_per_label = 50;
    int max_replicas = 4;
    // Heavy ridge plus a long schedule: weights stay small while the
    // (unregularized) biases of a party's own classes grow, so validation
    // points with labels the party never saw land on one of its own classes
    // instead of whichever absent class a near-zero logit race happens to
    // favor. Singleton gains then measure label coverage, not tie-break
    // noise, and the two parties score symmetrically.
    ModelSpec model{.learning_rate = 0.05, .epochs = 300, .l2 = 0.3};
    double unit_price = 1.0;
};

struct Fig3Row {
    int replicas = 0;
    double u_family_share = 0.0;
    double u_p1_share = 0.0;       // honest party's share in the same market
    double u_honest_share = 0.0;   // family share at zero replicas (baseline)
    double v_family_share = 0.0;
    double v_p1_share = 0.0;
    double v_honest_share = 0.0;
    double v_family_net = 0.0;
    double v_honest_net = 0.0;
    double grand_gain = 0.0;
};

struct Fig3Result {
    std::vector<Fig3Row> rows;
    std::uint64_t seed = 0;
};

Fig3Result experiment_fig3(const Fig3Options& options);
std::string to_csv(const Fig3Result& result);

// ---- data-selection experiment ----------------------------------------------
// `parties` parties each hold two adjacent labels (j, j+1 mod 10); the task
// validation covers task_labels. Shapley data values phi(u, j) identify
// exactly the parties holding task labels.
struct SelectionExperimentOptions {
    DatasetSourceOptions data;
    int parties = 10;
    int per_party = 100;
    int validation_per_label = 20;
    std::vector<int> task_labels = {0, 1, 2, 3, 6, 8};
    double tau = 0.0;
};

struct SelectionExperimentResult {
    std::vector<int> party_ids;
    std::vector<std::array<int, 2>> party_labels;
    std::vector<double> values;   // phi(u, j)
    std::vector<bool> on_task;    // party holds at least one task label
    Coalition selected = 0;
};

SelectionExperimentResult experiment_selection(const SelectionExperimentOptions& options);
std::string to_csv(const SelectionExperimentResult& result);

// ---- customized-training experiment -----------------------------------------
// Four parties with disjoint label pairs; each trains a customized model at
// lambda and at 0 (control). The utility matrices quantify how much the
// customization protects each owner's task from free-riding.
struct Fig4Options {
    DatasetSourceOptions data;
    int parties = 4;
    int per_label = 50;
    int validation_per_label = 25;
    double lambda = 1.0;
    double epsilon = 0.1;  // the degrade term trades a little own-task headroom
    ModelSpec model;
};

struct Fig4Result {
    UtilityMatrix at_lambda;
    UtilityMatrix at_zero;
};

Fig4Result experiment_fig4(const Fig4Options& options);
std::string to_csv(const Fig4Result& result);

}  // namespace shapmarket
