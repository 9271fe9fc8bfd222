// shapmarket: clear data markets, audit their robustness, and run the
// desk-scale experiments. Exit codes: 0 success, 1 a market check failed,
// 2 bad usage or bad input.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shapmarket/config.hpp"
#include "shapmarket/custom_train.hpp"
#include "shapmarket/experiments.hpp"
#include "shapmarket/hashing.hpp"
#include "shapmarket/market.hpp"
#include "shapmarket/multi_task.hpp"
#include "shapmarket/replication.hpp"
#include "shapmarket/selection.hpp"

namespace fs = std::filesystem;
using namespace shapmarket;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitBadInput = 2;

void write_file(const fs::path& dir, const std::string& name, const std::string& content) {
    fs::create_directories(dir);
    const fs::path path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("short write to " + path.string());
    std::cout << "wrote " << path.string() << "\n";
}

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "market config (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--seed", args.seed, "master seed for synthetic sources");
    cmd->add_option("--out", args.out_dir, "output directory for reports");
}

struct LoadedMarket {
    RunConfig config;
    GainFunction gain;
    std::vector<Party> roster;
    Provenance provenance;
};

LoadedMarket load_market(const CommonArgs& args) {
    LoadedMarket m;
    m.config = load_config(args.config_path);
    m.gain = build_gain(m.config.gain);
    m.roster = build_roster(m.config, args.seed);
    m.provenance = Provenance{m.config.hash, args.seed};
    return m;
}

void print_outcome(const MarketOutcome& outcome) {
    std::printf("grand value %.6g, pool %.6g, %s Shapley\n", outcome.grand_value, outcome.pool,
                outcome.exact_shapley ? "exact" : "sampled");
    for (const PartyOutcome& po : outcome.parties) {
        std::printf("  party %d: share %.6g, price %.6g, payout %.6g, net %+.6g\n", po.party_id,
                    po.shapley_share, po.price, po.payout, po.net);
    }
    for (const std::string& w : outcome.warnings) std::printf("  warning: %s\n", w.c_str());
}

int run_simulate(const CommonArgs& args, bool multi, bool audit, int samples) {
    LoadedMarket m = load_market(args);
    MarketConfig config = m.config.market;
    ClearOptions options;
    options.audit_table = audit;
    options.sample_permutations = samples;
    options.sample_seed = mix_seed(args.seed, 0x5a);

    MarketOutcome outcome;
    if (multi) {
        outcome = clear_multi(m.roster, m.gain, config, options);
    } else {
        const LabeledDataset validation =
            m.roster.empty() ? LabeledDataset() : m.roster.front().validation;
        outcome = clear_single(m.roster, validation, m.gain, config, options);
    }
    print_outcome(outcome);
    if (!args.out_dir.empty()) {
        write_file(args.out_dir, "outcome.json", to_json_string(outcome, m.provenance));
        write_file(args.out_dir, "outcome.csv", outcome_to_csv(outcome));
        if (!multi) {
            const LabeledDataset validation =
                m.roster.empty() ? LabeledDataset() : m.roster.front().validation;
            write_file(args.out_dir, "participation.json",
                       to_json_string(participation_check(m.roster, m.gain, validation)));
        }
    }
    return kExitOk;
}

int run_select(const CommonArgs& args) {
    LoadedMarket m = load_market(args);
    const TaskIndex tasks = distinct_tasks(m.roster);
    std::vector<SelectionReport> reports;
    for (int rep : tasks.distinct) {
        const std::vector<double> values =
            data_value(m.gain, m.roster[std::size_t(rep)].validation, m.roster,
                       m.config.market.exact_cap);
        const Coalition selected = select_relevant(values, m.config.market.tau, rep);
        SelectionReport report;
        report.task_representative_id = m.roster[std::size_t(rep)].id;
        report.tau = m.config.market.tau;
        for (std::size_t j = 0; j < m.roster.size(); ++j) {
            report.rows.push_back(SelectionRow{m.roster[j].id, values[j],
                                               ((selected >> j) & 1u) != 0});
        }
        reports.push_back(std::move(report));
    }
    for (const SelectionReport& report : reports) {
        std::printf("task of party %d (tau %.6g):\n", report.task_representative_id, report.tau);
        for (const SelectionRow& row : report.rows) {
            std::printf("  party %d: value %+.6g%s\n", row.party_id, row.shapley_value,
                        row.selected ? "  [selected]" : "");
        }
    }
    if (!args.out_dir.empty()) {
        write_file(args.out_dir, "selection.json", to_json_string(reports));
        for (const SelectionReport& report : reports) {
            write_file(args.out_dir,
                       "selection_task_" + std::to_string(report.task_representative_id) + ".csv",
                       to_csv(report));
        }
    }
    return kExitOk;
}

int run_train_custom(const CommonArgs& args) {
    LoadedMarket m = load_market(args);
    const UtilityMatrix matrix = utility_matrix(m.roster, m.gain, m.config.market);
    bool all_ok = true;
    for (std::size_t i = 0; i < matrix.party_ids.size(); ++i) {
        const EpsilonReport& er = matrix.epsilon_reports[i];
        std::printf("party %d: own-task accuracy %.6g (uncustomized %.6g, slack %+.6g)%s\n",
                    matrix.party_ids[i], er.achieved, er.g_star, er.slack,
                    er.satisfied ? "" : "  [epsilon constraint FAILED]");
        all_ok = all_ok && er.satisfied;
    }
    if (!args.out_dir.empty()) {
        write_file(args.out_dir, "utility.json", to_json_string(matrix));
        write_file(args.out_dir, "utility.csv", to_csv(matrix));
    }
    return all_ok ? kExitOk : kExitCheckFailed;
}

int run_attack(const CommonArgs& args, int target, int replicas, int sweep, bool multi) {
    LoadedMarket m = load_market(args);
    const MarketKind kind = multi ? MarketKind::Multi : MarketKind::Single;
    const RobustnessReport report =
        attack_payoff(m.roster, target, replicas, m.gain, m.config.market, kind);
    std::printf("attack on party %d with %d replica(s): honest net %+.6g, family net %+.6g -> %s\n",
                target, replicas, report.honest_net, report.family_net,
                report.robust ? "ROBUST" : "PROFITABLE");
    if (replicas == 1) {
        std::printf("  condition:   %.6g <= %.6g (%s)\n", report.condition_lhs,
                    report.condition_rhs, report.condition_holds ? "holds" : "violated");
        std::printf("  value shift: %.6g == %.6g (%s)\n", report.value_shift_lhs,
                    report.value_shift_rhs, report.value_shift_holds ? "holds" : "violated");
    }
    if (!args.out_dir.empty()) {
        write_file(args.out_dir, "attack.json", to_json_string(report, m.provenance));
        if (sweep > 0) {
            write_file(args.out_dir, "sweep.csv",
                       sweep_to_csv(attack_sweep(m.roster, target, sweep, m.gain,
                                                 m.config.market, kind)));
        }
    }
    return report.robust ? kExitOk : kExitCheckFailed;
}

int run_verify(const SuiteOptions& options, const std::string& out_dir) {
    const SuiteSummary summary = randomized_robustness_suite(options);
    std::printf("%d trials, %d attacks (%s-task, %s gains)\n", options.trials, summary.attacks,
                options.kind == MarketKind::Single ? "single" : "multi",
                options.adversarial_submodular ? "adversarial submodular" : "supermodular");
    std::printf("  replication profitable: %d\n", summary.robustness_violations);
    std::printf("  condition violated:     %d\n", summary.condition_violations);
    std::printf("  phi bound violated:     %d\n", summary.phi_bound_violations);
    std::printf("  value shift violated:   %d\n", summary.value_shift_violations);
    std::printf("  marginal cap violated:  %d\n", summary.margin_violations);
    std::printf("  weight identity broken: %d\n", summary.weight_identity_violations);
    std::printf("  mass cap violated:      %d\n", summary.mass_cap_violations);
    for (const SuiteCounterexample& ce : summary.counterexamples) {
        std::printf("  counterexample: trial %d (seed %llu), %d parties, target %d: %s "
                    "(lhs %.9g, rhs %.9g)\n",
                    ce.trial, static_cast<unsigned long long>(ce.trial_seed), ce.parties,
                    ce.target_id, ce.which.c_str(), ce.lhs, ce.rhs);
    }
    if (!out_dir.empty()) {
        write_file(out_dir, "suite.json",
                   to_json_string(summary, Provenance{0, options.seed}));
    }
    if (options.adversarial_submodular) return kExitOk;  // violations are the demonstration
    return summary.clean() ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shapmarket: Shapley-value data markets with replication-robust payments"};
    app.require_subcommand(1);

    CommonArgs single_args, multi_args, select_args, custom_args, attack_args;
    bool audit_single = false, audit_multi = false;
    int samples = 20000;

    CLI::App* sim_single = app.add_subcommand("simulate-single", "clear a single-task market");
    add_common(sim_single, single_args);
    sim_single->add_flag("--audit", audit_single, "attach the full characteristic table");
    sim_single->add_option("--samples", samples, "permutations when sampling is needed");

    CLI::App* sim_multi = app.add_subcommand("simulate-multi", "clear a multi-task market");
    add_common(sim_multi, multi_args);
    sim_multi->add_flag("--audit", audit_multi, "attach the full characteristic table");

    CLI::App* select = app.add_subcommand("select-data", "Shapley data values per task");
    add_common(select, select_args);

    CLI::App* custom = app.add_subcommand("train-custom", "customized models + utility matrix");
    add_common(custom, custom_args);

    CLI::App* attack = app.add_subcommand("replicate-attack", "replicate a party and re-clear");
    add_common(attack, attack_args);
    int target = 0, replicas = 1, sweep = 0;
    bool attack_multi = false;
    attack->add_option("--target", target, "party id to replicate")->required();
    attack->add_option("--replicas", replicas, "number of copies to add");
    attack->add_option("--sweep", sweep, "also sweep 0..K replicas into sweep.csv");
    attack->add_flag("--multi", attack_multi, "clear as a multi-task market");

    CLI::App* verify = app.add_subcommand("verify-properties", "randomized robustness suite");
    SuiteOptions suite;
    std::string verify_out;
    bool verify_multi = false;
    verify->add_option("--trials", suite.trials, "number of random markets");
    verify->add_option("--min-parties", suite.min_parties, "smallest market size");
    verify->add_option("--max-parties", suite.max_parties, "largest market size");
    verify->add_option("--seed", suite.seed, "suite seed");
    verify->add_flag("--multi", verify_multi, "multi-task markets");
    verify->add_flag("--adversarial", suite.adversarial_submodular,
                     "submodular gains: report (don't assert) violations");
    verify->add_option("--out", verify_out, "output directory");

    CLI::App* experiment = app.add_subcommand("experiment", "desk-scale experiments");
    experiment->require_subcommand(1);
    DatasetSourceOptions data;
    std::string mnist_images, mnist_labels, exp_out;
    int epochs = 100;
    const auto add_exp_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", data.seed, "data seed");
        cmd->add_option("--out", exp_out, "output directory");
        cmd->add_option("--mnist-images", mnist_images, "IDX image file (else synthetic digits)");
        cmd->add_option("--mnist-labels", mnist_labels, "IDX label file");
        cmd->add_option("--epochs", epochs, "logistic training epochs (default: per experiment)");
    };

    CLI::App* fig3 = experiment->add_subcommand("fig3", "replication: raw vs robust shares");
    Fig3Options fig3_options;
    add_exp_common(fig3);
    fig3->add_option("--per-party", fig3_options.per_party, "training records per party");
    fig3->add_option("--replicas", fig3_options.max_replicas, "max replicas");

    CLI::App* selexp = experiment->add_subcommand("selection", "Shapley data-value selection");
    SelectionExperimentOptions sel_options;
    add_exp_common(selexp);
    selexp->add_option("--parties", sel_options.parties, "number of parties");
    selexp->add_option("--per-party", sel_options.per_party, "training records per party");
    selexp->add_option("--tau", sel_options.tau, "selection threshold");

    CLI::App* fig4 = experiment->add_subcommand("fig4", "customized training utility matrix");
    Fig4Options fig4_options;
    add_exp_common(fig4);
    fig4->add_option("--parties", fig4_options.parties, "number of parties (2..5)");
    fig4->add_option("--lambda", fig4_options.lambda, "degradation weight");
    fig4->add_option("--epsilon", fig4_options.epsilon, "tolerated own-task sacrifice");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitBadInput;
    }

    try {
        if (sim_single->parsed())
            return run_simulate(single_args, false, audit_single, samples);
        if (sim_multi->parsed()) return run_simulate(multi_args, true, audit_multi, samples);
        if (select->parsed()) return run_select(select_args);
        if (custom->parsed()) return run_train_custom(custom_args);
        if (attack->parsed())
            return run_attack(attack_args, target, replicas, sweep, attack_multi);
        if (verify->parsed()) {
            suite.kind = verify_multi ? MarketKind::Multi : MarketKind::Single;
            return run_verify(suite, verify_out);
        }
        if (experiment->parsed()) {
            data.use_mnist = !mnist_images.empty() || !mnist_labels.empty();
            if (data.use_mnist && (mnist_images.empty() || mnist_labels.empty()))
                throw ConfigError("--mnist-images and --mnist-labels must be given together");
            data.mnist_images = mnist_images;
            data.mnist_labels = mnist_labels;
            if (fig3->parsed()) {
                fig3_options.data = data;
                if (fig3->count("--epochs") > 0) fig3_options.model.epochs = epochs;
                const Fig3Result result = experiment_fig3(fig3_options);
                const std::string csv = to_csv(result);
                std::fputs(csv.c_str(), stdout);
                if (!exp_out.empty()) write_file(exp_out, "fig3.csv", csv);
                return kExitOk;
            }
            if (selexp->parsed()) {
                sel_options.data = data;
                const SelectionExperimentResult result = experiment_selection(sel_options);
                const std::string csv = to_csv(result);
                std::fputs(csv.c_str(), stdout);
                if (!exp_out.empty()) write_file(exp_out, "selection.csv", csv);
                return kExitOk;
            }
            if (fig4->parsed()) {
                fig4_options.data = data;
                if (fig4->count("--epochs") > 0) fig4_options.model.epochs = epochs;
                const Fig4Result result = experiment_fig4(fig4_options);
                const std::string csv = to_csv(result);
                std::fputs(csv.c_str(), stdout);
                if (!exp_out.empty()) write_file(exp_out, "fig4.csv", csv);
                bool ok = true;
                for (const EpsilonReport& er : result.at_lambda.epsilon_reports)
                    ok = ok && er.satisfied;
                return ok ? kExitOk : kExitCheckFailed;
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return kExitBadInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    }
    return kExitBadInput;
}
