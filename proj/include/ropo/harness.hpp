#pragma once

// Experiment orchestration: JSON configs, seeded multi-run execution on the
// nominal kernel, evaluation on a (possibly perturbed) kernel, CSV output.

#include "ropo/environments.hpp"
#include "ropo/mdp_core.hpp"
#include "ropo/ropo_learner.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ropo {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kCsvSchemaVersion = 1;
inline constexpr const char* kSoftwareVersion = "0.1.0";

/// Pinned column order of the per-seed CSV files.
inline constexpr const char* kSeedCsvHeader =
    "seed,episode,v_hat,eval_return_mean,eval_return_std,robust_value,instant_regret,"
    "cumulative_regret";
inline constexpr const char* kAggregateCsvHeader =
    "episode,seeds,v_hat_mean,v_hat_std,eval_return_mean,eval_return_std,robust_value_mean,"
    "robust_value_std,cumulative_regret_mean,cumulative_regret_std";

enum class Algorithm { ropo, nonrobust };
enum class EvalKernel { nominal, perturbed, hard_worst_case };
enum class RegretMode { cadence, episode };

const char* to_string(Algorithm algorithm);
const char* to_string(EvalKernel kernel);

struct EnvironmentConfig {
    enum class Type { gridworld, hard_mdp } type = Type::gridworld;
    GridworldConfig grid = default_gridworld();
    /// Source of the layout ("default" when built in); informational.
    std::string layout_source = "default";
    HardMdpConfig hard;
};

/// One evaluation setting: perturbation metric and radius, plus the set the
/// robust learner trains with (and robust values are measured in).
struct Panel {
    PerturbationMetric metric = PerturbationMetric::l1;
    double radius = 0.0;
    UncertaintySet robust;

    std::string name() const;
};

struct ExperimentConfig {
    EnvironmentConfig environment;
    /// Training set of the robust learner when no sweep is given; with a sweep
    /// its kind is kept for L1 panels (l1_sa or l1_s) and the radius is replaced.
    /// Panels are resolved from it at parse time.
    UncertaintySet uncertainty{UncertaintyKind::l1_sa, 0.1};
    std::vector<Algorithm> algorithms{Algorithm::ropo, Algorithm::nonrobust};
    std::size_t episodes = 3000;
    std::vector<std::uint64_t> seeds{1};

    EvalKernel eval_kernel = EvalKernel::perturbed;
    std::vector<Panel> panels;
    std::size_t cadence = 100;
    std::size_t rollouts = 20;
    bool planner = true;
    RegretMode regret_mode = RegretMode::cadence;

    /// Failure probability; unset means 1/H.
    std::optional<double> failure_prob;
    /// Bonus multiplier per uncertainty kind (indexed by UncertaintyKind); the
    /// non-robust learner uses the l1_sa entry.
    std::array<double, 3> bonus_scale{1.0, 1.0, 1.0};

    double bonus_scale_for(UncertaintyKind kind) const {
        return bonus_scale[static_cast<std::size_t>(kind)];
    }
    /// KL bonus constant c; unset means the smallest nominal transition probability.
    std::optional<double> kl_min_prob;
    double learning_rate = 0.0;
    MirrorSign mirror_sign = MirrorSign::ascent;
    L1sMethod l1s_method = L1sMethod::level_set;

    std::filesystem::path out_dir = "results";
    bool plot = true;
    /// Worker threads for seeds; 0 picks the hardware concurrency.
    std::size_t threads = 0;

    /// The raw JSON after overrides; hashed into the metadata.
    nlohmann::json source;

    void validate() const;
};

/// Parses a config document. Relative layout paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc,
                                         const std::filesystem::path& base_dir = {});

/// Reads a JSON config file and applies dotted `key=value` overrides first.
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::string>& overrides = {});

/// Sets doc[a][b][c] = value for "a.b.c=value"; the value is parsed as JSON
/// when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Default experiment document (5x5 Gridworld, L1-SA and KL sweeps over 0.1..0.3).
nlohmann::json default_experiment_document();

/// Nominal spec of the configured environment with the given uncertainty set.
RobustMdpSpec build_environment(const EnvironmentConfig& env, const UncertaintySet& set);

/// Set an algorithm trains with in a panel (radius 0 for the non-robust learner).
UncertaintySet training_set(const Panel& panel, Algorithm algorithm);

/// Evaluation kernel for a panel, with the number of clipped rows.
PerturbedKernel evaluation_kernel(const ExperimentConfig& config, const Panel& panel);

struct SeedRow {
    std::uint64_t seed = 0;
    std::size_t episode = 0;
    double v_hat = 0.0;
    double eval_return_mean = 0.0;
    double eval_return_std = 0.0;
    double robust_value = 0.0;
    double instant_regret = 0.0;
    double cumulative_regret = 0.0;
};

struct AggregateRow {
    std::size_t episode = 0;
    std::size_t seeds = 0;
    double v_hat_mean = 0.0, v_hat_std = 0.0;
    double eval_return_mean = 0.0, eval_return_std = 0.0;
    double robust_value_mean = 0.0, robust_value_std = 0.0;
    double cumulative_regret_mean = 0.0, cumulative_regret_std = 0.0;
};

struct SeriesResult {
    Panel panel;
    Algorithm algorithm = Algorithm::ropo;
    UncertaintySet trained_with;
    /// One row list per successful seed, in seed order.
    std::vector<std::vector<SeedRow>> seeds;
    std::vector<std::uint64_t> failed_seeds;
    std::vector<AggregateRow> aggregate;
};

struct ExperimentResult {
    std::vector<SeriesResult> series;
    bool clipped = false;
    bool held_snapshots = false;
    double wall_seconds = 0.0;
};

/// Runs the experiment in memory; write_experiment persists it.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes per-seed CSVs, aggregates, metadata.json and (optionally) plot.svg.
void write_experiment(const ExperimentConfig& config, const ExperimentResult& result);

/// Mean and sample standard deviation (0 for a single value).
std::pair<double, double> mean_and_std(std::span<const double> values);

std::vector<AggregateRow> aggregate_rows(const std::vector<std::vector<SeedRow>>& seeds);

std::string format_seed_csv(std::span<const SeedRow> rows);
std::string format_aggregate_csv(std::span<const AggregateRow> rows);
std::vector<SeedRow> parse_seed_csv(std::istream& in);
std::vector<AggregateRow> parse_aggregate_csv(std::istream& in);

/// Shortest round-trip representation used in every output file.
std::string format_double(double value);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

} // namespace ropo
