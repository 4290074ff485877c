#include "ropo/harness.hpp"

#include "ropo/planner.hpp"
#include "ropo/plot.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace ropo {

using nlohmann::json;

const char* to_string(Algorithm algorithm) {
    return algorithm == Algorithm::ropo ? "ropo" : "nonrobust";
}

const char* to_string(EvalKernel kernel) {
    switch (kernel) {
    case EvalKernel::nominal: return "nominal";
    case EvalKernel::perturbed: return "perturbed";
    case EvalKernel::hard_worst_case: return "hard-worst-case";
    }
    return "?";
}

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
    return {buffer, result.ptr};
}

std::string Panel::name() const {
    return std::string(to_string(metric)) + "_rho" + format_double(radius);
}

// Config ---------------------------------------------------------------------------

namespace {

void check_keys(const json& object, const std::string& where, std::initializer_list<const char*> known) {
    if (!object.is_object()) throw ConfigError("'" + where + "' must be an object");
    for (const auto& item : object.items()) {
        const bool ok = std::any_of(known.begin(), known.end(),
                                    [&](const char* k) { return item.key() == k; });
        if (!ok) throw ConfigError("unknown key '" + where + "." + item.key() + "'");
    }
}

template <class T>
T get_or(const json& object, const char* key, T fallback, const std::string& where) {
    if (!object.contains(key)) return fallback;
    try {
        return object.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("'" + where + "." + key + "' has the wrong type");
    }
}

std::size_t get_count(const json& object, const char* key, std::size_t fallback,
                      const std::string& where) {
    if (!object.contains(key)) return fallback;
    const json& value = object.at(key);
    if (!value.is_number_integer() || value.get<long long>() < 0)
        throw ConfigError("'" + where + "." + key + "' must be a nonnegative integer");
    return value.get<std::size_t>();
}

MirrorSign mirror_sign_from_string(const std::string& name) {
    if (name == "ascent") return MirrorSign::ascent;
    if (name == "descent") return MirrorSign::descent;
    throw ConfigError("unknown mirror_sign '" + name + "' (expected ascent or descent)");
}

L1sMethod l1s_method_from_string(const std::string& name) {
    if (name == "level_set") return L1sMethod::level_set;
    if (name == "subgradient") return L1sMethod::subgradient;
    throw ConfigError("unknown l1s_method '" + name + "' (expected level_set or subgradient)");
}

EvalKernel eval_kernel_from_string(const std::string& name) {
    if (name == "nominal") return EvalKernel::nominal;
    if (name == "perturbed") return EvalKernel::perturbed;
    if (name == "hard-worst-case") return EvalKernel::hard_worst_case;
    throw ConfigError("unknown evaluation kernel '" + name +
                      "' (expected nominal, perturbed or hard-worst-case)");
}

Algorithm algorithm_from_string(const std::string& name) {
    if (name == "ropo") return Algorithm::ropo;
    if (name == "nonrobust") return Algorithm::nonrobust;
    throw ConfigError("unknown algorithm '" + name + "' (expected ropo or nonrobust)");
}

EnvironmentConfig parse_environment(const json& doc, const std::filesystem::path& base_dir) {
    check_keys(doc, "environment",
               {"type", "layout", "layout_text", "slip_success", "horizon", "smoothing",
                "reward_noise", "epsilon", "radius"});
    EnvironmentConfig env;
    const std::string type = get_or<std::string>(doc, "type", "gridworld", "environment");
    if (type == "gridworld") {
        env.type = EnvironmentConfig::Type::gridworld;
        if (doc.contains("layout_text")) {
            std::istringstream in(get_or<std::string>(doc, "layout_text", "", "environment"));
            env.grid = parse_layout(in);
            env.layout_source = "inline";
        } else {
            const std::string layout = get_or<std::string>(doc, "layout", "default", "environment");
            if (layout != "default") {
                std::filesystem::path path(layout);
                if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
                env.grid = load_layout(path.string());
                env.layout_source = layout;
            }
        }
        env.grid.slip_success = get_or(doc, "slip_success", env.grid.slip_success, "environment");
        env.grid.horizon = get_count(doc, "horizon", env.grid.horizon, "environment");
        env.grid.smoothing = get_or(doc, "smoothing", env.grid.smoothing, "environment");
        const std::string noise = get_or<std::string>(doc, "reward_noise", "bernoulli", "environment");
        if (noise == "bernoulli") env.grid.reward_noise = RewardNoise::bernoulli;
        else if (noise == "deterministic") env.grid.reward_noise = RewardNoise::deterministic;
        else throw ConfigError("unknown reward_noise '" + noise + "'");
        env.grid.validate();
    } else if (type == "hard_mdp") {
        env.type = EnvironmentConfig::Type::hard_mdp;
        env.hard.epsilon = get_or(doc, "epsilon", env.hard.epsilon, "environment");
        env.hard.radius = get_or(doc, "radius", env.hard.radius, "environment");
        env.hard.horizon = get_count(doc, "horizon", env.hard.horizon, "environment");
        env.hard.validate();
    } else {
        throw ConfigError("unknown environment type '" + type + "' (expected gridworld or hard_mdp)");
    }
    return env;
}

} // namespace

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw ConfigError("seeds must be distinct");
    if (episodes == 0) throw ConfigError("episodes must be at least 1");
    if (algorithms.empty()) throw ConfigError("algorithms must not be empty");
    if (cadence == 0) throw ConfigError("evaluation.cadence must be at least 1");
    if (rollouts == 0) throw ConfigError("evaluation.rollouts must be at least 1");
    if (panels.empty()) throw ConfigError("no evaluation panels");
    for (double scale : bonus_scale)
        if (!(scale >= 0.0) || !std::isfinite(scale)) throw ConfigError("bonus.scale must be nonnegative");
    if (failure_prob && !(*failure_prob > 0.0 && *failure_prob < 1.0))
        throw ConfigError("bonus.failure_prob must lie in (0, 1)");
    if (kl_min_prob && !(*kl_min_prob > 0.0 && *kl_min_prob <= 1.0))
        throw ConfigError("bonus.kl_min_prob must lie in (0, 1]");
    if (!(learning_rate >= 0.0)) throw ConfigError("learner.learning_rate must be nonnegative");
    if (eval_kernel == EvalKernel::hard_worst_case &&
        environment.type != EnvironmentConfig::Type::hard_mdp)
        throw ConfigError("the hard-worst-case kernel needs the hard_mdp environment");
    if (eval_kernel == EvalKernel::perturbed &&
        environment.type != EnvironmentConfig::Type::gridworld)
        throw ConfigError("the perturbed kernel needs the gridworld environment");
    for (const Panel& panel : panels) {
        panel.robust.validate();
        if (panel.metric == PerturbationMetric::l1 && !(panel.radius >= 0.0 && panel.radius <= 2.0))
            throw ConfigError("L1 perturbation radius must lie in [0, 2]");
        if (panel.metric == PerturbationMetric::kl && !(panel.radius >= 0.0 && std::isfinite(panel.radius)))
            throw ConfigError("KL perturbation radius must be finite and nonnegative");
        if (environment.type == EnvironmentConfig::Type::hard_mdp &&
            environment.hard.epsilon - panel.robust.radius / 2.0 <= 0.0)
            throw ConfigError("hard MDP needs epsilon - rho/2 > 0");
    }
}

ExperimentConfig parse_experiment_config(const json& doc, const std::filesystem::path& base_dir) {
    check_keys(doc, "config",
               {"schema_version", "environment", "uncertainty", "algorithms", "episodes", "seeds",
                "evaluation", "sweep", "bonus", "learner", "output", "threads"});
    if (!doc.contains("schema_version") || !doc.at("schema_version").is_number_integer())
        throw ConfigError("config needs an integer schema_version");
    if (doc.at("schema_version").get<int>() != kConfigSchemaVersion)
        throw ConfigError("unsupported schema_version " + doc.at("schema_version").dump() +
                          " (expected " + std::to_string(kConfigSchemaVersion) + ")");

    ExperimentConfig config;
    config.source = doc;
    config.environment = parse_environment(doc.value("environment", json::object()), base_dir);

    const json uncertainty = doc.value("uncertainty", json::object());
    check_keys(uncertainty, "uncertainty", {"kind", "radius"});
    config.uncertainty.kind =
        uncertainty_kind_from_string(get_or<std::string>(uncertainty, "kind", "l1_sa", "uncertainty"));
    config.uncertainty.radius = get_or(uncertainty, "radius", 0.1, "uncertainty");

    if (doc.contains("algorithms")) {
        if (!doc.at("algorithms").is_array()) throw ConfigError("'algorithms' must be a list");
        config.algorithms.clear();
        for (const auto& name : doc.at("algorithms"))
            config.algorithms.push_back(algorithm_from_string(name.get<std::string>()));
    }
    config.episodes = get_count(doc, "episodes", config.episodes, "config");

    if (doc.contains("seeds")) {
        const json& seeds = doc.at("seeds");
        config.seeds.clear();
        if (seeds.is_array()) {
            for (const auto& s : seeds) {
                if (!s.is_number_integer() || s.get<std::int64_t>() < 0) throw ConfigError("seeds must be nonnegative integers");
                config.seeds.push_back(s.get<std::uint64_t>());
            }
        } else if (seeds.is_object()) {
            check_keys(seeds, "seeds", {"count", "start"});
            const std::size_t count = get_count(seeds, "count", 1, "seeds");
            const std::size_t start = get_count(seeds, "start", 1, "seeds");
            for (std::size_t i = 0; i < count; ++i) config.seeds.push_back(start + i);
        } else {
            throw ConfigError("seeds must be a list or {count, start}");
        }
    }

    const json evaluation = doc.value("evaluation", json::object());
    check_keys(evaluation, "evaluation",
               {"kernel", "metric", "radius", "cadence", "rollouts", "planner", "regret"});
    config.eval_kernel =
        eval_kernel_from_string(get_or<std::string>(evaluation, "kernel", "perturbed", "evaluation"));
    config.cadence = get_count(evaluation, "cadence", config.cadence, "evaluation");
    config.rollouts = get_count(evaluation, "rollouts", config.rollouts, "evaluation");
    config.planner = get_or(evaluation, "planner", config.planner, "evaluation");
    const std::string regret = get_or<std::string>(evaluation, "regret", "cadence", "evaluation");
    if (regret == "cadence") config.regret_mode = RegretMode::cadence;
    else if (regret == "episode") config.regret_mode = RegretMode::episode;
    else throw ConfigError("evaluation.regret must be cadence or episode");

    if (doc.contains("sweep")) {
        const json& sweep = doc.at("sweep");
        check_keys(sweep, "sweep", {"metrics", "radii"});
        if (!sweep.contains("metrics") || !sweep.contains("radii"))
            throw ConfigError("sweep needs metrics and radii");
        for (const auto& metric_name : sweep.at("metrics")) {
            const PerturbationMetric metric =
                perturbation_metric_from_string(metric_name.get<std::string>());
            for (const auto& r : sweep.at("radii")) {
                if (!r.is_number()) throw ConfigError("sweep.radii must be numbers");
                Panel panel{metric, r.get<double>(), {}};
                if (metric == PerturbationMetric::kl) panel.robust = {UncertaintyKind::kl, panel.radius};
                else if (config.uncertainty.kind == UncertaintyKind::kl)
                    panel.robust = {UncertaintyKind::l1_sa, panel.radius};
                else panel.robust = {config.uncertainty.kind, panel.radius};
                config.panels.push_back(panel);
            }
        }
    } else {
        Panel panel;
        const PerturbationMetric fallback = config.uncertainty.kind == UncertaintyKind::kl
                                                ? PerturbationMetric::kl
                                                : PerturbationMetric::l1;
        panel.metric = evaluation.contains("metric")
                           ? perturbation_metric_from_string(
                                 get_or<std::string>(evaluation, "metric", "l1", "evaluation"))
                           : fallback;
        panel.radius = get_or(evaluation, "radius", config.uncertainty.radius, "evaluation");
        panel.robust = config.uncertainty;
        config.panels.push_back(panel);
    }

    const json bonus = doc.value("bonus", json::object());
    check_keys(bonus, "bonus", {"failure_prob", "scale", "kl_min_prob"});
    if (bonus.contains("failure_prob") && !bonus.at("failure_prob").is_null())
        config.failure_prob = get_or(bonus, "failure_prob", 0.0, "bonus");
    if (bonus.contains("scale")) {
        const json& scale = bonus.at("scale");
        if (scale.is_number()) {
            config.bonus_scale.fill(scale.get<double>());
        } else if (scale.is_object()) {
            check_keys(scale, "bonus.scale", {"l1_sa", "l1_s", "kl"});
            for (const auto& item : scale.items()) {
                if (!item.value().is_number()) throw ConfigError("bonus.scale entries must be numbers");
                config.bonus_scale[static_cast<std::size_t>(uncertainty_kind_from_string(item.key()))] =
                    item.value().get<double>();
            }
        } else {
            throw ConfigError("bonus.scale must be a number or an object keyed by uncertainty kind");
        }
    }
    if (bonus.contains("kl_min_prob")) {
        const json& c = bonus.at("kl_min_prob");
        if (c.is_number()) config.kl_min_prob = c.get<double>();
        else if (!(c.is_string() && c.get<std::string>() == "oracle"))
            throw ConfigError("bonus.kl_min_prob must be a number or \"oracle\"");
    }

    const json learner = doc.value("learner", json::object());
    check_keys(learner, "learner", {"learning_rate", "mirror_sign", "l1s_method"});
    config.learning_rate = get_or(learner, "learning_rate", 0.0, "learner");
    config.mirror_sign =
        mirror_sign_from_string(get_or<std::string>(learner, "mirror_sign", "ascent", "learner"));
    config.l1s_method =
        l1s_method_from_string(get_or<std::string>(learner, "l1s_method", "level_set", "learner"));

    const json output = doc.value("output", json::object());
    check_keys(output, "output", {"dir", "plot"});
    config.out_dir = get_or<std::string>(output, "dir", "results", "output");
    config.plot = get_or(output, "plot", true, "output");
    config.threads = get_count(doc, "threads", 0, "config");

    config.validate();
    return config;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) throw ConfigError("override '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            json value = json::parse(text, nullptr, false);
            (*node)[part] = value.is_discarded() ? json(text) : value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return parse_experiment_config(doc, path.parent_path());
}

json default_experiment_document() {
    return json{
        {"schema_version", kConfigSchemaVersion},
        {"environment", {{"type", "gridworld"}, {"layout", "default"}, {"horizon", 20}}},
        {"uncertainty", {{"kind", "l1_sa"}, {"radius", 0.1}}},
        {"algorithms", {"ropo", "nonrobust"}},
        {"episodes", 3000},
        {"seeds", {{"count", 20}, {"start", 1}}},
        {"evaluation", {{"kernel", "perturbed"}, {"cadence", 100}, {"rollouts", 20}}},
        {"sweep", {{"metrics", {"l1", "kl"}}, {"radii", {0.1, 0.2, 0.3}}}},
        {"bonus", {{"scale", {{"l1_sa", 0.001}, {"l1_s", 0.001}, {"kl", 4e-5}}}, {"kl_min_prob", 1.0}}},
    };
}

// Environment plumbing -----------------------------------------------------------------

RobustMdpSpec build_environment(const EnvironmentConfig& env, const UncertaintySet& set) {
    if (env.type == EnvironmentConfig::Type::gridworld) {
        GridworldConfig grid = env.grid;
        grid.uncertainty = set;
        return build_gridworld(grid).spec;
    }
    HardMdpConfig hard = env.hard;
    hard.radius = set.radius;
    RobustMdpSpec spec = build_hard_mdp(hard).spec;
    spec.uncertainty = set;
    return spec;
}

UncertaintySet training_set(const Panel& panel, Algorithm algorithm) {
    if (algorithm == Algorithm::nonrobust) return {UncertaintyKind::l1_sa, 0.0};
    return panel.robust;
}

PerturbedKernel evaluation_kernel(const ExperimentConfig& config, const Panel& panel) {
    const EnvironmentConfig& env = config.environment;
    switch (config.eval_kernel) {
    case EvalKernel::nominal:
        return {build_environment(env, panel.robust).nominal};
    case EvalKernel::perturbed: {
        GridworldConfig grid = env.grid;
        grid.uncertainty = panel.robust;
        return perturb_gridworld(build_gridworld(grid), panel.radius, panel.metric);
    }
    case EvalKernel::hard_worst_case: {
        HardMdpConfig hard = env.hard;
        hard.radius = panel.radius;
        return {build_hard_mdp(hard).worst_case};
    }
    }
    throw ConfigError("unknown evaluation kernel");
}

// Statistics and CSV ---------------------------------------------------------------------

std::pair<double, double> mean_and_std(std::span<const double> values) {
    if (values.empty()) return {0.0, 0.0};
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return {mean, 0.0};
    double squares = 0.0;
    for (double v : values) squares += (v - mean) * (v - mean);
    return {mean, std::sqrt(squares / static_cast<double>(values.size() - 1))};
}

std::vector<AggregateRow> aggregate_rows(const std::vector<std::vector<SeedRow>>& seeds) {
    std::vector<AggregateRow> rows;
    if (seeds.empty()) return rows;
    const std::size_t n = seeds.front().size();
    for (const auto& s : seeds)
        if (s.size() != n) throw ConfigError("seed CSVs have different row counts");
    std::vector<double> buffer(seeds.size());
    auto column = [&](std::size_t i, double SeedRow::*field) {
        for (std::size_t j = 0; j < seeds.size(); ++j) buffer[j] = seeds[j][i].*field;
        return mean_and_std(buffer);
    };
    for (std::size_t i = 0; i < n; ++i) {
        AggregateRow row;
        row.episode = seeds.front()[i].episode;
        for (const auto& s : seeds)
            if (s[i].episode != row.episode) throw ConfigError("seed CSVs disagree on episodes");
        row.seeds = seeds.size();
        std::tie(row.v_hat_mean, row.v_hat_std) = column(i, &SeedRow::v_hat);
        std::tie(row.eval_return_mean, row.eval_return_std) = column(i, &SeedRow::eval_return_mean);
        std::tie(row.robust_value_mean, row.robust_value_std) = column(i, &SeedRow::robust_value);
        std::tie(row.cumulative_regret_mean, row.cumulative_regret_std) =
            column(i, &SeedRow::cumulative_regret);
        rows.push_back(row);
    }
    return rows;
}

std::string format_seed_csv(std::span<const SeedRow> rows) {
    std::string out = std::string(kSeedCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.seed) + "," + std::to_string(r.episode) + "," +
               format_double(r.v_hat) + "," + format_double(r.eval_return_mean) + "," +
               format_double(r.eval_return_std) + "," + format_double(r.robust_value) + "," +
               format_double(r.instant_regret) + "," + format_double(r.cumulative_regret) + "\n";
    }
    return out;
}

std::string format_aggregate_csv(std::span<const AggregateRow> rows) {
    std::string out = std::string(kAggregateCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.episode) + "," + std::to_string(r.seeds) + "," +
               format_double(r.v_hat_mean) + "," + format_double(r.v_hat_std) + "," +
               format_double(r.eval_return_mean) + "," + format_double(r.eval_return_std) + "," +
               format_double(r.robust_value_mean) + "," + format_double(r.robust_value_std) + "," +
               format_double(r.cumulative_regret_mean) + "," +
               format_double(r.cumulative_regret_std) + "\n";
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
        if (comma == std::string::npos) return fields;
        start = comma + 1;
    }
}

double parse_field(const std::string& text, std::size_t line, std::size_t column) {
    if (text == "nan") return std::nan("");
    double value = 0.0;
    const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
    if (result.ec != std::errc() || result.ptr != text.data() + text.size())
        throw ParseError("column " + std::to_string(column + 1) + ": '" + text + "' is not a number",
                         line);
    return value;
}

std::vector<std::vector<double>> read_csv(std::istream& in, const char* header) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw ParseError("unexpected CSV header '" + line + "'", 1);
    const std::size_t width = split_csv_line(header).size();
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != width)
            throw ParseError("expected " + std::to_string(width) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        std::vector<double> row;
        for (std::size_t i = 0; i < width; ++i) row.push_back(parse_field(fields[i], line_no, i));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

std::vector<SeedRow> parse_seed_csv(std::istream& in) {
    std::vector<SeedRow> rows;
    for (const auto& f : read_csv(in, kSeedCsvHeader))
        rows.push_back({static_cast<std::uint64_t>(f[0]), static_cast<std::size_t>(f[1]), f[2], f[3],
                        f[4], f[5], f[6], f[7]});
    return rows;
}

std::vector<AggregateRow> parse_aggregate_csv(std::istream& in) {
    std::vector<AggregateRow> rows;
    for (const auto& f : read_csv(in, kAggregateCsvHeader))
        rows.push_back({static_cast<std::size_t>(f[0]), static_cast<std::size_t>(f[1]), f[2], f[3],
                        f[4], f[5], f[6], f[7], f[8], f[9]});
    return rows;
}

std::string config_hash(const json& doc) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : doc.dump()) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
    return buffer;
}

// Running -------------------------------------------------------------------------------

namespace {

bool is_cadence_point(std::size_t k, std::size_t cadence, std::size_t episodes) {
    return k == 1 || k % cadence == 0 || k == episodes;
}

/// Per-panel evaluation context shared read-only by all workers.
struct PanelContext {
    Panel panel;
    RobustMdpSpec robust_spec; ///< robust values and V* are measured here
    PerturbedKernel eval;
    double v_star = std::nan("");
};

/// One learner run (algorithm + training set + seed) evaluated on several panels.
struct Job {
    UncertaintySet set;
    std::uint64_t seed = 0;
    std::vector<std::size_t> series; ///< indices into ExperimentResult::series
};

std::vector<std::vector<SeedRow>> run_job(const ExperimentConfig& config, const Job& job,
                                          const std::vector<PanelContext>& panels,
                                          const std::vector<std::size_t>& series_panel) {
    const RobustMdpSpec spec = build_environment(config.environment, job.set);
    const std::size_t H = spec.shape.horizon;

    RopoConfig ropo;
    ropo.uncertainty = job.set;
    ropo.bonus.failure_prob = config.failure_prob.value_or(1.0 / static_cast<double>(H));
    ropo.bonus.scale = config.bonus_scale_for(job.set.is_nominal() ? UncertaintyKind::l1_sa : job.set.kind);
    ropo.bonus.kl_min_prob = config.kl_min_prob.value_or(spec.nominal.min_entry());
    ropo.learning_rate = config.learning_rate;
    ropo.mirror_sign = config.mirror_sign;
    ropo.l1s_method = config.l1s_method;
    ropo.snapshot_every = config.episodes; // evaluation happens in the observer

    const std::size_t n = job.series.size();
    std::vector<std::vector<SeedRow>> rows(n);
    std::vector<double> held(n, 0.0);
    std::vector<double> cumulative(n, 0.0);

    auto observer = [&](const EpisodeRecord& record, const StochasticPolicy& policy) {
        const std::size_t k = record.episode;
        const bool point = is_cadence_point(k, config.cadence, config.episodes);
        for (std::size_t i = 0; i < n; ++i) {
            const PanelContext& ctx = panels[series_panel[job.series[i]]];
            if (config.planner && (point || config.regret_mode == RegretMode::episode))
                held[i] = robust_value(ctx.robust_spec, policy);
            const double instant = config.planner ? ctx.v_star - held[i] : std::nan("");
            cumulative[i] += instant;
            if (!point) continue;

            Rng rng = Rng::derive(job.seed, k, StreamPurpose::evaluation);
            std::vector<double> returns;
            returns.reserve(config.rollouts);
            for (std::size_t r = 0; r < config.rollouts; ++r)
                returns.push_back(sample_episode(spec, policy, ctx.eval.kernel, rng).total_reward());
            const auto [mean, stdev] = mean_and_std(returns);
            rows[i].push_back({job.seed, k, record.v_hat, mean, stdev,
                               config.planner ? held[i] : std::nan(""), instant, cumulative[i]});
        }
    };
    run_ropo(spec, config.episodes, ropo, job.seed, observer);
    return rows;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    ExperimentResult result;

    std::vector<PanelContext> panels;
    for (const Panel& panel : config.panels) {
        PanelContext ctx{panel, build_environment(config.environment, panel.robust),
                         evaluation_kernel(config, panel)};
        if (config.planner) ctx.v_star = regret_reference_value(ctx.robust_spec);
        result.clipped = result.clipped || ctx.eval.clipped();
        panels.push_back(std::move(ctx));
    }

    // Series are panel-major; learners with identical training sets are shared.
    std::vector<std::size_t> series_panel;
    std::map<std::pair<int, double>, std::vector<std::size_t>> by_set;
    std::vector<UncertaintySet> sets;
    for (std::size_t p = 0; p < panels.size(); ++p)
        for (Algorithm algorithm : config.algorithms) {
            const UncertaintySet set = training_set(panels[p].panel, algorithm);
            SeriesResult series;
            series.panel = panels[p].panel;
            series.algorithm = algorithm;
            series.trained_with = set;
            const std::pair<int, double> key{static_cast<int>(set.kind), set.radius};
            if (!by_set.contains(key)) sets.push_back(set);
            by_set[key].push_back(result.series.size());
            result.series.push_back(std::move(series));
            series_panel.push_back(p);
        }

    std::vector<Job> jobs;
    for (const UncertaintySet& set : sets)
        for (std::uint64_t seed : config.seeds)
            jobs.push_back({set, seed, by_set[{static_cast<int>(set.kind), set.radius}]});

    struct Outcome {
        std::vector<std::vector<SeedRow>> rows;
        std::string error;
    };
    std::vector<Outcome> outcomes(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            try {
                outcomes[j].rows = run_job(config, jobs[j], panels, series_panel);
            } catch (const std::exception& e) {
                outcomes[j].error = e.what();
            }
        }
    };
    std::size_t threads = config.threads ? config.threads : std::thread::hardware_concurrency();
    threads = std::clamp<std::size_t>(threads, 1, jobs.size());
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Single-threaded reduce in job order, so output never depends on scheduling.
    std::size_t failures = 0;
    std::string first_error;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const Job& job = jobs[j];
        if (!outcomes[j].error.empty()) {
            ++failures;
            if (first_error.empty()) first_error = outcomes[j].error;
            for (std::size_t s : job.series) result.series[s].failed_seeds.push_back(job.seed);
            continue;
        }
        for (std::size_t i = 0; i < job.series.size(); ++i)
            result.series[job.series[i]].seeds.push_back(std::move(outcomes[j].rows[i]));
    }
    if (failures == jobs.size())
        throw std::runtime_error("every seed failed; first error: " + first_error);

    for (auto& series : result.series) series.aggregate = aggregate_rows(series.seeds);
    result.held_snapshots =
        config.planner && config.regret_mode == RegretMode::cadence && config.cadence > 1;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

// Output ------------------------------------------------------------------------------

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
}

} // namespace

void write_experiment(const ExperimentConfig& config, const ExperimentResult& result) {
    const auto& root = config.out_dir;
    std::filesystem::create_directories(root);

    json series_meta = json::array();
    for (const auto& series : result.series) {
        const auto dir = root / series.panel.name() / to_string(series.algorithm);
        for (const auto& rows : series.seeds)
            write_file(dir / ("seed_" + std::to_string(rows.front().seed) + ".csv"),
                       format_seed_csv(rows));
        write_file(dir / "aggregate.csv", format_aggregate_csv(series.aggregate));
        series_meta.push_back({{"panel", series.panel.name()},
                               {"algorithm", to_string(series.algorithm)},
                               {"trained_with",
                                {{"kind", to_string(series.trained_with.kind)},
                                 {"radius", series.trained_with.radius}}},
                               {"seeds", series.seeds.size()},
                               {"failed_seeds", series.failed_seeds}});
    }

    json clipped_rows = json::object();
    for (const Panel& panel : config.panels)
        clipped_rows[panel.name()] = evaluation_kernel(config, panel).clipped_rows;

    const bool s_rect = std::any_of(config.panels.begin(), config.panels.end(), [](const Panel& p) {
        return p.robust.kind == UncertaintyKind::l1_s;
    });
    json metadata = {
        {"software_version", kSoftwareVersion},
        {"csv_schema_version", kCsvSchemaVersion},
        {"config_schema_version", kConfigSchemaVersion},
        {"config_hash", config_hash(config.source)},
        {"config", config.source},
        {"environment", config.environment.type == EnvironmentConfig::Type::gridworld
                            ? "gridworld"
                            : "hard_mdp"},
        {"layout_source", config.environment.layout_source},
        {"evaluation_kernel", to_string(config.eval_kernel)},
        {"flags",
         {{"perturbation_transfer", "intended-to-opposite-direction"},
          {"slip_split", "three-way"},
          {"reward", "occupancy of a reward cell"},
          {"unvisited_transition_estimate", "uniform"},
          {"mirror_sign", config.mirror_sign == MirrorSign::ascent ? "ascent" : "descent"},
          {"bonus_scale",
           {{"l1_sa", config.bonus_scale_for(UncertaintyKind::l1_sa)},
            {"l1_s", config.bonus_scale_for(UncertaintyKind::l1_s)},
            {"kl", config.bonus_scale_for(UncertaintyKind::kl)}}},
          {"kl_min_prob", config.kl_min_prob ? json(*config.kl_min_prob) : json("oracle")},
          {"failure_prob", config.failure_prob ? json(*config.failure_prob) : json("1/H")},
          {"l1s_method", config.l1s_method == L1sMethod::level_set ? "level_set" : "subgradient"},
          {"regret_reference_s_rect_decoupled", s_rect},
          {"held_snapshots", result.held_snapshots},
          {"perturbation_clipped", result.clipped}}},
        {"clipped_rows", clipped_rows},
        {"series", series_meta},
        {"wall_seconds", result.wall_seconds},
    };
    write_file(root / "metadata.json", metadata.dump(2) + "\n");

    if (!config.plot) return;
    std::vector<PlotPanel> returns;
    std::vector<PlotPanel> regrets;
    for (const Panel& panel : config.panels) {
        PlotPanel r{panel.name(), {}};
        PlotPanel g{panel.name(), {}};
        for (const auto& series : result.series) {
            if (series.panel.name() != panel.name() || series.aggregate.empty()) continue;
            r.series.push_back(
                series_from_aggregate(to_string(series.algorithm), series.aggregate, PlotQuantity::eval_return));
            if (config.planner)
                g.series.push_back(series_from_aggregate(to_string(series.algorithm), series.aggregate,
                                                         PlotQuantity::cumulative_regret));
        }
        returns.push_back(std::move(r));
        regrets.push_back(std::move(g));
    }
    write_file(root / "plot.svg", render_svg(returns));
    if (config.planner) {
        PlotOptions options;
        options.y_label = "cumulative regret";
        write_file(root / "regret.svg", render_svg(regrets, options));
    }
}

} // namespace ropo
