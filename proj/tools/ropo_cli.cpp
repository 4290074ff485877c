// Command-line front end: solve-inner, plan, train, experiment, plot.

#include "ropo/harness.hpp"
#include "ropo/inner_io.hpp"
#include "ropo/planner.hpp"
#include "ropo/plot.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace ropo;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& common) {
    app->add_option("--config", common.config, "JSON experiment config");
    app->add_option("--seed", common.seed, "Run this single seed instead of the configured list");
    app->add_option("--out-dir", common.out_dir, "Output directory");
    app->add_option("--override", common.overrides, "Dotted key=value applied to the config")
        ->take_all();
}

ExperimentConfig resolve_config(const Common& common) {
    std::vector<std::string> overrides = common.overrides;
    if (common.seed) overrides.push_back("seeds=[" + std::to_string(*common.seed) + "]");
    if (!common.out_dir.empty()) overrides.push_back("output.dir=\"" + common.out_dir + "\"");
    if (!common.config.empty()) return load_experiment_config(common.config, overrides);
    nlohmann::json doc = default_experiment_document();
    for (const auto& o : overrides) apply_override(doc, o);
    return parse_experiment_config(doc);
}

int solve_inner(const std::string& path, const std::string& kind, double radius,
                const std::vector<double>& nominal, const std::vector<double>& value) {
    InnerProblemText text;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open '" + path + "'");
        text = parse_inner_problem(in);
    } else {
        std::ostringstream doc;
        doc << "kind " << kind << "\nradius " << format_double(radius) << "\nvalue";
        for (double v : value) doc << ' ' << format_double(v);
        doc << "\nnominal";
        for (double p : nominal) doc << ' ' << format_double(p);
        doc << '\n';
        std::istringstream in(doc.str());
        text = parse_inner_problem(in);
    }
    const auto result = solve_dispatch(text.set, text.problem(), text.l1s);
    std::cout << format_inner_result(result);
    return 0;
}

int plan(const Common& common) {
    const ExperimentConfig config = resolve_config(common);
    const Panel& panel = config.panels.front();
    const RobustMdpSpec spec = build_environment(config.environment, panel.robust);
    const bool surrogate = spec.uncertainty.kind == UncertaintyKind::l1_s && !spec.uncertainty.is_nominal();
    const PlanResult result = robust_value_iteration(surrogate ? decoupled_s_rect_surrogate(spec) : spec);

    std::ostringstream out;
    out << "# robust value iteration, " << to_string(panel.robust.kind) << " radius "
        << format_double(panel.robust.radius) << (surrogate ? " (decoupled surrogate)" : "") << "\n";
    out << "# V*_1(s0) = " << format_double(result.values.value(0, spec.initial_state)) << "\n";
    out << "h,state,value,greedy_action\n";
    for (std::size_t h = 0; h < spec.shape.horizon; ++h)
        for (std::size_t s = 0; s < spec.shape.states; ++s) {
            std::size_t greedy = 0;
            for (std::size_t a = 0; a < spec.shape.actions; ++a)
                if (result.policy.prob(h, s, a) > 0.5) greedy = a;
            out << h << ',' << s << ',' << format_double(result.values.value(h, s)) << ',' << greedy
                << '\n';
        }
    if (common.out_dir.empty()) {
        std::cout << out.str();
    } else {
        fs::create_directories(common.out_dir);
        std::ofstream(fs::path(common.out_dir) / "plan.csv", std::ios::binary) << out.str();
        std::cout << "V*_1(s0) = " << format_double(result.values.value(0, spec.initial_state))
                  << "\nwrote " << (fs::path(common.out_dir) / "plan.csv").string() << "\n";
    }
    return 0;
}

void report(const ExperimentConfig& config, const ExperimentResult& result) {
    for (const auto& series : result.series) {
        if (series.aggregate.empty()) continue;
        const auto& last = series.aggregate.back();
        std::printf("%-14s %-10s seeds=%zu  eval_return(K)=%.4f +- %.4f  cumulative_regret(K)=%.4f\n",
                    series.panel.name().c_str(), to_string(series.algorithm), series.seeds.size(),
                    last.eval_return_mean, last.eval_return_std, last.cumulative_regret_mean);
        for (auto seed : series.failed_seeds)
            std::printf("  seed %llu failed\n", static_cast<unsigned long long>(seed));
    }
    std::printf("wrote %s (%.1fs)\n", config.out_dir.string().c_str(), result.wall_seconds);
}

int train(const Common& common, const std::string& algorithm) {
    ExperimentConfig config = resolve_config(common);
    config.panels.resize(1);
    config.algorithms = {algorithm == "nonrobust" ? Algorithm::nonrobust : Algorithm::ropo};
    if (algorithm != "ropo" && algorithm != "nonrobust")
        throw ConfigError("unknown algorithm '" + algorithm + "'");
    if (!common.seed) config.seeds.resize(1);
    const ExperimentResult result = run_experiment(config);
    write_experiment(config, result);
    report(config, result);
    return 0;
}

int experiment(const Common& common) {
    const ExperimentConfig config = resolve_config(common);
    const ExperimentResult result = run_experiment(config);
    write_experiment(config, result);
    report(config, result);
    return 0;
}

/// Inputs are "label=path" aggregate CSVs or experiment directories.
int plot(const std::vector<std::string>& inputs, const std::string& out, const std::string& quantity_name) {
    const PlotQuantity quantity = plot_quantity_from_string(quantity_name);
    std::vector<PlotPanel> panels;
    PlotPanel loose{"", {}};
    for (const auto& input : inputs) {
        const auto eq = input.find('=');
        const std::string label = eq == std::string::npos ? "" : input.substr(0, eq);
        const fs::path path = eq == std::string::npos ? input : input.substr(eq + 1);
        auto read = [](const fs::path& file) {
            std::ifstream in(file);
            if (!in) throw ConfigError("cannot open '" + file.string() + "'");
            return parse_aggregate_csv(in);
        };
        if (fs::is_directory(path)) {
            std::vector<fs::path> panel_dirs;
            for (const auto& entry : fs::directory_iterator(path))
                if (entry.is_directory()) panel_dirs.push_back(entry.path());
            std::sort(panel_dirs.begin(), panel_dirs.end());
            for (const auto& dir : panel_dirs) {
                PlotPanel panel{dir.filename().string(), {}};
                std::vector<fs::path> algos;
                for (const auto& entry : fs::directory_iterator(dir))
                    if (fs::exists(entry.path() / "aggregate.csv")) algos.push_back(entry.path());
                std::sort(algos.begin(), algos.end());
                for (const auto& a : algos)
                    panel.series.push_back(
                        series_from_aggregate(a.filename().string(), read(a / "aggregate.csv"), quantity));
                if (!panel.series.empty()) panels.push_back(std::move(panel));
            }
        } else {
            loose.series.push_back(
                series_from_aggregate(label.empty() ? path.stem().string() : label, read(path), quantity));
        }
    }
    if (!loose.series.empty()) panels.push_back(std::move(loose));
    PlotOptions options;
    if (quantity == PlotQuantity::cumulative_regret) options.y_label = "cumulative regret";
    else if (quantity == PlotQuantity::robust_value) options.y_label = "robust value";
    else if (quantity == PlotQuantity::v_hat) options.y_label = "optimistic value";
    const std::string svg = render_svg(panels, options);
    if (out.empty()) {
        std::cout << svg;
    } else {
        if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
        std::ofstream(out, std::ios::binary) << svg;
    }
    return 0;
}

int fail(const char* category, const std::string& message) {
    std::cerr << "error[" << category << "]: " << message << "\n";
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust optimistic policy optimization for tabular robust MDPs"};
    app.require_subcommand(1);

    std::string inner_path, inner_kind = "l1_sa";
    double inner_radius = 0.0;
    std::vector<double> inner_nominal, inner_value;
    auto* solve = app.add_subcommand("solve-inner", "Solve one worst-case expectation problem");
    solve->add_option("file", inner_path, "Problem file (see README)");
    solve->add_option("--kind", inner_kind, "l1_sa, l1_s or kl (flag form)");
    solve->add_option("--radius", inner_radius, "Radius (flag form)");
    solve->add_option("--nominal", inner_nominal, "Nominal distribution (flag form)")->delimiter(',');
    solve->add_option("--value", inner_value, "Next-state values (flag form)")->delimiter(',');

    Common plan_opts, train_opts, exp_opts;
    auto* plan_cmd = app.add_subcommand("plan", "Robust value iteration on the configured environment");
    add_common(plan_cmd, plan_opts);

    std::string algorithm = "ropo";
    auto* train_cmd = app.add_subcommand("train", "Single learner run");
    add_common(train_cmd, train_opts);
    train_cmd->add_option("--algorithm", algorithm, "ropo or nonrobust");

    auto* exp_cmd = app.add_subcommand("experiment", "Full experiment grid");
    add_common(exp_cmd, exp_opts);

    std::vector<std::string> plot_inputs;
    std::string plot_out, quantity = "eval_return";
    auto* plot_cmd = app.add_subcommand("plot", "Render aggregate CSVs as SVG");
    plot_cmd->add_option("inputs", plot_inputs, "label=aggregate.csv or an experiment directory")
        ->required();
    plot_cmd->add_option("--out", plot_out, "SVG file (stdout when omitted)");
    plot_cmd->add_option("--quantity", quantity, "eval_return, cumulative_regret, robust_value or v_hat");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*solve) return solve_inner(inner_path, inner_kind, inner_radius, inner_nominal, inner_value);
        if (*plan_cmd) return plan(plan_opts);
        if (*train_cmd) return train(train_opts, algorithm);
        if (*exp_cmd) return experiment(exp_opts);
        if (*plot_cmd) return plot(plot_inputs, plot_out, quantity);
    } catch (const ParseError& e) {
        return fail("parse", e.what());
    } catch (const ConfigError& e) {
        return fail("config", e.what());
    } catch (const DomainError& e) {
        return fail("domain", e.what());
    } catch (const UnsupportedError& e) {
        return fail("unsupported", e.what());
    } catch (const std::exception& e) {
        return fail("runtime", e.what());
    }
    return 0;
}
