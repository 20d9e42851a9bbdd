#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "subabsorb/analysis.hpp"
#include "subabsorb/errors.hpp"
#include "subabsorb/harness.hpp"
#include "subabsorb/io.hpp"

namespace sa = subabsorb;
namespace fs = std::filesystem;

namespace {

constexpr int kExitFit = 2;
constexpr int kExitConfig = 3;

sa::ExperimentRecipe load_recipe(const std::string& target)
{
    const fs::path path(target);
    if (path.extension() == ".json" || fs::is_regular_file(path)) {
        std::ifstream in(path);
        if (!in) {
            throw sa::ConfigError("cannot open " + target);
        }
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw sa::ConfigError(target + ": " + e.what());
        }
        return sa::recipe_from_json(j);
    }
    return sa::find_recipe(target);
}

void print_rows(const sa::SweepResult& result)
{
    std::cout << "series_value  swept_value  sigma_ss  tau/2tau_a  err\n";
    for (const auto& row : result.rows) {
        std::printf("%-12.4g  %-11.4g  %-8.4g  %-10.5f  %.5f\n", row.series_value, row.swept_value, row.sigma_ss,
                    row.tau_over_2tau_a, row.tau_err_over_2tau_a);
    }
    std::cout << "wrote " << result.output_dir.string() << "/summary.csv\n";
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Absorption rise-time simulations: Maxwell-Bloch and coupled-dipole models"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a catalog recipe or a JSON configuration");
    std::string target;
    std::optional<std::uint64_t> seed;
    std::optional<int> realizations;
    int threads = 1;
    std::string out_dir;
    bool summary_only = false;
    run->add_option("recipe", target, "Recipe name or path to a config .json")->required();
    run->add_option("--seed", seed, "Base seed for position sampling");
    run->add_option("--realizations", realizations, "Disorder realizations per point")->check(CLI::PositiveNumber);
    run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "Output directory (default $SUBABSORB_OUT_DIR or ./out, plus the recipe name)");
    run->add_flag("--summary-only", summary_only, "Write only summary.csv and manifest.json");

    auto* list = app.add_subcommand("list", "Print the recipe catalog");

    auto* fit = app.add_subcommand("fit", "Fit the rise-time of a trace CSV (t_ns, I_input, I_output[, u_input, u_output])");
    std::string trace_path;
    std::optional<double> sigma_ss;
    int resamples = 10000;
    std::uint64_t fit_seed = 1;
    fit->add_option("trace", trace_path, "Trace CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--sigma-ss", sigma_ss, "Steady-state optical depth estimate (default: tail mean)");
    fit->add_option("--resamples", resamples, "Monte-Carlo resamples when the trace has uncertainties");
    fit->add_option("--seed", fit_seed, "Monte-Carlo seed");
    fit->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            for (const auto& r : sa::recipe_catalog()) {
                std::printf("%-26s %s\n", r.name.c_str(), r.description.c_str());
            }
            return 0;
        }
        if (run->parsed()) {
            sa::ExperimentRecipe recipe = load_recipe(target);
            if (seed) {
                recipe.ensemble.seed = *seed;
            }
            if (realizations) {
                recipe.ensemble.realization_count = *realizations;
            }
            const char* env = std::getenv("SUBABSORB_OUT_DIR");
            if (!out_dir.empty()) {
                recipe.output_dir = fs::path(out_dir) / recipe.name;
            } else if (env && *env) {
                recipe.output_dir = fs::path(env) / recipe.name;
            } else if (recipe.output_dir.empty()) {
                recipe.output_dir = fs::path("out") / recipe.name;
            }
            sa::RunOptions options;
            options.threads = threads;
            options.summary_only = summary_only;
            print_rows(sa::run_recipe(recipe, options));
            return 0;
        }
        if (fit->parsed()) {
            const sa::CountTrace counts = sa::read_trace_csv(trace_path);
            const sa::OpticalDepthTrace od = sa::optical_depth_trace(counts);
            const double estimate = sigma_ss ? *sigma_ss : sa::estimate_steady_state(od);
            const sa::RiseTimeFit result = sa::fit_rise_time(od, estimate);
            double tau_err = 0.0;
            if (od.has_uncertainty()) {
                tau_err = sa::monte_carlo_uncertainty(od, estimate, resamples, fit_seed, {}, threads).tau_std;
            }
            std::cout << sa::fit_record(result, tau_err, fit_seed).dump(2) << '\n';
            if (result.bound_saturated) {
                std::cerr << "warning: fit parameters sit on their bounds\n";
            }
            return 0;
        }
    } catch (const sa::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const sa::FitError& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return kExitFit;
    } catch (const sa::DegenerateTraceError& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return kExitFit;
    } catch (const sa::UncertaintyUnreliableError& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return kExitFit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
