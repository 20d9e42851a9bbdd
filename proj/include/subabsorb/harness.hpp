#pragma once

// Named experiment recipes: parameter sweeps over either solver, rise-time
// fits per sweep point, and CSV/JSON output with provenance.
//
// Recipes hold natural units (lengths in lambda_a, rates in Gamma_a). JSON
// configuration files use SI units; see docs/config_schema.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "subabsorb/analysis.hpp"
#include "subabsorb/coupled_dipole.hpp"
#include "subabsorb/core.hpp"
#include "subabsorb/maxwell_bloch.hpp"

namespace subabsorb {

enum class ModelKind { MaxwellBloch, CoupledDipole };
enum class SweptParameter { SigmaSS, BoxSide, Beta, Detuning };

struct ExperimentRecipe {
    std::string name;
    std::string description;
    ModelKind model = ModelKind::MaxwellBloch;
    SweptParameter swept = SweptParameter::SigmaSS;
    /// sigma_ss, cube side (lambda_a), beta/2pi (Hz cm^3) or detuning (Gamma_a).
    std::vector<double> sweep_values;
    /// Coupled-dipole only: beta/2pi values evaluated at every sweep point on
    /// the same realizations. Empty means the ensemble's own beta.
    std::vector<double> beta_series;

    AtomicSpecies species;
    EnsembleConfig ensemble;
    CouplingMode coupling = CouplingMode::Vectorial;
    double dipole_amplitude = 1e-4;

    PulseShape pulse;
    /// Maxwell-Bloch optical depth when it is not the swept parameter.
    double sigma_ss = 0.5;
    GridSpec grid;
    bool dump_grid = false;

    FitOptions fit;
    std::filesystem::path output_dir;

    /// Throws ConfigError.
    void validate() const;
};

struct SweepRow {
    /// beta/2pi for coupled-dipole rows, 0 for Maxwell-Bloch rows.
    double series_value = 0.0;
    double swept_value = 0.0;
    double sigma_ss = 0.0;
    double tau_over_2tau_a = 0.0;
    double tau_err_over_2tau_a = 0.0;
    double residual_rms = 0.0;
    std::uint64_t seed = 0;
    int realizations = 1;
    /// Any contributing fit ended on a parameter bound.
    bool bound_saturated = false;
};

struct SweepResult {
    std::string recipe;
    std::vector<SweepRow> rows;
    bool complete = false;
    std::string error;
    std::string git_hash;
    std::string config_hash;
    std::string timestamp;
    std::filesystem::path output_dir;
};

struct RunOptions {
    int threads = 1;
    /// Skips per-point trace files; the summary and manifest are still written.
    bool summary_only = false;
};

/// Executes every sweep point, fits rise-times and writes
///   <output_dir>/summary.csv, manifest.json and points/...
/// On a failure the completed rows are flushed, the manifest is marked
/// incomplete and the first error (lowest sweep index) is rethrown.
SweepResult run_recipe(const ExperimentRecipe& recipe, const RunOptions& options = {});

std::vector<ExperimentRecipe> recipe_catalog();
/// Throws ConfigError for an unknown name.
ExperimentRecipe find_recipe(const std::string& name);

/// 20 log-spaced optical depths on [0.02, 2].
std::vector<double> default_optical_depth_grid();
/// beta/2pi values (Hz cm^3) of the dephasing comparison.
std::vector<double> default_beta_series();

ExperimentRecipe recipe_from_json(const nlohmann::json& config);
nlohmann::json recipe_to_json(const ExperimentRecipe& recipe);
/// Hex FNV-1a of the canonical JSON form.
std::string config_hash(const ExperimentRecipe& recipe);

std::string git_hash();

}  // namespace subabsorb
