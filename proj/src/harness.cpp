#include "subabsorb/harness.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <set>

#include "subabsorb/errors.hpp"
#include "subabsorb/io.hpp"
#include "subabsorb/parallel.hpp"

#ifndef SUBABSORB_GIT_HASH
#define SUBABSORB_GIT_HASH "unknown"
#endif

namespace subabsorb {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* model_name(ModelKind m)
{
    return m == ModelKind::MaxwellBloch ? "maxwell_bloch" : "coupled_dipole";
}

const char* swept_name(SweptParameter p)
{
    switch (p) {
    case SweptParameter::SigmaSS: return "sigma_ss";
    case SweptParameter::BoxSide: return "box_side";
    case SweptParameter::Beta: return "beta";
    case SweptParameter::Detuning: return "detuning";
    }
    return "?";
}

// Units of the swept column in summary.csv (natural units).
const char* swept_unit(SweptParameter p)
{
    switch (p) {
    case SweptParameter::SigmaSS: return "dimensionless";
    case SweptParameter::BoxSide: return "lambda_a";
    case SweptParameter::Beta: return "Hz cm^3";
    case SweptParameter::Detuning: return "Gamma_a";
    }
    return "?";
}

template <class E>
E parse_enum(const std::string& text, std::initializer_list<std::pair<const char*, E>> table, const char* what)
{
    for (const auto& [name, value] : table) {
        if (text == name) {
            return value;
        }
    }
    throw ConfigError(std::string("unknown ") + what + " '" + text + "'");
}

void check_monotone(const std::vector<double>& v, const char* what)
{
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw ConfigError(std::string(what) + " contains a non-finite value");
        }
    }
    if (v.size() < 2) {
        return;
    }
    const bool up = v[1] > v[0];
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (up ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1])) {
            throw ConfigError(std::string(what) + " must be strictly monotone");
        }
    }
}

std::string hex64(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string utc_timestamp()
{
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string point_dir(std::size_t index, std::size_t series)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "p%03zu_s%02zu", index, series);
    return buf;
}

struct PointResult {
    // Indexed by series position.
    std::vector<SweepRow> rows;
};

// ---- Maxwell-Bloch sweep point ----------------------------------------------

PointResult run_mb_point(const ExperimentRecipe& r, std::size_t index, const fs::path& out, bool write_files)
{
    const double v = r.sweep_values[index];
    MaxwellBlochConfig config;
    config.pulse = r.pulse;
    config.medium.sigma_ss = r.swept == SweptParameter::SigmaSS ? v : r.sigma_ss;
    if (r.swept == SweptParameter::Detuning) {
        config.pulse.detuning = v;
    }
    config.grid = r.grid;

    TransmissionTrace trace;
    std::optional<FieldGrid> grid;
    if (r.dump_grid) {
        grid = propagate_pulse(config.pulse, config.medium, config.grid);
        trace.t = grid->t;
        trace.input.resize(grid->nt());
        trace.output.resize(grid->nt());
        const auto in = grid->rabi_at(0);
        const auto last = grid->rabi_at(grid->nz() - 1);
        for (std::size_t k = 0; k < grid->nt(); ++k) {
            trace.input[k] = std::norm(in[k]);
            trace.output[k] = std::norm(last[k]);
        }
    } else {
        trace = simulate_transmission(config);
    }

    const OpticalDepthTrace od = optical_depth_trace(trace, r.fit.window);
    const double estimate = detuned_steady_optical_depth(config.medium.sigma_ss, config.pulse.detuning);
    const RiseTimeFit fit = fit_rise_time(od, estimate, r.fit);

    SweepRow row;
    row.swept_value = v;
    row.sigma_ss = config.medium.sigma_ss;
    row.tau_over_2tau_a = fit.tau / 2.0;
    row.residual_rms = fit.residual_rms;
    row.seed = r.ensemble.seed;
    row.bound_saturated = fit.bound_saturated;

    if (write_files) {
        const fs::path dir = out / "points" / point_dir(index, 0);
        write_trace_csv(dir / "trace.csv", trace, r.species);
        write_json(dir / "fit.json", fit_record(fit, 0.0, r.ensemble.seed, r.species));
        if (grid) {
            write_grid_dump(dir / "grid.bin", *grid);
            const auto rho_in = grid->rho01_at(0);
            const auto rho_out = grid->rho01_at(grid->nz() - 1);
            std::ofstream csv(dir / "profile.csv");
            csv << "t_ns,sigma,abs_rho01_entrance,abs_rho01_exit\n";
            for (std::size_t k = 0; k < grid->nt(); ++k) {
                csv << format_double(r.species.to_ns(grid->t[k])) << ',' << format_double(od.sigma[k]) << ','
                    << format_double(std::abs(rho_in[k])) << ',' << format_double(std::abs(rho_out[k])) << '\n';
            }
        }
    }
    return {{row}};
}

// ---- Coupled-dipole sweep point ----------------------------------------------

std::vector<double> betas_for(const ExperimentRecipe& r)
{
    if (r.swept == SweptParameter::Beta) {
        return r.sweep_values;
    }
    if (!r.beta_series.empty()) {
        return r.beta_series;
    }
    return {r.ensemble.beta_over_2pi};
}

PointResult run_cd_point(const ExperimentRecipe& r, std::size_t index, int threads, const fs::path& out,
                         bool write_files)
{
    CoupledDipoleConfig config;
    config.ensemble = r.ensemble;
    config.mode = r.coupling;
    config.amplitude = r.dipole_amplitude;
    config.threads = threads;
    if (r.swept != SweptParameter::Beta) {
        const double v = r.sweep_values[index];
        const double side = r.swept == SweptParameter::BoxSide ? v : cube_side_for_optical_depth(r.ensemble.atom_count, v);
        config.ensemble.box = {side, side, side};
    }
    config.ensemble.validate();

    const std::vector<double> betas = betas_for(r);
    const double density_cm3 = r.species.density_per_cm3(config.ensemble.density());
    std::vector<double> gammas;
    for (double b : betas) {
        gammas.push_back(gamma_dd_from_beta(b, density_cm3, r.species));
    }
    const double sigma_ss = optical_depth_from_geometry(config.ensemble).sigma_ss;
    const std::vector<EnsembleResult> results = run_ensemble_series(config, gammas);

    PointResult point;
    for (std::size_t b = 0; b < betas.size(); ++b) {
        const EnsembleResult& res = results[b];
        std::vector<double> taus;
        double residual = 0.0;
        bool saturated = false;
        json sidecar = json::array();
        for (const RealizationRun& run : res.runs) {
            const RiseTimeFit fit = fit_rise_time(optical_depth_from_dipole(run.trace, sigma_ss), sigma_ss, r.fit);
            taus.push_back(fit.tau);
            residual += fit.residual_rms;
            saturated = saturated || fit.bound_saturated;
            if (write_files) {
                sidecar.push_back({
                    {"seed", run.seed},
                    {"positions_hash", hex64(run.positions_hash)},
                    {"min_pair_distance_lambda", run.min_pair_distance},
                    {"sigma_ss", sigma_ss},
                    {"gamma_dd_over_gamma_a", res.gamma_dd},
                    {"fit", fit_record(fit, 0.0, run.seed, r.species)},
                });
            }
        }
        const double m = static_cast<double>(taus.size());
        const double mean = std::accumulate(taus.begin(), taus.end(), 0.0) / m;
        double var = 0.0;
        for (double t : taus) {
            var += (t - mean) * (t - mean);
        }
        const double se = taus.size() > 1 ? std::sqrt(var / (m - 1.0) / m) : 0.0;

        SweepRow row;
        row.series_value = betas[b];
        row.swept_value = r.swept == SweptParameter::Beta ? betas[b] : r.sweep_values[index];
        row.sigma_ss = sigma_ss;
        row.tau_over_2tau_a = mean / 2.0;
        row.tau_err_over_2tau_a = se / 2.0;
        row.residual_rms = residual / m;
        row.seed = r.ensemble.seed;
        row.realizations = static_cast<int>(taus.size());
        row.bound_saturated = saturated;
        point.rows.push_back(row);

        if (write_files) {
            const fs::path dir = out / "points" / point_dir(index, b);
            write_ensemble_csv(dir / "aggregate.csv", res, r.species);
            for (const RealizationRun& run : res.runs) {
                write_dipole_csv(dir / ("realization_" + std::to_string(run.seed) + ".csv"), run.trace, r.species);
            }
            write_json(dir / "realizations.json", sidecar);
        }
    }
    return point;
}

void write_summary(const fs::path& path, const std::vector<SweepRow>& rows, const std::string& hash)
{
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string());
    }
    out << "series_value,swept_value,sigma_ss,tau_over_2tau_a,tau_err_over_2tau_a,residual_rms,seed,realizations,"
           "bound_saturated,config_hash\n";
    for (const SweepRow& row : rows) {
        out << format_double(row.series_value) << ',' << format_double(row.swept_value) << ','
            << format_double(row.sigma_ss) << ',' << format_double(row.tau_over_2tau_a) << ','
            << format_double(row.tau_err_over_2tau_a) << ',' << format_double(row.residual_rms) << ',' << row.seed
            << ',' << row.realizations << ',' << (row.bound_saturated ? 1 : 0) << ',' << hash << '\n';
    }
}

// Series-major order: all sweep points of the first beta, then the next.
std::vector<SweepRow> assemble(const std::vector<std::optional<PointResult>>& points, std::size_t series)
{
    std::vector<SweepRow> rows;
    for (std::size_t b = 0; b < series; ++b) {
        for (const auto& p : points) {
            if (p && b < p->rows.size()) {
                rows.push_back(p->rows[b]);
            }
        }
    }
    return rows;
}

double get_number(const json& j, const char* key, double fallback)
{
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where)
{
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) {
            throw ConfigError(std::string("unknown key '") + item.key() + "' in " + where);
        }
    }
}

std::vector<double> log_space(double lo, double hi, int n)
{
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) {
        v[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    }
    return v;
}

}  // namespace

// ---- Recipe -------------------------------------------------------------------

void ExperimentRecipe::validate() const
{
    if (name.empty()) {
        throw ConfigError("recipe needs a name");
    }
    if (sweep_values.empty()) {
        throw ConfigError(name + ": sweep_values must not be empty");
    }
    check_monotone(sweep_values, "sweep_values");
    check_monotone(beta_series, "beta_series");
    try {
        species.validate();
        pulse.validate();
    } catch (const DomainError& e) {
        throw ConfigError(name + ": " + e.what());
    }
    if (!(fit.window.end > fit.window.start) || fit.window.start < 0.0) {
        throw ConfigError(name + ": invalid fit window");
    }
    if (model == ModelKind::MaxwellBloch) {
        if (swept != SweptParameter::SigmaSS && swept != SweptParameter::Detuning) {
            throw ConfigError(name + ": maxwell_bloch sweeps sigma_ss or detuning");
        }
        if (!beta_series.empty()) {
            throw ConfigError(name + ": beta_series needs the coupled_dipole model");
        }
        if (swept == SweptParameter::SigmaSS) {
            for (double v : sweep_values) {
                if (!(v > 0.0)) {
                    throw ConfigError(name + ": sigma_ss values must be positive");
                }
            }
        } else if (!(sigma_ss > 0.0)) {
            throw ConfigError(name + ": sigma_ss must be positive");
        }
        if (!(grid.time_step > 0.0) || !(grid.duration >= fit.window.end)) {
            throw ConfigError(name + ": grid must cover the fit window");
        }
        return;
    }
    if (swept == SweptParameter::Detuning) {
        throw ConfigError(name + ": detuning sweeps need the maxwell_bloch model (the collective solver is resonant)");
    }
    if (swept == SweptParameter::Beta && !beta_series.empty()) {
        throw ConfigError(name + ": beta cannot be both swept and a series");
    }
    for (double v : sweep_values) {
        if (!(v > 0.0) && swept != SweptParameter::Beta) {
            throw ConfigError(name + ": sweep values must be positive");
        }
        if (swept == SweptParameter::Beta && v < 0.0) {
            throw ConfigError(name + ": beta must be non-negative");
        }
    }
    for (double b : beta_series) {
        if (b < 0.0) {
            throw ConfigError(name + ": beta must be non-negative");
        }
    }
    if (!(dipole_amplitude > 0.0)) {
        throw ConfigError(name + ": dipole drive amplitude must be positive");
    }
    ensemble.validate();
}

std::vector<double> default_optical_depth_grid()
{
    return log_space(0.02, 2.0, 20);
}

std::vector<double> default_beta_series()
{
    return {0.0, 9e-7, 2.8e-6, 9e-6, 2.8e-5, 9e-5};
}

std::vector<ExperimentRecipe> recipe_catalog()
{
    std::vector<ExperimentRecipe> out;

    ExperimentRecipe mb;
    mb.model = ModelKind::MaxwellBloch;
    mb.pulse.kind = PulseKind::SmoothRamp;

    ExperimentRecipe cd;
    cd.model = ModelKind::CoupledDipole;
    cd.swept = SweptParameter::SigmaSS;
    cd.sweep_values = default_optical_depth_grid();

    {
        ExperimentRecipe r = mb;
        r.name = "fig4a_mb";
        r.description = "Non-interacting gas: rise-time vs steady-state optical depth";
        r.swept = SweptParameter::SigmaSS;
        r.sweep_values = {0.024, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.87, 1.0, 1.11};
        out.push_back(r);
    }
    {
        ExperimentRecipe r = cd;
        r.name = "fig4b_best_beta";
        r.description = "Coupled dipoles at beta/2pi = 4.9e-5 Hz cm^3 vs optical depth";
        r.ensemble.beta_over_2pi = 4.9e-5;
        out.push_back(r);
    }
    {
        ExperimentRecipe r = cd;
        r.name = "fig6_boxes";
        r.description = "Coupled dipoles, N = 500, shrinking cubes, no dephasing";
        r.swept = SweptParameter::BoxSide;
        r.sweep_values = {50.0, 20.0, 15.0, 12.0};
        out.push_back(r);
    }
    {
        ExperimentRecipe r = cd;
        r.name = "fig7_beta";
        r.description = "Coupled dipoles vs optical depth for a range of dephasing coefficients";
        r.beta_series = default_beta_series();
        out.push_back(r);
    }
    {
        ExperimentRecipe r = mb;
        r.name = "fig8_trace";
        r.description = "Single Maxwell-Bloch run at sigma_ss = 0.5 with a full space-time dump";
        r.swept = SweptParameter::SigmaSS;
        r.sweep_values = {0.5};
        r.dump_grid = true;
        out.push_back(r);
    }
    {
        ExperimentRecipe r = cd;
        r.name = "fig9_scalar_vs_vectorial";
        r.description = "Scalar coupling counterpart of fig7_beta";
        r.coupling = CouplingMode::Scalar;
        r.beta_series = default_beta_series();
        out.push_back(r);
    }
    {
        ExperimentRecipe r = mb;
        r.name = "fig10_detuning";
        r.description = "Optical depth transients at sigma_ss = 0.5 for detunings 0, Gamma/3, Gamma/2";
        r.swept = SweptParameter::Detuning;
        r.sweep_values = {0.0, 1.0 / 3.0, 0.5};
        r.sigma_ss = 0.5;
        out.push_back(r);
    }
    {
        ExperimentRecipe r = mb;
        r.name = "fig11_detuning_sweep";
        r.description = "Rise-time vs detuning at sigma_ss = 1";
        r.swept = SweptParameter::Detuning;
        r.sweep_values.clear();
        for (int i = 0; i <= 10; ++i) {
            r.sweep_values.push_back(i / 10.0);
        }
        r.sigma_ss = 1.0;
        out.push_back(r);
    }
    return out;
}

ExperimentRecipe find_recipe(const std::string& name)
{
    for (auto& r : recipe_catalog()) {
        if (r.name == name) {
            return r;
        }
    }
    throw ConfigError("unknown recipe '" + name + "' (see 'subabsorb list')");
}

// ---- JSON ---------------------------------------------------------------------

ExperimentRecipe recipe_from_json(const json& j)
{
    try {
        if (!j.is_object()) {
            throw ConfigError("configuration must be a JSON object");
        }
        reject_unknown(j,
                       {"name", "description", "model", "swept_parameter", "sweep_values", "beta_series", "species",
                        "ensemble", "coupling", "dipole_rabi_rad_s", "pulse", "sigma_ss", "grid", "dump_grid", "fit",
                        "output_dir"},
                       "configuration");
        ExperimentRecipe r;
        r.name = j.at("name").get<std::string>();
        r.description = j.value("description", std::string{});
        r.model = parse_enum<ModelKind>(j.at("model").get<std::string>(),
                                        {{"maxwell_bloch", ModelKind::MaxwellBloch},
                                         {"coupled_dipole", ModelKind::CoupledDipole}},
                                        "model");
        r.swept = parse_enum<SweptParameter>(j.at("swept_parameter").get<std::string>(),
                                             {{"sigma_ss", SweptParameter::SigmaSS},
                                              {"box_side", SweptParameter::BoxSide},
                                              {"beta", SweptParameter::Beta},
                                              {"detuning", SweptParameter::Detuning}},
                                             "swept_parameter");

        if (j.contains("species")) {
            const json& s = j.at("species");
            reject_unknown(s, {"lifetime_s", "wavelength_m"}, "species");
            r.species.lifetime_s = get_number(s, "lifetime_s", r.species.lifetime_s);
            r.species.wavelength_m = get_number(s, "wavelength_m", r.species.wavelength_m);
            try {
                r.species.validate();
            } catch (const DomainError& e) {
                throw ConfigError(e.what());
            }
        }
        const AtomicSpecies& sp = r.species;

        for (double v : j.at("sweep_values").get<std::vector<double>>()) {
            switch (r.swept) {
            case SweptParameter::BoxSide: v = sp.to_natural_length(v); break;
            case SweptParameter::Detuning: v = sp.to_natural_rate(kTwoPi * v); break;
            default: break;
            }
            r.sweep_values.push_back(v);
        }
        if (j.contains("beta_series")) {
            r.beta_series = j.at("beta_series").get<std::vector<double>>();
        }

        if (j.contains("ensemble")) {
            const json& e = j.at("ensemble");
            reject_unknown(e,
                           {"atom_count", "box_m", "beta_over_2pi_hz_cm3", "min_pair_separation_m", "seed",
                            "realizations"},
                           "ensemble");
            r.ensemble.atom_count = e.value("atom_count", r.ensemble.atom_count);
            if (e.contains("box_m")) {
                const json& b = e.at("box_m");
                if (b.is_number()) {
                    const double a = sp.to_natural_length(b.get<double>());
                    r.ensemble.box = {a, a, a};
                } else {
                    const auto v = b.get<std::vector<double>>();
                    if (v.size() != 3) {
                        throw ConfigError("ensemble.box_m needs one side or three sides");
                    }
                    r.ensemble.box = {sp.to_natural_length(v[0]), sp.to_natural_length(v[1]),
                                      sp.to_natural_length(v[2])};
                }
            }
            r.ensemble.beta_over_2pi = get_number(e, "beta_over_2pi_hz_cm3", r.ensemble.beta_over_2pi);
            if (e.contains("min_pair_separation_m")) {
                r.ensemble.min_pair_separation = sp.to_natural_length(e.at("min_pair_separation_m").get<double>());
            }
            r.ensemble.seed = e.value("seed", r.ensemble.seed);
            r.ensemble.realization_count = e.value("realizations", r.ensemble.realization_count);
        }
        if (j.contains("coupling")) {
            r.coupling = parse_enum<CouplingMode>(j.at("coupling").get<std::string>(),
                                                  {{"vectorial", CouplingMode::Vectorial},
                                                   {"scalar", CouplingMode::Scalar}},
                                                  "coupling");
        }
        if (j.contains("dipole_rabi_rad_s")) {
            r.dipole_amplitude = sp.to_natural_rate(j.at("dipole_rabi_rad_s").get<double>());
        }

        if (j.contains("pulse")) {
            const json& p = j.at("pulse");
            reject_unknown(p, {"kind", "rise_10_90_s", "rabi_rad_s", "detuning_hz"}, "pulse");
            if (p.contains("kind")) {
                r.pulse.kind = parse_enum<PulseKind>(p.at("kind").get<std::string>(),
                                                     {{"step", PulseKind::Step},
                                                      {"smooth_ramp", PulseKind::SmoothRamp}},
                                                     "pulse kind");
            }
            if (p.contains("rise_10_90_s")) {
                r.pulse.rise_10_90 = sp.to_natural_time(p.at("rise_10_90_s").get<double>());
            }
            if (p.contains("rabi_rad_s")) {
                r.pulse.amplitude = sp.to_natural_rate(p.at("rabi_rad_s").get<double>());
            }
            if (p.contains("detuning_hz")) {
                r.pulse.detuning = sp.to_natural_rate(kTwoPi * p.at("detuning_hz").get<double>());
            }
        }
        r.sigma_ss = get_number(j, "sigma_ss", r.sigma_ss);
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            reject_unknown(g, {"duration_s", "time_step_s", "z_steps"}, "grid");
            if (g.contains("duration_s")) {
                r.grid.duration = sp.to_natural_time(g.at("duration_s").get<double>());
            }
            if (g.contains("time_step_s")) {
                r.grid.time_step = sp.to_natural_time(g.at("time_step_s").get<double>());
            }
            r.grid.z_steps = g.value("z_steps", r.grid.z_steps);
        }
        r.dump_grid = j.value("dump_grid", false);
        if (j.contains("fit")) {
            const json& f = j.at("fit");
            reject_unknown(f, {"window_start_s", "window_end_s", "endpoint_slack", "max_iterations"}, "fit");
            if (f.contains("window_start_s")) {
                r.fit.window.start = sp.to_natural_time(f.at("window_start_s").get<double>());
            }
            if (f.contains("window_end_s")) {
                r.fit.window.end = sp.to_natural_time(f.at("window_end_s").get<double>());
            }
            r.fit.endpoint_slack = get_number(f, "endpoint_slack", r.fit.endpoint_slack);
            r.fit.max_iterations = f.value("max_iterations", r.fit.max_iterations);
        }
        if (j.contains("output_dir")) {
            r.output_dir = j.at("output_dir").get<std::string>();
        }
        r.validate();
        return r;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("configuration: ") + e.what());
    }
}

json recipe_to_json(const ExperimentRecipe& r)
{
    const AtomicSpecies& sp = r.species;
    std::vector<double> sweep;
    for (double v : r.sweep_values) {
        switch (r.swept) {
        case SweptParameter::BoxSide: v = sp.to_meters(v); break;
        case SweptParameter::Detuning: v = sp.to_rad_per_s(v) / kTwoPi; break;
        default: break;
        }
        sweep.push_back(v);
    }
    json j = {
        {"name", r.name},
        {"description", r.description},
        {"model", model_name(r.model)},
        {"swept_parameter", swept_name(r.swept)},
        {"sweep_values", sweep},
        {"species", {{"lifetime_s", sp.lifetime_s}, {"wavelength_m", sp.wavelength_m}}},
    };
    if (r.model == ModelKind::CoupledDipole) {
        if (!r.beta_series.empty()) {
            j["beta_series"] = r.beta_series;
        }
        j["ensemble"] = {
            {"atom_count", r.ensemble.atom_count},
            {"box_m", {sp.to_meters(r.ensemble.box.x), sp.to_meters(r.ensemble.box.y), sp.to_meters(r.ensemble.box.z)}},
            {"beta_over_2pi_hz_cm3", r.ensemble.beta_over_2pi},
            {"min_pair_separation_m", sp.to_meters(r.ensemble.min_pair_separation)},
            {"seed", r.ensemble.seed},
            {"realizations", r.ensemble.realization_count},
        };
        j["coupling"] = r.coupling == CouplingMode::Vectorial ? "vectorial" : "scalar";
        j["dipole_rabi_rad_s"] = sp.to_rad_per_s(r.dipole_amplitude);
    } else {
        j["pulse"] = {
            {"kind", r.pulse.kind == PulseKind::Step ? "step" : "smooth_ramp"},
            {"rise_10_90_s", sp.to_seconds(r.pulse.rise_10_90)},
            {"rabi_rad_s", sp.to_rad_per_s(r.pulse.amplitude)},
            {"detuning_hz", sp.to_rad_per_s(r.pulse.detuning) / kTwoPi},
        };
        j["sigma_ss"] = r.sigma_ss;
        j["grid"] = {
            {"duration_s", sp.to_seconds(r.grid.duration)},
            {"time_step_s", sp.to_seconds(r.grid.time_step)},
            {"z_steps", r.grid.z_steps},
        };
        j["dump_grid"] = r.dump_grid;
    }
    j["fit"] = {
        {"window_start_s", sp.to_seconds(r.fit.window.start)},
        {"window_end_s", sp.to_seconds(r.fit.window.end)},
        {"endpoint_slack", r.fit.endpoint_slack},
        {"max_iterations", r.fit.max_iterations},
    };
    return j;
}

std::string config_hash(const ExperimentRecipe& recipe)
{
    const std::string text = recipe_to_json(recipe).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return hex64(h);
}

std::string git_hash()
{
    return SUBABSORB_GIT_HASH;
}

// ---- Runner -------------------------------------------------------------------

SweepResult run_recipe(const ExperimentRecipe& recipe, const RunOptions& options)
{
    recipe.validate();
    SweepResult result;
    result.recipe = recipe.name;
    result.git_hash = git_hash();
    result.config_hash = config_hash(recipe);
    result.timestamp = utc_timestamp();
    result.output_dir = recipe.output_dir.empty() ? fs::path("out") / recipe.name : recipe.output_dir;
    fs::create_directories(result.output_dir);

    const bool cd = recipe.model == ModelKind::CoupledDipole;
    const std::size_t jobs = cd && recipe.swept == SweptParameter::Beta ? 1 : recipe.sweep_values.size();
    const std::size_t series = cd ? betas_for(recipe).size() : 1;
    const int threads = std::max(1, options.threads);
    const int outer = jobs > 1 ? threads : 1;
    const int inner = jobs > 1 ? 1 : threads;
    const bool write_files = !options.summary_only;

    std::vector<std::optional<PointResult>> points(jobs);
    std::vector<std::exception_ptr> errors(jobs);
    parallel_for(jobs, outer, [&](std::size_t i) {
        try {
            points[i] = cd ? run_cd_point(recipe, i, inner, result.output_dir, write_files)
                           : run_mb_point(recipe, i, result.output_dir, write_files);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });

    std::exception_ptr first;
    for (std::size_t i = 0; i < jobs && !first; ++i) {
        if (errors[i]) {
            first = errors[i];
            try {
                std::rethrow_exception(first);
            } catch (const std::exception& e) {
                result.error = "sweep point " + std::to_string(i) + ": " + e.what();
            }
        }
    }
    result.complete = !first;
    result.rows = assemble(points, series);

    write_summary(result.output_dir / "summary.csv", result.rows, result.config_hash);
    json manifest = {
        {"recipe", recipe.name},
        {"description", recipe.description},
        {"model", model_name(recipe.model)},
        {"swept_parameter", swept_name(recipe.swept)},
        {"swept_unit", swept_unit(recipe.swept)},
        {"series_parameter", cd ? "beta_over_2pi_hz_cm3" : "none"},
        {"complete", result.complete},
        {"error", result.error},
        {"rows", result.rows.size()},
        {"threads", threads},
        {"git_hash", result.git_hash},
        {"config_hash", result.config_hash},
        {"timestamp", result.timestamp},
        {"config", recipe_to_json(recipe)},
    };
    write_json(result.output_dir / "manifest.json", manifest);

    if (first) {
        std::rethrow_exception(first);
    }
    return result;
}

}  // namespace subabsorb
