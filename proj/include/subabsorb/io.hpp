#pragma once

// File formats: CSV traces, JSON fit records and a binary full-grid dump.
// Times are written in ns; intensities stay in normalized |Omega|^2 units.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "subabsorb/analysis.hpp"
#include "subabsorb/coupled_dipole.hpp"
#include "subabsorb/maxwell_bloch.hpp"

namespace subabsorb {

/// Shortest round-trip decimal form, locale independent.
std::string format_double(double value);

/// Columns t_ns, I_input, I_output.
void write_trace_csv(const std::filesystem::path& path, const TransmissionTrace& trace,
                     const AtomicSpecies& species = {});
/// Adds u_input, u_output columns.
void write_trace_csv(const std::filesystem::path& path, const CountTrace& counts,
                     const AtomicSpecies& species = {});

/// Reads either layout; uncertainties are zero when the u columns are absent.
/// Throws ConfigError on a malformed file.
CountTrace read_trace_csv(const std::filesystem::path& path, const AtomicSpecies& species = {});

/// Columns t_ns, P_normalized.
void write_dipole_csv(const std::filesystem::path& path, const DipoleTrace& trace,
                      const AtomicSpecies& species = {});
/// Columns t_ns, P_mean, P_stderr.
void write_ensemble_csv(const std::filesystem::path& path, const EnsembleResult& result,
                        const AtomicSpecies& species = {});

/// {tau_ns, tau_err_ns, sigma_init, sigma_ss_fit, chi2_reduced, window, seed}.
nlohmann::json fit_record(const RiseTimeFit& fit, double tau_uncertainty, std::uint64_t seed,
                          const AtomicSpecies& species = {});

void write_json(const std::filesystem::path& path, const nlohmann::json& value);

/// Binary layout described in docs/grid_dump.md.
void write_grid_dump(const std::filesystem::path& path, const FieldGrid& grid);
FieldGrid read_grid_dump(const std::filesystem::path& path);

}  // namespace subabsorb
