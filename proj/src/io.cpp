#include "subabsorb/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "subabsorb/errors.hpp"

namespace subabsorb {

namespace {

constexpr std::array<char, 8> kGridMagic{'S', 'B', 'G', 'R', 'I', 'D', '0', '1'};

static_assert(std::endian::native == std::endian::little, "grid dump assumes a little-endian host");

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const std::string& header,
               std::size_t rows, std::size_t cols, const auto& cell)
{
    std::ofstream out = open_out(path);
    out << header << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c) {
                out << ',';
            }
            out << format_double(cell(r, c));
        }
        out << '\n';
    }
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) {
            field.pop_back();
        }
        std::size_t start = field.find_first_not_of(' ');
        out.push_back(start == std::string::npos ? std::string{} : field.substr(start));
    }
    return out;
}

double parse_double(const std::string& text, const std::filesystem::path& path, std::size_t line)
{
    double value = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError(path.string() + ":" + std::to_string(line) + ": not a number: '" + text + "'");
    }
    return value;
}

template <class T>
void put(std::ostream& out, const T& value)
{
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in)
{
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw Error("grid dump truncated");
    }
    return value;
}

void put_doubles(std::ostream& out, const std::vector<double>& v)
{
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_doubles(std::istream& in, std::vector<double>& v, std::size_t n)
{
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) {
        throw Error("grid dump truncated");
    }
}

// Complex arrays are stored as a block of real parts then a block of imaginary parts.
void put_complex(std::ostream& out, const std::vector<cplx>& v)
{
    std::vector<double> part(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        part[i] = v[i].real();
    }
    put_doubles(out, part);
    for (std::size_t i = 0; i < v.size(); ++i) {
        part[i] = v[i].imag();
    }
    put_doubles(out, part);
}

void get_complex(std::istream& in, std::vector<cplx>& v, std::size_t n)
{
    std::vector<double> re, im;
    get_doubles(in, re, n);
    get_doubles(in, im, n);
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = {re[i], im[i]};
    }
}

}  // namespace

std::string format_double(double value)
{
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) {
        throw Error("format_double failed");
    }
    return std::string(buf.data(), ptr);
}

void write_trace_csv(const std::filesystem::path& path, const TransmissionTrace& trace, const AtomicSpecies& species)
{
    write_csv(path, "t_ns,I_input,I_output", trace.t.size(), 3, [&](std::size_t r, std::size_t c) {
        switch (c) {
        case 0: return species.to_ns(trace.t[r]);
        case 1: return trace.input[r];
        default: return trace.output[r];
        }
    });
}

void write_trace_csv(const std::filesystem::path& path, const CountTrace& counts, const AtomicSpecies& species)
{
    const TransmissionTrace& tr = counts.intensities;
    write_csv(path, "t_ns,I_input,I_output,u_input,u_output", tr.t.size(), 5, [&](std::size_t r, std::size_t c) {
        switch (c) {
        case 0: return species.to_ns(tr.t[r]);
        case 1: return tr.input[r];
        case 2: return tr.output[r];
        case 3: return counts.input_uncertainty[r];
        default: return counts.output_uncertainty[r];
        }
    });
}

CountTrace read_trace_csv(const std::filesystem::path& path, const AtomicSpecies& species)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ConfigError(path.string() + ": empty file");
    }
    const auto header = split(line);
    auto column = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return static_cast<int>(i);
            }
        }
        return -1;
    };
    const int ct = column("t_ns"), ci = column("I_input"), co = column("I_output");
    const int cui = column("u_input"), cuo = column("u_output");
    if (ct < 0 || ci < 0 || co < 0) {
        throw ConfigError(path.string() + ": header must contain t_ns, I_input, I_output");
    }
    if ((cui < 0) != (cuo < 0)) {
        throw ConfigError(path.string() + ": u_input and u_output must appear together");
    }

    CountTrace out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto f = split(line);
        if (f.size() != header.size()) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(header.size()) + " fields");
        }
        out.intensities.t.push_back(species.from_ns(parse_double(f[ct], path, lineno)));
        out.intensities.input.push_back(parse_double(f[ci], path, lineno));
        out.intensities.output.push_back(parse_double(f[co], path, lineno));
        out.input_uncertainty.push_back(cui < 0 ? 0.0 : parse_double(f[cui], path, lineno));
        out.output_uncertainty.push_back(cuo < 0 ? 0.0 : parse_double(f[cuo], path, lineno));
    }
    if (out.intensities.t.empty()) {
        throw ConfigError(path.string() + ": no data rows");
    }
    return out;
}

void write_dipole_csv(const std::filesystem::path& path, const DipoleTrace& trace, const AtomicSpecies& species)
{
    write_csv(path, "t_ns,P_normalized", trace.t.size(), 2, [&](std::size_t r, std::size_t c) {
        return c == 0 ? species.to_ns(trace.t[r]) : trace.p[r];
    });
}

void write_ensemble_csv(const std::filesystem::path& path, const EnsembleResult& result, const AtomicSpecies& species)
{
    write_csv(path, "t_ns,P_mean,P_stderr", result.t.size(), 3, [&](std::size_t r, std::size_t c) {
        switch (c) {
        case 0: return species.to_ns(result.t[r]);
        case 1: return result.mean[r];
        default: return result.standard_error[r];
        }
    });
}

nlohmann::json fit_record(const RiseTimeFit& fit, double tau_uncertainty, std::uint64_t seed,
                          const AtomicSpecies& species)
{
    return {
        {"tau_ns", species.to_ns(fit.tau)},
        {"tau_err_ns", species.to_ns(tau_uncertainty)},
        {"sigma_init", fit.sigma_init},
        {"sigma_ss_fit", fit.sigma_ss_fit},
        {"chi2_reduced", fit.chi2_reduced},
        {"window", {species.to_ns(fit.window.start), species.to_ns(fit.window.end)}},
        {"seed", seed},
    };
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value)
{
    std::ofstream out = open_out(path);
    out << value.dump(2) << '\n';
}

void write_grid_dump(const std::filesystem::path& path, const FieldGrid& grid)
{
    std::ofstream out = open_out(path, std::ios::binary);
    out.write(kGridMagic.data(), kGridMagic.size());
    put<std::uint64_t>(out, grid.nz());
    put<std::uint64_t>(out, grid.nt());
    put<double>(out, grid.nz() > 1 ? grid.z[1] - grid.z[0] : 0.0);
    put<double>(out, grid.nt() > 1 ? grid.t[1] - grid.t[0] : 0.0);
    put_doubles(out, grid.z);
    put_doubles(out, grid.t);
    put_complex(out, grid.rabi);
    put_doubles(out, grid.rho00);
    put_doubles(out, grid.rho11);
    put_complex(out, grid.rho01);
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

FieldGrid read_grid_dump(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kGridMagic) {
        throw Error(path.string() + ": not a grid dump");
    }
    const auto nz = get<std::uint64_t>(in);
    const auto nt = get<std::uint64_t>(in);
    get<double>(in);
    get<double>(in);
    FieldGrid g;
    get_doubles(in, g.z, nz);
    get_doubles(in, g.t, nt);
    get_complex(in, g.rabi, nz * nt);
    get_doubles(in, g.rho00, nz * nt);
    get_doubles(in, g.rho11, nz * nt);
    get_complex(in, g.rho01, nz * nt);
    return g;
}

}  // namespace subabsorb
