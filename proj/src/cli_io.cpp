#include "snls/cli_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <sstream>
#include <utility>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "snls/experiments.hpp"
#include "snls/observables.hpp"

namespace snls {

using nlohmann::json;
namespace fs = std::filesystem;

// =============================================================================
// configuration errors
// =============================================================================

namespace {

std::string join_errors(const std::vector<std::string>& errs) {
    std::string all = "configuration rejected";
    for (const auto& e : errs) {
        all += "\n  ";
        all += e;
    }
    return all;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errs)
    : std::runtime_error(join_errors(errs)), errors_(std::move(errs)) {}

// =============================================================================
// strict JSON walking
// =============================================================================
//
// Every getter records a path-tagged message instead of throwing, so one parse
// reports every problem in the document.  Getters return true only when the
// key is present and well-typed; values keep their defaults otherwise.

namespace {

struct Walk {
    std::vector<std::string> errs;

    void fail(const std::string& path, const std::string& msg) { errs.push_back(path + ": " + msg); }

    bool object(const json& j, const std::string& path) {
        if (j.is_object()) return true;
        fail(path.empty() ? std::string("/") : path, "expected an object");
        return false;
    }

    void known(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool ok = false;
            for (const char* k : allowed) ok = ok || (it.key() == k);
            if (!ok) fail(path + "/" + it.key(), "unknown key");
        }
    }

    bool number(const json& j, const std::string& path, const char* key, double& out) {
        auto it = j.find(key);
        if (it == j.end()) return false;
        if (!it->is_number()) {
            fail(path + "/" + key, "expected a number");
            return false;
        }
        out = it->get<double>();
        return true;
    }

    bool integer(const json& j, const std::string& path, const char* key, int& out) {
        auto it = j.find(key);
        if (it == j.end()) return false;
        if (!it->is_number_integer()) {
            fail(path + "/" + key, "expected an integer");
            return false;
        }
        out = static_cast<int>(it->get<long long>());
        return true;
    }

    bool unsigned64(const json& j, const std::string& path, const char* key, std::uint64_t& out) {
        auto it = j.find(key);
        if (it == j.end()) return false;
        if (!it->is_number_unsigned()) {
            fail(path + "/" + key, "expected a nonnegative integer");
            return false;
        }
        out = it->get<std::uint64_t>();
        return true;
    }

    bool boolean(const json& j, const std::string& path, const char* key, bool& out) {
        auto it = j.find(key);
        if (it == j.end()) return false;
        if (!it->is_boolean()) {
            fail(path + "/" + key, "expected true or false");
            return false;
        }
        out = it->get<bool>();
        return true;
    }

    bool text(const json& j, const std::string& path, const char* key, std::string& out) {
        auto it = j.find(key);
        if (it == j.end()) return false;
        if (!it->is_string()) {
            fail(path + "/" + key, "expected a string");
            return false;
        }
        out = it->get<std::string>();
        return true;
    }

    // complex scalars travel as [re, im]
    bool complex_pair(const json& j, const std::string& path, const char* key, cplx& out) {
        auto it = j.find(key);
        if (it == j.end()) return false;
        if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
            fail(path + "/" + key, "expected [re, im]");
            return false;
        }
        out = cplx((*it)[0].get<double>(), (*it)[1].get<double>());
        return true;
    }

    bool number_list(const json& j, const std::string& path, const char* key,
                     std::vector<double>& out) {
        auto it = j.find(key);
        if (it == j.end()) return false;
        if (!it->is_array()) {
            fail(path + "/" + key, "expected an array of numbers");
            return false;
        }
        std::vector<double> vals;
        for (const auto& v : *it) {
            if (!v.is_number()) {
                fail(path + "/" + key, "expected an array of numbers");
                return false;
            }
            vals.push_back(v.get<double>());
        }
        out = std::move(vals);
        return true;
    }

    bool integer_list(const json& j, const std::string& path, const char* key,
                      std::vector<int>& out) {
        auto it = j.find(key);
        if (it == j.end()) return false;
        if (!it->is_array()) {
            fail(path + "/" + key, "expected an array of integers");
            return false;
        }
        std::vector<int> vals;
        for (const auto& v : *it) {
            if (!v.is_number_integer()) {
                fail(path + "/" + key, "expected an array of integers");
                return false;
            }
            vals.push_back(static_cast<int>(v.get<long long>()));
        }
        out = std::move(vals);
        return true;
    }
};

// one number per whitespace/comma-separated token; '#' lines are comments
std::vector<double> load_table_csv(Walk& w, const std::string& err_path, const std::string& file,
                                   const std::string& base_dir) {
    fs::path p(file);
    if (p.is_relative()) p = fs::path(base_dir) / p;
    std::ifstream in(p);
    if (!in) {
        w.fail(err_path, "cannot read amplitude table " + p.string());
        return {};
    }
    std::vector<double> vals;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        for (char& ch : line)
            if (ch == ',' || ch == ';') ch = ' ';
        std::istringstream ss(line);
        double v = 0.0;
        while (ss >> v) vals.push_back(v);
        if (!ss.eof()) {
            w.fail(err_path, "malformed number in amplitude table " + p.string());
            return {};
        }
    }
    if (vals.empty()) w.fail(err_path, "empty amplitude table " + p.string());
    return vals;
}

DatumConfig parse_datum(Walk& w, const json& j, const std::string& path) {
    DatumConfig d;
    if (!w.object(j, path)) return d;
    w.known(j, path, {"kind", "amplitude", "width", "radius", "center"});
    w.text(j, path, "kind", d.kind);
    if (d.kind != "gaussian" && d.kind != "bump" && d.kind != "zero")
        w.fail(path + "/kind", "expected gaussian, bump or zero");
    w.complex_pair(j, path, "amplitude", d.amplitude);
    w.number(j, path, "width", d.width);
    if (!(d.width > 0.0)) w.fail(path + "/width", "expected a positive number");
    w.number(j, path, "radius", d.radius);
    if (!(d.radius > 0.0)) w.fail(path + "/radius", "expected a positive number");
    w.number_list(j, path, "center", d.center);
    return d;
}

ChannelConfig parse_channel(Walk& w, const json& j, const std::string& path,
                            const std::string& base_dir) {
    ChannelConfig c;
    if (!w.object(j, path)) return c;
    w.known(j, path, {"kind", "amplitude", "conservative", "radius", "center", "g_const",
                      "g_samples", "g_csv", "g_zero_after"});
    w.text(j, path, "kind", c.kind);
    if (c.kind != "bump") w.fail(path + "/kind", "expected bump");
    w.complex_pair(j, path, "amplitude", c.amplitude);
    w.boolean(j, path, "conservative", c.conservative);
    w.number(j, path, "radius", c.radius);
    if (!(c.radius > 0.0)) w.fail(path + "/radius", "expected a positive number");
    w.number_list(j, path, "center", c.center);
    w.number(j, path, "g_const", c.g_const);
    w.number_list(j, path, "g_samples", c.g_samples);
    w.integer(j, path, "g_zero_after", c.g_zero_after);
    if (c.g_zero_after < -1) w.fail(path + "/g_zero_after", "expected -1 or a step index");
    std::string csv;
    if (w.text(j, path, "g_csv", csv)) {
        if (!c.g_samples.empty())
            w.fail(path + "/g_csv", "give either g_samples or g_csv, not both");
        else
            c.g_samples = load_table_csv(w, path + "/g_csv", csv, base_dir);
    }
    if (!c.g_samples.empty() && c.g_zero_after >= 0)
        w.fail(path + "/g_zero_after", "applies to the constant amplitude table only");
    if (c.conservative && c.amplitude.real() != 0.0)
        w.fail(path + "/amplitude", "conservative channel needs a purely imaginary amplitude");
    return c;
}

ExperimentConfig parse_experiment(Walk& w, const json& j, const std::string& path) {
    ExperimentConfig e;
    if (!w.object(j, path)) return e;
    w.known(j, path, {"kind", "epsilons", "forcing", "direction", "horizon", "checkpoints",
                      "linear_only", "tolerance", "levels", "control_rate"});
    w.text(j, path, "kind", e.kind);
    if (e.kind != "simulate" && e.kind != "stability" && e.kind != "scatter" &&
        e.kind != "support" && e.kind != "norms")
        w.fail(path + "/kind", "expected simulate, stability, scatter, support or norms");
    w.number_list(j, path, "epsilons", e.epsilons);
    for (double eps : e.epsilons) {
        if (eps < 0.0) {
            w.fail(path + "/epsilons", "perturbation sizes must be >= 0");
            break;
        }
    }
    w.text(j, path, "forcing", e.forcing);
    if (e.forcing != "initial_datum" && e.forcing != "additive_error")
        w.fail(path + "/forcing", "expected initial_datum or additive_error");
    if (auto it = j.find("direction"); it != j.end())
        e.direction = parse_datum(w, *it, path + "/direction");
    w.number(j, path, "horizon", e.horizon);
    if (e.horizon < 0.0) w.fail(path + "/horizon", "expected >= 0 (0 selects the run length)");
    w.number_list(j, path, "checkpoints", e.checkpoints);
    w.boolean(j, path, "linear_only", e.linear_only);
    w.number(j, path, "tolerance", e.tolerance);
    if (!(e.tolerance > 0.0)) w.fail(path + "/tolerance", "expected a positive number");
    w.integer_list(j, path, "levels", e.levels);
    for (int n : e.levels) {
        if (n < 1) {
            w.fail(path + "/levels", "dyadic levels must be >= 1");
            break;
        }
    }
    w.number(j, path, "control_rate", e.control_rate);
    return e;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& ex) {
        throw ConfigError({std::string("/: not valid JSON (") + ex.what() + ")"});
    }

    Walk w;
    RunConfig c;
    bool have_dim = false, grid_ok = true, have_steps = false;

    if (!w.object(j, "")) throw ConfigError(std::move(w.errs));
    w.known(j, "", {"problem", "solver", "noise", "experiment", "seed", "samples", "output"});

    if (auto it = j.find("problem"); it != j.end()) {
        const json& p = *it;
        if (w.object(p, "/problem")) {
            w.known(p, "/problem", {"criticality", "dimension", "points", "box", "lambda", "datum"});
            w.text(p, "/problem", "criticality", c.problem.criticality);
            if (c.problem.criticality != "mass" && c.problem.criticality != "energy")
                w.fail("/problem/criticality", "expected mass or energy");
            have_dim = w.integer(p, "/problem", "dimension", c.problem.dimension);
            if (!have_dim) {
                w.fail("/problem/dimension", "missing required key");
            } else if (c.problem.dimension < 1 || c.problem.dimension > 3) {
                w.fail("/problem/dimension", "expected 1, 2 or 3");
                have_dim = false;
            }
            w.integer(p, "/problem", "points", c.problem.points);
            if (c.problem.points < 2 || (c.problem.points & (c.problem.points - 1)) != 0) {
                w.fail("/problem/points", "expected a power of two >= 2");
                grid_ok = false;
            }
            w.number(p, "/problem", "box", c.problem.box);
            if (!(c.problem.box > 0.0)) {
                w.fail("/problem/box", "expected a positive number");
                grid_ok = false;
            }
            w.integer(p, "/problem", "lambda", c.problem.lambda);
            if (c.problem.lambda != -1 && c.problem.lambda != 1)
                w.fail("/problem/lambda", "expected -1 (defocusing) or +1 (focusing)");
            if (auto d = p.find("datum"); d != p.end())
                c.problem.datum = parse_datum(w, *d, "/problem/datum");
        }
    } else {
        w.fail("/problem", "missing required section");
    }

    if (auto it = j.find("solver"); it != j.end()) {
        const json& s = *it;
        if (w.object(s, "/solver")) {
            w.known(s, "/solver",
                    {"dt", "steps", "scheme", "dealias", "store_stride", "blowup_factor"});
            if (!w.number(s, "/solver", "dt", c.solver.dt))
                w.fail("/solver/dt", "missing required key");
            else if (!(c.solver.dt > 0.0) || !std::isfinite(c.solver.dt))
                w.fail("/solver/dt", "expected a positive finite number");
            have_steps = w.integer(s, "/solver", "steps", c.solver.steps);
            if (!have_steps) {
                w.fail("/solver/steps", "missing required key");
            } else if (c.solver.steps < 1) {
                w.fail("/solver/steps", "expected >= 1");
                have_steps = false;
            }
            w.text(s, "/solver", "scheme", c.solver.scheme);
            if (c.solver.scheme != "lie" && c.solver.scheme != "strang")
                w.fail("/solver/scheme", "expected lie or strang");
            w.text(s, "/solver", "dealias", c.solver.dealias);
            if (c.solver.dealias != "auto" && c.solver.dealias != "on" && c.solver.dealias != "off")
                w.fail("/solver/dealias", "expected auto, on or off");
            w.integer(s, "/solver", "store_stride", c.solver.store_stride);
            if (c.solver.store_stride < 1) w.fail("/solver/store_stride", "expected >= 1");
            w.number(s, "/solver", "blowup_factor", c.solver.blowup_factor);
            if (!(c.solver.blowup_factor > 1.0))
                w.fail("/solver/blowup_factor", "expected > 1");
        }
    } else {
        w.fail("/solver", "missing required section");
    }

    if (auto it = j.find("noise"); it != j.end()) {
        if (!it->is_array()) {
            w.fail("/noise", "expected an array of channels");
        } else {
            for (std::size_t i = 0; i < it->size(); ++i)
                c.noise.push_back(
                    parse_channel(w, (*it)[i], "/noise/" + std::to_string(i), base_dir));
        }
    }

    if (auto it = j.find("experiment"); it != j.end())
        c.experiment = parse_experiment(w, *it, "/experiment");

    w.unsigned64(j, "", "seed", c.seed);
    w.integer(j, "", "samples", c.samples);
    if (c.samples < 0) w.fail("/samples", "expected >= 0");
    w.text(j, "", "output", c.output);
    if (c.output.empty()) w.fail("/output", "expected a non-empty path");

    // ---- cross-field constraints (skipped when their inputs already failed) --
    if (have_dim) {
        if (c.problem.criticality == "energy" && c.problem.dimension < 3)
            w.fail("/problem/criticality", "energy-critical problems need dimension >= 3");
        auto center_fits = [&](const std::vector<double>& ctr, const std::string& path) {
            if (!ctr.empty() && static_cast<int>(ctr.size()) != c.problem.dimension)
                w.fail(path, "center needs one entry per axis (dimension " +
                                 std::to_string(c.problem.dimension) + ")");
        };
        center_fits(c.problem.datum.center, "/problem/datum/center");
        center_fits(c.experiment.direction.center, "/experiment/direction/center");
        for (std::size_t i = 0; i < c.noise.size(); ++i)
            center_fits(c.noise[i].center, "/noise/" + std::to_string(i) + "/center");
    }
    if (have_dim && grid_ok) {
        // compact supports must clear the box with a two-cell margin
        const double h = c.problem.box / c.problem.points;
        const double max_radius = 0.5 * c.problem.box - 2.0 * h;
        if (c.problem.datum.kind == "bump" && !(c.problem.datum.radius < max_radius))
            w.fail("/problem/datum/radius", "bump support must satisfy radius < box/2 - 2h");
        if (c.experiment.direction.kind == "bump" &&
            !(c.experiment.direction.radius < max_radius))
            w.fail("/experiment/direction/radius", "bump support must satisfy radius < box/2 - 2h");
        for (std::size_t i = 0; i < c.noise.size(); ++i)
            if (!(c.noise[i].radius < max_radius))
                w.fail("/noise/" + std::to_string(i) + "/radius",
                       "bump support must satisfy radius < box/2 - 2h");
    }
    if (have_steps) {
        for (std::size_t i = 0; i < c.noise.size(); ++i) {
            const auto& gs = c.noise[i].g_samples;
            if (!gs.empty() && gs.size() != static_cast<std::size_t>(c.solver.steps) + 1)
                w.fail("/noise/" + std::to_string(i) + "/g_samples",
                       "amplitude table needs steps+1 = " + std::to_string(c.solver.steps + 1) +
                           " samples (got " + std::to_string(gs.size()) + ")");
        }
    }
    const std::string& kind = c.experiment.kind;
    if ((kind == "stability" || kind == "scatter" || kind == "support") && c.noise.empty())
        w.fail("/noise", kind + " needs at least one noise channel");
    if (kind == "stability" && c.experiment.epsilons.empty())
        w.fail("/experiment/epsilons", "stability needs at least one perturbation size");
    if (kind == "support" && c.experiment.levels.empty())
        w.fail("/experiment/levels", "support needs at least one dyadic level");

    if (!w.errs.empty()) throw ConfigError(std::move(w.errs));
    return c;
}

// =============================================================================
// canonical serialization
// =============================================================================
//
// Full schema, keys sorted (nlohmann objects are ordered maps), shortest
// round-trip float text, newline terminated.  CSV amplitude tables were
// already resolved inline by the parser, so the canonical form -- and hence
// the configuration hash -- pins the data, not a path.

namespace {

json datum_json(const DatumConfig& d) {
    return json{{"amplitude", {d.amplitude.real(), d.amplitude.imag()}},
                {"center", d.center},
                {"kind", d.kind},
                {"radius", d.radius},
                {"width", d.width}};
}

json channel_json(const ChannelConfig& c) {
    return json{{"amplitude", {c.amplitude.real(), c.amplitude.imag()}},
                {"center", c.center},
                {"conservative", c.conservative},
                {"g_const", c.g_const},
                {"g_samples", c.g_samples},
                {"g_zero_after", c.g_zero_after},
                {"kind", c.kind},
                {"radius", c.radius}};
}

}  // namespace

std::string serialize_config(const RunConfig& c) {
    json noise = json::array();
    for (const auto& ch : c.noise) noise.push_back(channel_json(ch));
    json j{
        {"experiment",
         {{"checkpoints", c.experiment.checkpoints},
          {"control_rate", c.experiment.control_rate},
          {"direction", datum_json(c.experiment.direction)},
          {"epsilons", c.experiment.epsilons},
          {"forcing", c.experiment.forcing},
          {"horizon", c.experiment.horizon},
          {"kind", c.experiment.kind},
          {"levels", c.experiment.levels},
          {"linear_only", c.experiment.linear_only},
          {"tolerance", c.experiment.tolerance}}},
        {"noise", noise},
        {"output", c.output},
        {"problem",
         {{"box", c.problem.box},
          {"criticality", c.problem.criticality},
          {"datum", datum_json(c.problem.datum)},
          {"dimension", c.problem.dimension},
          {"lambda", c.problem.lambda},
          {"points", c.problem.points}}},
        {"samples", c.samples},
        {"seed", c.seed},
        {"solver",
         {{"blowup_factor", c.solver.blowup_factor},
          {"dealias", c.solver.dealias},
          {"dt", c.solver.dt},
          {"scheme", c.solver.scheme},
          {"steps", c.solver.steps},
          {"store_stride", c.solver.store_stride}}},
    };
    return j.dump(2) + "\n";
}

// =============================================================================
// bridges into the library types
// =============================================================================

TimeMesh config_mesh(const RunConfig& config) {
    TimeMesh mesh;
    mesh.t0 = 0.0;
    mesh.dt = config.solver.dt;
    mesh.steps = config.solver.steps;
    return mesh;
}

SolverConfig build_solver(const RunConfig& config) {
    SolverConfig s;
    s.dt = config.solver.dt;
    s.scheme = config.solver.scheme == "lie" ? Scheme::lie : Scheme::strang;
    s.dealias = config.solver.dealias == "auto" ? -1 : (config.solver.dealias == "on" ? 1 : 0);
    s.store_stride = config.solver.store_stride;
    s.blowup_factor = config.solver.blowup_factor;
    s.horizon = config.solver.dt * config.solver.steps;
    s.linear_only = config.experiment.linear_only;
    return s;
}

ComplexField build_datum(const DatumConfig& datum, const TorusGrid& grid) {
    ComplexField f(grid);
    if (datum.kind == "zero") return f;
    double ctr[3] = {0.0, 0.0, 0.0};
    for (std::size_t a = 0; a < datum.center.size() && a < 3; ++a) ctr[a] = datum.center[a];
    if (datum.kind == "bump")
        return make_bump_profile(grid, ctr, datum.radius, datum.amplitude, false).phi;
    const double inv_two_w2 = 1.0 / (2.0 * datum.width * datum.width);
    int idx[3];
    for (std::size_t i = 0; i < f.size(); ++i) {
        grid.axis_indices(i, idx);
        double r2 = 0.0;
        for (int a = 0; a < grid.dim; ++a) {
            const double dx = grid.coordinate(idx[a]) - ctr[a];
            r2 += dx * dx;
        }
        f.values[i] = datum.amplitude * std::exp(-r2 * inv_two_w2);
    }
    return f;
}

ProblemSpec build_problem(const RunConfig& config) {
    TorusGrid grid(config.problem.dimension, config.problem.points, config.problem.box);
    ProblemSpec p;
    p.criticality =
        config.problem.criticality == "energy" ? Criticality::energy : Criticality::mass;
    p.lambda = config.problem.lambda;
    p.initial = build_datum(config.problem.datum, grid);
    if (!config.noise.empty()) {
        const TimeMesh mesh = config_mesh(config);
        std::vector<NoiseProfile> profiles;
        std::vector<std::vector<double>> amplitudes;
        for (const auto& ch : config.noise) {
            double ctr[3] = {0.0, 0.0, 0.0};
            for (std::size_t a = 0; a < ch.center.size() && a < 3; ++a) ctr[a] = ch.center[a];
            profiles.push_back(
                make_bump_profile(grid, ctr, ch.radius, ch.amplitude, ch.conservative));
            std::vector<double> table(static_cast<std::size_t>(mesh.steps) + 1);
            if (!ch.g_samples.empty()) {
                table = ch.g_samples;
            } else {
                for (int j = 0; j <= mesh.steps; ++j)
                    table[j] = (ch.g_zero_after >= 0 && j > ch.g_zero_after) ? 0.0 : ch.g_const;
            }
            amplitudes.push_back(std::move(table));
        }
        p.noise = std::make_shared<NoiseModel>(
            make_noise_model(mesh, std::move(profiles), std::move(amplitudes)));
    }
    p.validate();
    return p;
}

// =============================================================================
// provenance digests
// =============================================================================

namespace {

std::string hex_of(const unsigned char* md, unsigned int len) {
    static const char* digits = "0123456789abcdef";
    std::string out(2 * len, '0');
    for (unsigned int i = 0; i < len; ++i) {
        out[2 * i] = digits[md[i] >> 4];
        out[2 * i + 1] = digits[md[i] & 0xf];
    }
    return out;
}

}  // namespace

std::string sha256_hex(const void* data, std::size_t len) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int mdlen = 0;
    if (EVP_Digest(data, len, md, &mdlen, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256_hex: digest failed");
    return hex_of(md, mdlen);
}

std::string sha256_hex(const std::string& text) { return sha256_hex(text.data(), text.size()); }

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("sha256_file: cannot read " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("sha256_file: cannot allocate digest context");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        const std::streamsize got = in.gcount();
        if (got <= 0) break;
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(got));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int mdlen = 0;
    EVP_DigestFinal_ex(ctx, md, &mdlen);
    EVP_MD_CTX_free(ctx);
    return hex_of(md, mdlen);
}

// =============================================================================
// binary trajectory container
// =============================================================================
//
// Flat host-endian layout, version 1:
//   magic "SNLSTRJ1" | u32 format | u32 dim | u32 n | f64 L
//   u32 criticality | i32 lambda | f64 dt | f64 t0 | u64 seed | u32 sample
//   u8 truncated | i32 stop_step | string stop_reason | string config_hash
//   f64[] mass_record | f64[] energy_record
//   u64 snapshots { f64 time, cplx[grid.size()] }
// Doubles are stored raw, so save/load round-trips bit for bit.

namespace {

constexpr char kTrajMagic[8] = {'S', 'N', 'L', 'S', 'T', 'R', 'J', '1'};
constexpr std::uint32_t kTrajFormat = 1;
// refuse to allocate for absurd counts when reading damaged files
constexpr std::uint64_t kMaxCount = std::uint64_t(1) << 33;

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
void get_raw(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s) {
    put(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    std::uint32_t len = 0;
    get_raw(in, len);
    if (!in || len > (1u << 20)) throw std::runtime_error("load_trajectory: corrupt string field");
    std::string s(len, '\0');
    in.read(s.data(), len);
    return s;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
    put(out, static_cast<std::uint64_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::istream& in) {
    std::uint64_t count = 0;
    get_raw(in, count);
    if (!in || count > kMaxCount) throw std::runtime_error("load_trajectory: corrupt record count");
    std::vector<double> v(count);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    return v;
}

Trajectory load_trajectory_impl(const std::string& path, std::string* hash_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_trajectory: cannot read " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kTrajMagic, 8) != 0)
        throw std::runtime_error("load_trajectory: not a trajectory file: " + path);
    std::uint32_t format = 0;
    get_raw(in, format);
    if (format != kTrajFormat)
        throw std::runtime_error("load_trajectory: unsupported format version");

    std::uint32_t dim = 0, n = 0, crit = 0, sample = 0;
    std::int32_t lambda = 0, stop_step = 0;
    double L = 0.0, dt = 0.0, t0 = 0.0;
    std::uint64_t seed = 0;
    std::uint8_t truncated = 0;
    get_raw(in, dim);
    get_raw(in, n);
    get_raw(in, L);
    get_raw(in, crit);
    get_raw(in, lambda);
    get_raw(in, dt);
    get_raw(in, t0);
    get_raw(in, seed);
    get_raw(in, sample);
    get_raw(in, truncated);
    get_raw(in, stop_step);
    if (!in) throw std::runtime_error("load_trajectory: truncated header in " + path);

    Trajectory traj;
    traj.stop_reason = get_string(in);
    const std::string hash = get_string(in);
    if (hash_out) *hash_out = hash;

    const TorusGrid grid(static_cast<int>(dim), static_cast<int>(n), L);
    traj.mass_record = get_doubles(in);
    traj.energy_record = get_doubles(in);

    std::uint64_t snaps = 0;
    get_raw(in, snaps);
    if (!in || snaps > kMaxCount) throw std::runtime_error("load_trajectory: corrupt snapshot count");
    const std::size_t cells = grid.size();
    for (std::uint64_t i = 0; i < snaps; ++i) {
        double t = 0.0;
        get_raw(in, t);
        ComplexField f(grid);
        in.read(reinterpret_cast<char*>(f.values.data()),
                static_cast<std::streamsize>(cells * sizeof(cplx)));
        if (!in) throw std::runtime_error("load_trajectory: truncated snapshot in " + path);
        traj.series.times.push_back(t);
        traj.series.fields.push_back(std::move(f));
    }

    traj.problem.criticality = crit == 1 ? Criticality::energy : Criticality::mass;
    traj.problem.lambda = lambda;
    if (!traj.series.fields.empty()) traj.problem.initial = traj.series.fields.front();
    traj.config.dt = dt;
    traj.config.horizon = traj.series.times.empty() ? 0.0 : traj.series.times.back() - t0;
    traj.seed = seed;
    traj.sample = sample;
    traj.truncated = truncated != 0;
    traj.stop_step = stop_step;
    return traj;
}

}  // namespace

void save_trajectory(const Trajectory& traj, const std::string& path,
                     const std::string& config_hash) {
    if (traj.series.fields.empty())
        throw std::invalid_argument("save_trajectory: empty trajectory");
    const TorusGrid& grid = traj.series.fields.front().grid;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_trajectory: cannot open " + path);

    out.write(kTrajMagic, 8);
    put(out, kTrajFormat);
    put(out, static_cast<std::uint32_t>(grid.dim));
    put(out, static_cast<std::uint32_t>(grid.n));
    put(out, grid.L);
    put(out, static_cast<std::uint32_t>(traj.problem.criticality == Criticality::energy ? 1 : 0));
    put(out, static_cast<std::int32_t>(traj.problem.lambda));
    put(out, traj.config.dt);
    put(out, traj.series.times.front());
    put(out, traj.seed);
    put(out, static_cast<std::uint32_t>(traj.sample));
    put(out, static_cast<std::uint8_t>(traj.truncated ? 1 : 0));
    put(out, static_cast<std::int32_t>(traj.stop_step));
    put_string(out, traj.stop_reason);
    put_string(out, config_hash);
    put_doubles(out, traj.mass_record);
    put_doubles(out, traj.energy_record);
    put(out, static_cast<std::uint64_t>(traj.series.size()));
    for (std::size_t i = 0; i < traj.series.size(); ++i) {
        put(out, traj.series.times[i]);
        const auto& f = traj.series.fields[i];
        out.write(reinterpret_cast<const char*>(f.values.data()),
                  static_cast<std::streamsize>(f.values.size() * sizeof(cplx)));
    }
    out.close();
    if (!out) throw std::runtime_error("save_trajectory: write failed for " + path);
}

Trajectory load_trajectory(const std::string& path) { return load_trajectory_impl(path, nullptr); }

// =============================================================================
// artifact bookkeeping
// =============================================================================

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Collects (name, digest) pairs as artifacts are written; the manifest is
// assembled from this list at the end.  All writes happen here, on the
// orchestrating thread.
struct ArtifactWriter {
    fs::path dir;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> digests;

    ArtifactWriter(const std::string& out_dir, std::string hash, std::uint64_t seed_)
        : dir(out_dir), config_hash(std::move(hash)), seed(seed_) {
        fs::create_directories(dir);
    }

    std::string provenance_line() const {
        return "# config_hash=" + config_hash + " seed=" + std::to_string(seed) + " version=" +
               kVersion + "\n";
    }

    void write_text(const std::string& name, const std::string& body) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write artifact " + (dir / name).string());
        out << body;
        out.close();
        if (!out) throw std::runtime_error("write failed for artifact " + (dir / name).string());
        digests.emplace_back(name, sha256_hex(body));
    }

    // for artifacts written by other code paths (binary trajectories)
    void note_file(const std::string& name) {
        digests.emplace_back(name, sha256_file((dir / name).string()));
    }
};

// =============================================================================
// experiment runners
// =============================================================================
//
// Each runner writes its CSV artifacts through the writer, fills the report,
// and appends one message per failed check.  A nonempty abort string marks a
// numerical abort (exit 3) -- the artifacts produced so far stay on disk.

struct RunState {
    const RunConfig& cfg;
    const ProblemSpec& problem;
    const SolverConfig& solver;
    const TimeMesh& mesh;
    int threads = 1;
    ArtifactWriter& art;
    json& report;
    std::vector<std::string>& failed;
    std::string abort;
};

int noise_channels(const ProblemSpec& p) { return p.noise ? p.noise->channels() : 0; }

Trajectory solve_sample(const RunState& st, std::uint32_t sample) {
    if (st.problem.noise) {
        const BrownianDriver drv =
            sample_driver(st.mesh, noise_channels(st.problem), st.cfg.seed, sample);
        return solve_spde(st.problem, drv, st.solver);
    }
    return solve_deterministic(st.problem, st.solver);
}

// mass is conserved pathwise exactly when the noise is conservative (or absent)
bool mass_conserving(const ProblemSpec& p) { return !p.noise || p.noise->conservative; }

void write_conserved_csv(RunState& st, int sample, const Trajectory& traj) {
    std::string csv = st.art.provenance_line() + "step,time,mass\n";
    const double t0 = traj.series.times.front();
    for (std::size_t jm = 0; jm < traj.mass_record.size(); ++jm)
        csv += std::to_string(jm) + "," + fmt17(t0 + static_cast<double>(jm) * traj.config.dt) +
               "," + fmt17(traj.mass_record[jm]) + "\n";
    st.art.write_text("conserved_" + std::to_string(sample) + ".csv", csv);
    if (!traj.energy_record.empty()) {
        std::string ecsv = st.art.provenance_line() + "time,energy\n";
        const std::size_t ne = std::min(traj.energy_record.size(), traj.series.times.size());
        for (std::size_t i = 0; i < ne; ++i)
            ecsv += fmt17(traj.series.times[i]) + "," + fmt17(traj.energy_record[i]) + "\n";
        st.art.write_text("energy_" + std::to_string(sample) + ".csv", ecsv);
    }
}

void run_simulate(RunState& st) {
    json entries = json::array();
    double mass_sum = 0.0, mass_sq = 0.0;
    int done = 0;
    for (int s = 0; s < st.cfg.samples; ++s) {
        const Trajectory traj = solve_sample(st, static_cast<std::uint32_t>(s));
        const std::string name = "trajectory_" + std::to_string(s) + ".bin";
        save_trajectory(traj, (st.art.dir / name).string(), st.art.config_hash);
        st.art.note_file(name);
        write_conserved_csv(st, s, traj);

        const double m0 = traj.mass_record.front();
        double drift = 0.0;
        for (double m : traj.mass_record) drift = std::max(drift, std::abs(m - m0));
        if (m0 > 0.0) drift /= m0;
        const double mf = traj.mass_record.back();
        mass_sum += mf;
        mass_sq += mf * mf;
        ++done;

        entries.push_back(json{{"sample", s},
                               {"completed", !traj.truncated},
                               {"stop_reason", traj.stop_reason},
                               {"mass_initial", m0},
                               {"mass_final", mf},
                               {"mass_drift", drift}});
        if (traj.truncated) {
            st.abort = "sample " + std::to_string(s) + ": " + traj.stop_reason;
            break;
        }
        if (mass_conserving(st.problem) && drift > 1e-8)
            st.failed.push_back("sample " + std::to_string(s) + ": relative mass drift " +
                                fmt17(drift) + " exceeds 1e-8");
    }
    st.report["samples"] = entries;
    if (done > 0) {
        const double mean = mass_sum / done;
        const double var = done > 1 ? std::max(0.0, (mass_sq - done * mean * mean) / (done - 1))
                                    : 0.0;
        st.report["final_mass"] = json{{"mean", mean}, {"se", std::sqrt(var / done)}};
    }
}

void run_norms(RunState& st) {
    const Trajectory traj = solve_sample(st, 0);
    save_trajectory(traj, (st.art.dir / "trajectory_0.bin").string(), st.art.config_hash);
    st.art.note_file("trajectory_0.bin");
    if (traj.truncated) {
        st.abort = "sample 0: " + traj.stop_reason;
        return;
    }
    const auto table = norm_profile(traj);
    std::string csv = st.art.provenance_line() + "name,value\n";
    json rows = json::array();
    for (const auto& e : table) {
        csv += e.name + "," + fmt17(e.value) + "\n";
        rows.push_back(json{{"name", e.name}, {"value", e.value}});
        if (!std::isfinite(e.value))
            st.failed.push_back("norm " + e.name + " is not finite");
    }
    st.art.write_text("norms.csv", csv);
    st.report["norms"] = rows;
}

void run_stability(RunState& st) {
    const ForcingKind kind = st.cfg.experiment.forcing == "additive_error"
                                 ? ForcingKind::additive_error
                                 : ForcingKind::initial_datum;
    const ComplexField direction = build_datum(st.cfg.experiment.direction, st.problem.grid());
    json entries = json::array();
    for (int s = 0; s < st.cfg.samples; ++s) {
        const BrownianDriver drv =
            sample_driver(st.mesh, noise_channels(st.problem), st.cfg.seed,
                          static_cast<std::uint32_t>(s));
        const PhasePath phase = forward_phase(*st.problem.noise, drv, 0);
        const StabilityReport rep = stability_sweep(st.problem, phase, direction,
                                                    st.cfg.experiment.epsilons, kind, st.solver);

        std::string csv = st.art.provenance_line() + "epsilon,deviation,blown_up\n";
        int clean_positive = 0;
        json rows = json::array();
        for (std::size_t i = 0; i < rep.epsilons.size(); ++i) {
            csv += fmt17(rep.epsilons[i]) + "," + fmt17(rep.deviations[i]) + "," +
                   std::to_string(rep.blown_up[i] ? 1 : 0) + "\n";
            rows.push_back(json{{"epsilon", rep.epsilons[i]},
                                {"deviation", rep.deviations[i]},
                                {"blown_up", rep.blown_up[i] != 0}});
            if (rep.blown_up[i])
                st.failed.push_back("sample " + std::to_string(s) + ": sentinel tripped at epsilon " +
                                    fmt17(rep.epsilons[i]));
            else if (rep.epsilons[i] > 0.0 && rep.deviations[i] > 0.0)
                ++clean_positive;
        }
        st.art.write_text("stability_" + std::to_string(s) + ".csv", csv);
        entries.push_back(json{{"sample", s}, {"slope", rep.slope}, {"entries", rows}});
        // the fit exists once two clean nonzero deviations are available; the
        // forcing enters linearly, so the log-log slope must sit near one
        if (clean_positive >= 2 && (rep.slope < 0.9 || rep.slope > 1.1))
            st.failed.push_back("sample " + std::to_string(s) + ": deviation slope " +
                                fmt17(rep.slope) + " outside [0.9, 1.1]");
    }
    st.report["samples"] = entries;
}

void run_scatter(RunState& st) {
    const double span = st.mesh.length();
    const double horizon = st.cfg.experiment.horizon > 0.0 ? st.cfg.experiment.horizon : span;
    std::vector<double> cps = st.cfg.experiment.checkpoints;
    if (cps.empty()) {
        // default window: midpoint (snapped to the mesh) and the horizon
        const double mid =
            st.mesh.dt * std::max<long long>(1, std::llround(0.5 * horizon / st.mesh.dt));
        cps = {mid, horizon};
    }
    json entries = json::array();
    for (int s = 0; s < st.cfg.samples; ++s) {
        const BrownianDriver drv =
            sample_driver(st.mesh, noise_channels(st.problem), st.cfg.seed,
                          static_cast<std::uint32_t>(s));
        const ScatteringReport rep =
            scattering_diagnostic(st.problem, drv, horizon, cps, st.solver);

        std::string rcsv = st.art.provenance_line() + "checkpoint,time,initial_recovery\n";
        double worst = 0.0;
        for (std::size_t i = 0; i < rep.times.size(); ++i) {
            rcsv += std::to_string(i) + "," + fmt17(rep.times[i]) + "," +
                    fmt17(rep.initial_recovery[i]) + "\n";
            worst = std::max(worst, rep.initial_recovery[i]);
        }
        st.art.write_text("recovery_" + std::to_string(s) + ".csv", rcsv);

        std::string gcsv = st.art.provenance_line() + "family,row,col,value\n";
        auto emit = [&gcsv, &st](const char* family,
                                 const std::vector<std::vector<double>>& m) {
            for (std::size_t i = 0; i < m.size(); ++i)
                for (std::size_t k = 0; k < m[i].size(); ++k) {
                    gcsv += std::string(family) + "," + std::to_string(i) + "," +
                            std::to_string(k) + "," + fmt17(m[i][k]) + "\n";
                    if (!std::isfinite(m[i][k]))
                        st.failed.push_back(std::string("gap table ") + family +
                                            " contains a non-finite entry");
                }
        };
        emit("free", rep.free_gaps);
        emit("rescaled", rep.rescaled_gaps);
        emit("free_h1", rep.free_gaps_h1);
        emit("rescaled_h1", rep.rescaled_gaps_h1);
        st.art.write_text("gaps_" + std::to_string(s) + ".csv", gcsv);

        entries.push_back(json{{"sample", s},
                               {"horizon", horizon},
                               {"checkpoints", cps},
                               {"worst_recovery", worst}});
        if (!std::isfinite(worst))
            st.failed.push_back("sample " + std::to_string(s) + ": non-finite recovery error");
        else if (st.solver.linear_only && worst > st.cfg.experiment.tolerance)
            st.failed.push_back("sample " + std::to_string(s) + ": recovery error " + fmt17(worst) +
                                " exceeds tolerance " + fmt17(st.cfg.experiment.tolerance) +
                                " with the nonlinearity disabled");
    }
    st.report["samples"] = entries;
}

void run_support(RunState& st) {
    CameronMartinControl h;
    h.mesh = st.mesh;
    h.channels = noise_channels(st.problem);
    h.hdot.assign(static_cast<std::size_t>(st.mesh.steps) * h.channels,
                  st.cfg.experiment.control_rate);
    const SupportReport rep =
        support_comparison(st.problem, h, st.cfg.experiment.levels, st.cfg.seed, st.cfg.samples,
                           st.solver, st.threads);

    std::string csv = st.art.provenance_line() + "level,mean,se,shifted_mean,shifted_se\n";
    for (std::size_t i = 0; i < rep.levels.size(); ++i)
        csv += std::to_string(rep.levels[i]) + "," + fmt17(rep.mean[i]) + "," + fmt17(rep.se[i]) +
               "," + fmt17(rep.shifted_mean[i]) + "," + fmt17(rep.shifted_se[i]) + "\n";
    st.art.write_text("support.csv", csv);

    std::string icsv = st.art.provenance_line() + "level,mean,se,samples\n";
    for (const auto& e : rep.interpolation)
        icsv += std::to_string(e.level) + "," + fmt17(e.mean) + "," + fmt17(e.se) + "," +
                std::to_string(e.samples) + "\n";
    st.art.write_text("interpolation.csv", icsv);

    st.report["levels"] = rep.levels;
    st.report["mean"] = rep.mean;
    st.report["se"] = rep.se;
    st.report["shifted_mean"] = rep.shifted_mean;
    st.report["shifted_se"] = rep.shifted_se;

    // a silent model (all amplitude tables identically zero) must reproduce
    // the deterministic flow on every branch; otherwise the distances are the
    // data and the hypothesis is that refinement shrinks them
    bool silent = true;
    for (const auto& table : st.problem.noise->g)
        for (double v : table)
            if (v != 0.0) silent = false;
    st.report["silent"] = silent;
    if (silent) {
        double worst = 0.0;
        for (const auto& row : rep.distances)
            for (double v : row) worst = std::max(worst, v);
        for (const auto& row : rep.shifted_distances)
            for (double v : row) worst = std::max(worst, v);
        if (!(worst <= 1e-12))
            st.failed.push_back("silent noise: largest branch distance " + fmt17(worst) +
                                " exceeds 1e-12");
    } else {
        for (std::size_t i = 1; i < rep.mean.size(); ++i)
            if (!(rep.mean[i] < rep.mean[i - 1]))
                st.failed.push_back("mean distance does not decrease from level " +
                                    std::to_string(rep.levels[i - 1]) + " to " +
                                    std::to_string(rep.levels[i]));
        for (std::size_t i = 1; i < rep.shifted_mean.size(); ++i)
            if (!(rep.shifted_mean[i] < rep.shifted_mean[i - 1]))
                st.failed.push_back("shifted mean distance does not decrease from level " +
                                    std::to_string(rep.levels[i - 1]) + " to " +
                                    std::to_string(rep.levels[i]));
    }
}

}  // namespace

// =============================================================================
// run orchestration
// =============================================================================

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("SNLS_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0 && v < (1 << 16)) return static_cast<int>(v);
    }
    return 1;
}

int run_experiment(const RunConfig& config, const RunOptions& options) {
    const auto t_start = std::chrono::steady_clock::now();

    // construction failures are configuration errors and propagate to the
    // caller; nothing is written before this point
    const ProblemSpec problem = build_problem(config);
    const SolverConfig solver = build_solver(config);
    const TimeMesh mesh = config_mesh(config);
    const std::string canon = serialize_config(config);
    const std::string config_hash = sha256_hex(canon);

    ArtifactWriter art(config.output, config_hash, config.seed);
    json report;
    std::vector<std::string> failed;
    int code = 0;

    if (config.samples > 0) {
        RunState st{config, problem, solver, mesh, std::max(1, options.threads),
                    art,    report,  failed};
        report["kind"] = config.experiment.kind;
        try {
            if (config.experiment.kind == "simulate") run_simulate(st);
            else if (config.experiment.kind == "stability") run_stability(st);
            else if (config.experiment.kind == "scatter") run_scatter(st);
            else if (config.experiment.kind == "support") run_support(st);
            else run_norms(st);
        } catch (const std::overflow_error& e) {
            st.abort = e.what();
        } catch (const std::runtime_error& e) {
            st.abort = e.what();
        }
        if (!st.abort.empty()) {
            code = 3;
            report["abort"] = st.abort;
        } else if (!failed.empty()) {
            code = 1;
        }
        report["failures"] = failed;
        art.write_text("report.json", report.dump(2) + "\n");
    }

    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t_start)
                             .count();
    json manifest;
    json artifacts = json::object();
    for (const auto& [name, digest] : art.digests) artifacts[name] = digest;
    manifest["artifacts"] = artifacts;
    manifest["config"] = json::parse(canon);
    manifest["config_hash"] = config_hash;
    manifest["kind"] = config.experiment.kind;
    manifest["samples"] = config.samples;
    manifest["seed"] = config.seed;
    manifest["version"] = kVersion;
    manifest["wall_time_ms"] = static_cast<std::int64_t>(elapsed);
    {
        std::ofstream out(art.dir / "manifest.json", std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write manifest.json");
        out << manifest.dump(2) << "\n";
    }
    return code;
}

// =============================================================================
// verification
// =============================================================================

int verify_run(const std::string& dir) {
    const fs::path d(dir);
    json manifest;
    {
        std::ifstream in(d / "manifest.json");
        if (!in) throw ConfigError({"/: cannot read " + (d / "manifest.json").string()});
        try {
            manifest = json::parse(in);
        } catch (const json::parse_error& ex) {
            throw ConfigError({std::string("/manifest.json: not valid JSON (") + ex.what() + ")"});
        }
    }

    std::vector<std::string> failures;
    std::string config_hash;

    // the config echo must reproduce its recorded digest
    if (!manifest.contains("config") || !manifest.contains("config_hash") ||
        !manifest["config_hash"].is_string()) {
        failures.push_back("manifest: missing config echo or config_hash");
    } else {
        config_hash = manifest["config_hash"].get<std::string>();
        const std::string canon = manifest["config"].dump(2) + "\n";
        if (sha256_hex(canon) != config_hash)
            failures.push_back("config echo does not reproduce config_hash");
    }

    // every listed artifact must hash to its recorded digest
    std::vector<std::string> trajectories;
    if (!manifest.contains("artifacts") || !manifest["artifacts"].is_object()) {
        failures.push_back("manifest: missing artifact table");
    } else {
        for (const auto& [name, digest] : manifest["artifacts"].items()) {
            const fs::path p = d / name;
            if (!fs::exists(p)) {
                failures.push_back(name + ": artifact missing");
                continue;
            }
            if (!digest.is_string() || sha256_file(p.string()) != digest.get<std::string>())
                failures.push_back(name + ": digest mismatch");
            if (name.size() > 4 && name.substr(name.size() - 4) == ".bin")
                trajectories.push_back(name);
        }
    }

    // stored mass records must be reproducible from the stored snapshots
    for (const auto& name : trajectories) {
        const fs::path p = d / name;
        if (!fs::exists(p)) continue;
        Trajectory traj;
        std::string embedded;
        try {
            traj = load_trajectory_impl(p.string(), &embedded);
        } catch (const std::exception& e) {
            failures.push_back(name + ": " + e.what());
            continue;
        }
        if (!config_hash.empty() && !embedded.empty() && embedded != config_hash)
            failures.push_back(name + ": embedded provenance differs from the manifest");
        const double t0 = traj.series.times.empty() ? 0.0 : traj.series.times.front();
        const double dt = traj.config.dt;
        for (std::size_t i = 0; i < traj.series.size(); ++i) {
            const long long idx = dt > 0.0 ? std::llround((traj.series.times[i] - t0) / dt) : 0;
            if (idx < 0 || idx >= static_cast<long long>(traj.mass_record.size())) {
                failures.push_back(name + ": snapshot at t=" + fmt17(traj.series.times[i]) +
                                   " has no mass record entry");
                continue;
            }
            const double recomputed = mass(traj.series.fields[i]);
            const double stored = traj.mass_record[static_cast<std::size_t>(idx)];
            if (!(std::abs(recomputed - stored) <=
                  1e-12 * std::max(1.0, std::abs(stored))))
                failures.push_back(name + ": recomputed mass " + fmt17(recomputed) + " at t=" +
                                   fmt17(traj.series.times[i]) +
                                   " deviates from the stored mass record entry " + fmt17(stored));
        }
    }

    json verdict;
    verdict["directory"] = dir;
    verdict["ok"] = failures.empty();
    verdict["failures"] = failures;
    std::printf("%s\n", verdict.dump(2).c_str());
    return failures.empty() ? 0 : 1;
}

// =============================================================================
// command line
// =============================================================================

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"pseudo-spectral laboratory for stochastic NLS equations"};
    app.require_subcommand(1);

    std::string config_path, out_dir, verify_dir;
    std::uint64_t seed_val = 0;
    int samples_val = 0, threads_val = 0;

    struct RunCmd {
        CLI::App* cmd;
        std::string kind;
        CLI::Option *seed, *samples, *out;
    };
    std::vector<RunCmd> cmds;
    const std::pair<const char*, const char*> kinds[] = {
        {"simulate", "integrate the equation and store trajectories"},
        {"stability", "perturbation-growth sweep of the rescaled flow"},
        {"scatter", "evolution-operator pullback diagnostic"},
        {"support", "dyadic-interpolation branch comparison"},
        {"norms", "norm profile of one stored trajectory"},
    };
    for (const auto& [name, blurb] : kinds) {
        CLI::App* c = app.add_subcommand(name, blurb);
        c->add_option("--config", config_path, "run configuration (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        RunCmd rc{c, name, nullptr, nullptr, nullptr};
        rc.seed = c->add_option("--seed", seed_val, "override the configured seed");
        rc.samples = c->add_option("--samples", samples_val, "override the configured sample count");
        rc.out = c->add_option("--out", out_dir, "override the configured output directory");
        c->add_option("--threads", threads_val,
                      "worker threads (SNLS_THREADS is the fallback; default 1)");
        cmds.push_back(rc);
    }
    CLI::App* verify = app.add_subcommand("verify", "re-examine a run directory");
    verify->add_option("dir", verify_dir, "run directory holding manifest.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (verify->parsed()) return verify_run(verify_dir);

        const RunCmd* active = nullptr;
        for (const auto& rc : cmds)
            if (rc.cmd->parsed()) active = &rc;
        if (!active) return 2;  // unreachable: a subcommand is required

        std::ifstream in(config_path, std::ios::binary);
        if (!in) {
            std::fprintf(stderr, "cannot read configuration %s\n", config_path.c_str());
            return 2;
        }
        const std::string text{std::istreambuf_iterator<char>(in),
                               std::istreambuf_iterator<char>()};
        const std::string base = fs::path(config_path).parent_path().string();
        RunConfig config = parse_config(text, base.empty() ? "." : base);
        config.experiment.kind = active->kind;
        if (active->seed->count() > 0) config.seed = seed_val;
        if (active->samples->count() > 0) {
            if (samples_val < 0) {
                std::fprintf(stderr, "--samples must be >= 0\n");
                return 2;
            }
            config.samples = samples_val;
        }
        if (active->out->count() > 0) config.output = out_dir;

        RunOptions options;
        options.threads = resolve_threads(threads_val);
        return run_experiment(config, options);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "aborted: %s\n", e.what());
        return 3;
    }
}

}  // namespace snls
