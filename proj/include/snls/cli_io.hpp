#pragma once
// Operational surface of the lab: JSON run configurations, the command-line
// entry point, artifact persistence, and deterministic replay.
//
// A run configuration names a problem (grid, datum, nonlinearity), a solver
// (spacing, scheme, dealiasing), an optional noise block (bump channels with
// time-dependent amplitudes), an experiment selector with its parameters, a
// seed, a sample count, and an output directory.  Parsing is strict: unknown
// keys are rejected, every violation is reported (not just the first), and
// each message carries a path into the document.  The serialized form is
// canonical -- full schema, sorted keys, shortest float representation -- so
// serialize(parse(text)) is a fixed point and its SHA-256 digest identifies
// the configuration.
//
// Determinism contract: every numeric artifact is a pure function of
// (configuration, seed).  Reports and tables are written from the
// orchestrating thread only; worker pools never touch the filesystem.  The
// manifest is written last and records a digest of every other artifact, so
// two runs of the same configuration and seed agree byte for byte on all
// numeric payloads (the manifest itself differs only in its wall-time entry).
//
// Exit-code contract: 0 all enabled checks pass, 1 a check failed, 2 usage or
// configuration error, 3 numerical abort (amplitude ceiling / non-finite
// state).

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "snls/dynamics.hpp"

namespace snls {

// =============================================================================
// run configuration
// =============================================================================

// Initial datum or perturbation-direction shape.
struct DatumConfig {
    std::string kind = "gaussian";  // gaussian | bump | zero
    cplx amplitude{0.5, 0.0};
    double width = 1.0;             // gaussian: amp e^{-|x-c|^2 / (2 width^2)}
    double radius = 3.0;            // bump: amp e^{-r^2/(radius^2-r^2)}, compact support
    std::vector<double> center;     // empty = origin; else one entry per axis
};

// One multiplicative-noise channel G_k = g_k(t) phi_k(x) with a bump profile.
struct ChannelConfig {
    std::string kind = "bump";
    cplx amplitude{0.0, 0.5};
    bool conservative = true;  // demands a purely imaginary amplitude
    double radius = 3.0;
    std::vector<double> center;
    // Amplitude table on mesh points: constant, explicit samples, or a CSV
    // file (resolved against the config's directory at parse time and stored
    // inline, so the canonical form pins the data, not the path).
    double g_const = 1.0;
    std::vector<double> g_samples;  // steps+1 values when non-empty
    int g_zero_after = -1;          // constant table: zero strictly after this step
};

struct ProblemConfig {
    std::string criticality = "mass";  // mass | energy (energy needs dimension >= 3)
    int dimension = 1;
    int points = 128;  // per axis, power of two
    double box = 10.0;
    int lambda = -1;  // -1 defocusing, +1 focusing
    DatumConfig datum;
};

struct SolverBlock {
    double dt = 1e-3;
    int steps = 100;
    std::string scheme = "strang";  // strang | lie
    std::string dealias = "auto";   // auto | on | off
    int store_stride = 1;
    double blowup_factor = 1e6;
};

struct ExperimentConfig {
    std::string kind = "simulate";  // simulate | stability | scatter | support | norms
    // stability
    std::vector<double> epsilons{0.0, 1e-4, 1e-3, 1e-2};
    std::string forcing = "initial_datum";  // initial_datum | additive_error
    DatumConfig direction;                  // perturbation shape
    // scatter
    double horizon = 0.0;  // 0 = the last mesh point
    std::vector<double> checkpoints;
    bool linear_only = false;
    double tolerance = 1e-3;  // recovery bound checked when linear_only
    // support
    std::vector<int> levels{3, 4, 5, 6};
    double control_rate = 0.0;  // constant Cameron-Martin slope, all channels
};

struct RunConfig {
    ProblemConfig problem;
    SolverBlock solver;
    std::vector<ChannelConfig> noise;  // empty = deterministic problem
    ExperimentConfig experiment;
    std::uint64_t seed = 0;
    int samples = 1;  // 0 = vacuous run: manifest only
    std::string output = "out";
};

// Carries every problem found in a document; each message starts with a
// JSON-pointer-style path ("/solver/dt: ...").
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(std::vector<std::string> errs);
    const std::vector<std::string>& errors() const { return errors_; }

  private:
    std::vector<std::string> errors_;
};

// Strict parse of a UTF-8 JSON document; base_dir resolves relative CSV
// amplitude-table paths.  Throws ConfigError with the full violation list.
RunConfig parse_config(const std::string& text, const std::string& base_dir = ".");

// Canonical serialization: full schema, sorted keys, newline-terminated.
std::string serialize_config(const RunConfig& config);

// ---- bridges into the library types ----------------------------------------

TimeMesh config_mesh(const RunConfig& config);
SolverConfig build_solver(const RunConfig& config);
// grid + datum + noise model; throws ConfigError for constraints that only
// surface during construction
ProblemSpec build_problem(const RunConfig& config);
// shared with the stability direction: realize a datum shape on a grid
ComplexField build_datum(const DatumConfig& datum, const TorusGrid& grid);

// =============================================================================
// provenance
// =============================================================================

inline constexpr const char* kVersion = "0.1.0";

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::string& path);  // streaming; throws if unreadable

// =============================================================================
// binary trajectory artifacts
// =============================================================================
//
// Flat host-endian container ("SNLSTRJ1"): grid, mesh spacing and origin, the
// per-step mass record, the energy record, run metadata, and every stored
// snapshot with its step index.  load_trajectory fills series, records, and
// metadata; problem/config round-trip only as far as dt (enough to map
// snapshot times back to record indices).

// config_hash (64 hex chars or empty) is embedded verbatim so the file
// carries its provenance even when separated from its manifest
void save_trajectory(const Trajectory& traj, const std::string& path,
                     const std::string& config_hash = "");
Trajectory load_trajectory(const std::string& path);

// =============================================================================
// orchestration
// =============================================================================

struct RunOptions {
    int threads = 1;
};

// flag > 0 wins; else the SNLS_THREADS environment variable when it parses to
// a positive integer; else 1
int resolve_threads(int flag_value);

// Runs config.experiment.kind and writes artifacts under config.output:
// manifest.json always; report.json plus CSV tables (and trajectory_<s>.bin
// for simulate / norms) when samples > 0.  Returns 0/1/3 per the exit-code
// contract; configuration problems (including library-level validation
// failures) propagate as exceptions for the command line to map to 2.
int run_experiment(const RunConfig& config, const RunOptions& options);

// Read-only re-examination of a run directory: the config echo against its
// recorded digest, every artifact against its manifest digest, and each
// stored snapshot's recomputed mass against the stored record (1e-12).
// Prints a JSON verdict with the full failure list; returns 0 or 1.
int verify_run(const std::string& dir);

// Full command line: subcommands simulate | verify | stability | scatter |
// support | norms; flags --config, --seed, --samples, --out, --threads
// (SNLS_THREADS as fallback).  The subcommand selects the experiment,
// overriding the config's own selector.  Returns the process exit code.
int cli_main(int argc, const char* const* argv);

}  // namespace snls
