#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "varspec/design.hpp"
#include "varspec/solver.hpp"

namespace varspec::cli {

enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,
    kInvalidInput = 2,
    kNoConvergence = 3,
    kRangeMismatch = 4,
};

struct RunConfig {
    DesignSpec design;
    VarianceComponents components;
    int target = 1;
    SolverConfig solver;
    std::uint64_t hash = 0;  // FNV-1a of the document text
};

/// Parses and validates a config document. Throws Error(InvalidArgument, ...)
/// on malformed JSON or missing fields, plus whatever validation raises.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a(const std::string& bytes);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

/// SPECTRA_THREADS, 0 or unset meaning hardware concurrency.
int thread_budget();

/// Solver input for a config: closed form when the design has one unless
/// force_general, otherwise the factorized general route.
Problem make_problem(const RunConfig& cfg, bool force_general = false);

struct SolveOptions {
    std::filesystem::path config;
    std::optional<double> xmin, xmax;
    int count = 0;  // 0 = automatic grid
    double epsilon = 1e-4;
    std::filesystem::path out;
    bool force_general = false;
};

struct SimulateOptions {
    std::filesystem::path config;
    std::uint64_t seed = 0;
    int reps = 1;
    std::optional<int> target;
    std::filesystem::path out;  // directory
};

struct CompareOptions {
    std::filesystem::path density;
    std::filesystem::path eigs;
    int trim = 0;
    int rep = -1;  // -1: first replicate found in the file
    std::filesystem::path out;
};

struct CheckOptions {
    std::filesystem::path config;
    int z_samples = 20;
    std::filesystem::path out;  // optional JSON ledger
};

// Each command reports problems on `err` and returns an exit code.
int cmd_solve(const SolveOptions& o, std::ostream& log, std::ostream& err);
int cmd_simulate(const SimulateOptions& o, std::ostream& log, std::ostream& err);
int cmd_compare(const CompareOptions& o, std::ostream& log, std::ostream& err);
int cmd_check(const CheckOptions& o, std::ostream& log, std::ostream& err);

// CSV helpers shared with tests.
void write_density_csv(const std::filesystem::path& path, const SpectralDensity& d);
SpectralDensity read_density_csv(const std::filesystem::path& path);
void write_eigen_csv(const std::filesystem::path& path, const EmpiricalSpectrum& s);
/// Eigenvalues of one replicate (rep = -1 picks the first one present).
EmpiricalSpectrum read_eigen_csv(const std::filesystem::path& path, int rep = -1);

}  // namespace varspec::cli
