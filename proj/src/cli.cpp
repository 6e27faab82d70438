#include "varspec/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "varspec/closed_form.hpp"
#include "varspec/simulator.hpp"
#include "varspec/validate.hpp"

namespace varspec::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out) throw Error(ErrorCode::InvalidArgument, "write failed for " + path.string());
}

Mat matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw Error(ErrorCode::InvalidArgument, what + " must be a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j[i];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw Error(ErrorCode::DimensionMismatch, what + " has ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!row[c].is_number()) throw Error(ErrorCode::InvalidArgument, what + " entries must be numbers");
            m(i, c) = row[c].get<double>();
        }
    }
    return m;
}

std::vector<int> int_list(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw Error(ErrorCode::InvalidArgument, what + " must be a non-empty array");
    std::vector<int> out;
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw Error(ErrorCode::InvalidArgument, what + " entries must be integers");
        out.push_back(v.get<int>());
    }
    return out;
}

int get_int(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw Error(ErrorCode::InvalidArgument, std::string("design field '") + key + "' must be an integer");
    return j[key].get<int>();
}

DesignSpec design_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw Error(ErrorCode::InvalidArgument, "design needs a string 'kind'");
    const std::string kind = j["kind"];
    if (kind == "one_way") return OneWay{int_list(j.value("group_sizes", json()), "group_sizes")};
    if (kind == "nested") return NestedBalanced{int_list(j.value("levels", json()), "levels")};
    if (kind == "crossed") return CrossedTwoWay{get_int(j, "I"), get_int(j, "J"), get_int(j, "K"), get_int(j, "L")};
    if (kind == "explicit") {
        Explicit ex;
        ex.B = matrix_from_json(j.value("B", json()), "B");
        const json& us = j.value("U", json());
        if (!us.is_array() || us.empty()) throw Error(ErrorCode::InvalidArgument, "U must be a list of matrices");
        for (std::size_t r = 0; r < us.size(); ++r) ex.U.push_back(matrix_from_json(us[r], "U[" + std::to_string(r) + "]"));
        return ex;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown design kind '" + kind + "'");
}

Mat sigma_from_json(const json& j, std::size_t r) {
    const std::string what = "sigmas[" + std::to_string(r) + "]";
    if (j.is_object()) {
        if (!j.contains("diag") || !j["diag"].is_array() || j["diag"].empty())
            throw Error(ErrorCode::InvalidArgument, what + " object form needs a non-empty 'diag'");
        Vec d(static_cast<Eigen::Index>(j["diag"].size()));
        for (std::size_t i = 0; i < j["diag"].size(); ++i) {
            if (!j["diag"][i].is_number()) throw Error(ErrorCode::InvalidArgument, what + " diag entries must be numbers");
            d[static_cast<Eigen::Index>(i)] = j["diag"][i].get<double>();
        }
        return d.asDiagonal();
    }
    return matrix_from_json(j, what);
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

json solver_json(const SolverConfig& s) {
    return {{"tol", s.tol}, {"max_iters", s.max_iters}, {"damping", s.damping},
            {"auto_damp", s.auto_damp}, {"newton", s.newton}};
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && *b == ' ') ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) throw Error(ErrorCode::InvalidArgument, "bad number '" + s + "' in " + where);
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

int fail(std::ostream& err, int code, const std::string& msg) {
    err << "error: " << msg << "\n";
    return code;
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

int thread_budget() {
    const int hw = std::max(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("SPECTRA_THREADS");
    if (!env || !*env) return hw;
    int v = 0;
    auto [ptr, ec] = std::from_chars(env, env + std::char_traits<char>::length(env), v);
    if (ec != std::errc() || v <= 0) return hw;
    return v;
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
    RunConfig cfg;
    cfg.hash = fnv1a(text);
    cfg.design = design_from_json(j.value("design", json()));

    const json& sig = j.value("sigmas", json());
    if (!sig.is_array() || sig.empty()) throw Error(ErrorCode::InvalidArgument, "sigmas must be a non-empty list");
    std::vector<Mat> raw;
    for (std::size_t r = 0; r < sig.size(); ++r) raw.push_back(sigma_from_json(sig[r], r));
    cfg.components = validate_components(raw);

    if (j.contains("target")) {
        if (!j["target"].is_number_integer()) throw Error(ErrorCode::InvalidArgument, "target must be an integer");
        cfg.target = j["target"].get<int>();
    }
    if (j.contains("solver")) {
        const json& s = j["solver"];
        if (!s.is_object()) throw Error(ErrorCode::InvalidArgument, "solver must be an object");
        try {
            cfg.solver.tol = s.value("tol", cfg.solver.tol);
            cfg.solver.max_iters = s.value("max_iters", cfg.solver.max_iters);
            cfg.solver.damping = s.value("damping", cfg.solver.damping);
            cfg.solver.auto_damp = s.value("auto_damp", cfg.solver.auto_damp);
            cfg.solver.newton = s.value("newton", cfg.solver.newton);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidArgument, std::string("bad solver settings: ") + e.what());
        }
        cfg.solver.validate();
    }

    const Design d = realize(cfg.design);
    require(d.k() == cfg.components.k(), ErrorCode::DimensionMismatch,
            "design has " + std::to_string(d.k()) + " components but " + std::to_string(cfg.components.k()) +
                " sigmas were given");
    require(cfg.target >= 1 && cfg.target <= d.k(), ErrorCode::InvalidArgument,
            "target must lie in 1.." + std::to_string(d.k()));
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::InvalidArgument, "config file not found: " + path.string());
    return parse_config(read_file(path));
}

Problem make_problem(const RunConfig& cfg, bool force_general) {
    const Design d = realize(cfg.design);
    if (!force_general) {
        if (auto cf = recognize(d, cfg.target)) return Problem::from_closed_form(*cf, d.sizes(), cfg.components.sigmas);
    }
    return Problem::from_model(to_general_model(d, cfg.components, cfg.target));
}

void write_density_csv(const fs::path& path, const SpectralDensity& d) {
    std::string s = "x,f\n";
    for (std::size_t i = 0; i < d.size(); ++i) s += format_double(d.grid[i]) + "," + format_double(d.values[i]) + "\n";
    write_text(path, s);
}

SpectralDensity read_density_csv(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::InvalidArgument, "density file not found: " + path.string());
    std::istringstream in(read_file(path));
    std::string line;
    SpectralDensity d;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        if (header) {
            header = false;
            if (line.rfind("x,f", 0) == 0) continue;
        }
        const auto f = split_csv(line);
        if (f.size() != 2) throw Error(ErrorCode::InvalidArgument, "density rows need two fields: " + path.string());
        d.grid.push_back(parse_double(f[0], path.string()));
        d.values.push_back(parse_double(f[1], path.string()));
        d.converged.push_back(true);
        d.iterations.push_back(0);
    }
    d.validate();
    return d;
}

void write_eigen_csv(const fs::path& path, const EmpiricalSpectrum& s) {
    std::string out = "rep,index,eigenvalue\n";
    for (std::size_t i = 0; i < s.eigenvalues.size(); ++i)
        out += std::to_string(s.replicate) + "," + std::to_string(i) + "," + format_double(s.eigenvalues[i]) + "\n";
    write_text(path, out);
}

EmpiricalSpectrum read_eigen_csv(const fs::path& path, int rep) {
    if (!fs::exists(path)) throw Error(ErrorCode::InvalidArgument, "eigenvalue file not found: " + path.string());
    std::istringstream in(read_file(path));
    std::string line;
    EmpiricalSpectrum s;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        if (header) {
            header = false;
            if (line.rfind("rep", 0) == 0) continue;
        }
        const auto f = split_csv(line);
        if (f.size() != 3) throw Error(ErrorCode::InvalidArgument, "eigenvalue rows need three fields: " + path.string());
        const int r = static_cast<int>(parse_double(f[0], path.string()));
        if (rep < 0) rep = r;
        if (r != rep) continue;
        s.eigenvalues.push_back(parse_double(f[2], path.string()));
    }
    require(!s.eigenvalues.empty(), ErrorCode::InvalidArgument, "no eigenvalues read from " + path.string());
    std::sort(s.eigenvalues.begin(), s.eigenvalues.end());
    s.p = static_cast<int>(s.eigenvalues.size());
    s.replicate = rep;
    return s;
}

int cmd_solve(const SolveOptions& o, std::ostream& log, std::ostream& err) {
    RunConfig cfg;
    Problem pr;
    try {
        cfg = load_config(o.config);
        require(o.epsilon > 0.0, ErrorCode::InvalidArgument, "--eps must be positive");
        pr = make_problem(cfg, o.force_general);
    } catch (const Error& e) {
        return fail(err, kInvalidInput, e.what());
    }

    const std::string started = utc_now();
    SpectralDensity d;
    try {
        if (o.count > 0) {
            require(o.xmin && o.xmax && *o.xmax > *o.xmin, ErrorCode::InvalidArgument,
                    "--grid needs xmin < xmax and count >= 1");
            d = solve_grid({linspace(*o.xmin, *o.xmax, o.count), o.epsilon}, pr, cfg.solver, thread_budget());
        } else {
            d = auto_density(pr, o.epsilon, cfg.solver);
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument) return fail(err, kInvalidInput, e.what());
        return fail(err, kNoConvergence, e.what());
    }

    std::vector<int> failed;
    int iter_total = 0, iter_max = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!d.converged[i]) failed.push_back(static_cast<int>(i));
        iter_total += d.iterations[i];
        iter_max = std::max(iter_max, d.iterations[i]);
    }
    const fs::path manifest_path = fs::path(o.out.string() + ".manifest.json");
    try {
        write_density_csv(o.out, d);
        json m = {{"command", "solve"},
                  {"config", o.config.string()},
                  {"config_hash", hex64(cfg.hash)},
                  {"seed", nullptr},
                  {"started", started},
                  {"finished", utc_now()},
                  {"design", design_kind(cfg.design)},
                  {"target", cfg.target},
                  {"strategy", pr.strategy},
                  {"epsilon", o.epsilon},
                  {"solver", solver_json(cfg.solver)},
                  {"points", d.size()},
                  {"convergence",
                   {{"converged", d.size() - failed.size()},
                    {"failed_indices", failed},
                    {"iterations_total", iter_total},
                    {"iterations_max", iter_max}}},
                  {"mass", density_mass(d)},
                  {"outputs", {o.out.string()}}};
        write_text(manifest_path, m.dump(2) + "\n");
    } catch (const Error& e) {
        return fail(err, kInvalidInput, e.what());
    }
    log << "wrote " << d.size() << " points to " << o.out.string() << "\n";
    if (!failed.empty()) return fail(err, kNoConvergence, std::to_string(failed.size()) + " grid points did not converge");
    return kOk;
}

int cmd_simulate(const SimulateOptions& o, std::ostream& log, std::ostream& err) {
    RunConfig cfg;
    std::optional<Simulator> sim;
    try {
        cfg = load_config(o.config);
        require(o.reps >= 1, ErrorCode::InvalidArgument, "--reps must be >= 1");
        SimConfig sc{cfg.design, cfg.components, o.seed, o.reps, o.target.value_or(cfg.target)};
        sim.emplace(std::move(sc));
    } catch (const Error& e) {
        return fail(err, kInvalidInput, e.what());
    }

    const std::string started = utc_now();
    std::vector<EmpiricalSpectrum> spectra;
    try {
        spectra = sim->run(thread_budget());
    } catch (const Error& e) {
        return fail(err, kInvalidInput, e.what());
    }
    json outputs = json::array();
    try {
        fs::create_directories(o.out);
        for (const auto& s : spectra) {
            const fs::path file = o.out / ("rep_" + std::to_string(s.replicate) + ".csv");
            write_eigen_csv(file, s);
            outputs.push_back(file.string());
        }
        json m = {{"command", "simulate"},
                  {"config", o.config.string()},
                  {"config_hash", hex64(cfg.hash)},
                  {"seed", o.seed},
                  {"started", started},
                  {"finished", utc_now()},
                  {"design", design_kind(cfg.design)},
                  {"target", sim->config().target},
                  {"replicates", o.reps},
                  {"p", sim->p()},
                  {"n", sim->design().n},
                  {"outputs", outputs}};
        write_text(o.out / "manifest.json", m.dump(2) + "\n");
    } catch (const std::exception& e) {
        return fail(err, kInvalidInput, e.what());
    }
    log << "wrote " << spectra.size() << " replicate(s) to " << o.out.string() << "\n";
    return kOk;
}

int cmd_compare(const CompareOptions& o, std::ostream& log, std::ostream& err) {
    SpectralDensity d;
    EmpiricalSpectrum s;
    try {
        d = read_density_csv(o.density);
        s = read_eigen_csv(o.eigs, o.rep);
        require(o.trim >= 0, ErrorCode::InvalidArgument, "--trim must be >= 0");
    } catch (const Error& e) {
        return fail(err, kInvalidInput, e.what());
    }
    ComparisonReport rep;
    try {
        rep = compare(s, d, o.trim);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::RangeMismatch) return fail(err, kRangeMismatch, e.what());
        return fail(err, kInvalidInput, e.what());
    }
    json j = {{"density", o.density.string()},
              {"eigenvalues", o.eigs.string()},
              {"replicate", s.replicate},
              {"p", s.p},
              {"ks", rep.ks},
              {"moment_gaps", rep.moment_gaps},
              {"mass", rep.mass},
              {"trimmed", rep.trimmed},
              {"trimmed_values", rep.trimmed_values},
              {"thresholds", {{"ks", rep.thresholds.ks}, {"moment", rep.thresholds.moment}}}};
    try {
        write_text(o.out, j.dump(2) + "\n");
    } catch (const Error& e) {
        return fail(err, kInvalidInput, e.what());
    }
    log << "ks = " << format_double(rep.ks) << "\n";
    return kOk;
}

int cmd_check(const CheckOptions& o, std::ostream& log, std::ostream& err) {
    RunConfig cfg;
    Problem pr;
    std::optional<ClosedFormUpdate> cf;
    try {
        cfg = load_config(o.config);
        require(o.z_samples >= 1, ErrorCode::InvalidArgument, "--z-samples must be >= 1");
        const Design d = realize(cfg.design);
        pr = Problem::from_model(to_general_model(d, cfg.components, cfg.target));
        cf = recognize(d, cfg.target);
    } catch (const Error& e) {
        return fail(err, kInvalidInput, e.what());
    }
    const double R = std::max(pr.support_bound(), 1e-3);
    const auto zs = sample_z(o.z_samples, -0.1 * R, 1.1 * R);
    const InvariantLedger led = invariant_suite(pr, cf, zs, cfg.solver);

    json checks = json::array();
    for (const auto& c : led.checks) {
        checks.push_back({{"name", c.name},
                          {"z", {c.z.real(), c.z.imag()}},
                          {"value", c.value},
                          {"threshold", c.threshold},
                          {"passed", c.passed},
                          {"detail", c.detail}});
        if (!c.passed) err << "FAIL " << c.name << " at z = " << c.z << ": " << c.detail << "\n";
    }
    if (!o.out.empty()) {
        try {
            json j = {{"command", "check"}, {"config", o.config.string()}, {"config_hash", hex64(cfg.hash)},
                      {"passed", led.all_passed()}, {"checks", checks}};
            write_text(o.out, j.dump(2) + "\n");
        } catch (const Error& e) {
            return fail(err, kInvalidInput, e.what());
        }
    }
    log << led.checks.size() << " checks, " << led.failures().size() << " failed\n";
    return led.all_passed() ? kOk : kCheckFailed;
}

}  // namespace varspec::cli
