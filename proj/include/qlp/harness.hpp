#pragma once

// Batch front end: JSON experiment configs, dispatch to the solvers and
// verifiers, deterministic CSV/JSON reports written atomically.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qlp/quasilinear.hpp"

namespace qlp {

using ordered_json = nlohmann::ordered_json;

struct ExperimentConfig {
    std::string kind;  // solve, jet, garding, gn, embedding, convergence, depend, uniqueness
    OperatorSpec spec;
    TorusGrid grid;
    expr::Expr initial;
    ScalarField u0;
    double T = 0.1;
    double dt = 1e-3;
    double tol = 1e-10;
    int m = 0;
    std::uint64_t seed = 0;
    int threads = 1;
    std::filesystem::path output_dir = "out";
    /// The parsed document, for the config echo and kind-specific sections.
    ordered_json document;
};

const std::vector<std::string>& experiment_kinds();

/// Parses and validates a config document. Errors name the offending field path.
ExperimentConfig parse_config(const ordered_json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

struct Report {
    std::string kind;
    ordered_json config_echo;
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<Table> tables;
    std::vector<std::pair<std::string, bool>> status;
    std::vector<std::string> messages;
    /// Extra JSON documents written next to the report (e.g. trajectory sidecars).
    std::vector<std::pair<std::string, ordered_json>> sidecars;

    bool passed() const;
    void metric(const std::string& name, double value) { metrics.emplace_back(name, value); }
    void check(const std::string& name, bool ok) { status.emplace_back(name, ok); }
    ordered_json to_json() const;
};

/// Dispatches on config.kind. Downstream errors become a failed status with
/// the message recorded.
Report run(const ExperimentConfig& config);

/// Writes <kind>.json, <kind>_<table>.csv and the sidecars into `dir`.
/// Returns the paths written.
std::vector<std::filesystem::path> write_report(const Report& report, const std::filesystem::path& dir);

// Formatting and IO helpers.

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
std::string to_csv(const Table& table);
/// Writes to a temporary file in the same directory, then renames over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

/// Trajectory as a table: t, node_0, ..., node_{N-1}.
Table trajectory_table(const Trajectory& traj);
ordered_json trajectory_sidecar(const Trajectory& traj, const std::vector<double>& newton_history);

/// Samples an expression in x (and t) on the grid. Rejects expressions reading u.
ScalarField sample_expression(const expr::Expr& e, const TorusGrid& grid, double t);

/// Forcing b* = u*_t - Q[u*] that makes u* an exact solution of u_t = Q[u] + b*.
std::shared_ptr<const Forcing> manufactured_forcing(const OperatorSpec& spec, const expr::Expr& u_star);

struct ConvergenceRow {
    double dt = 0.0;
    double error = 0.0;
    int newton_iterations = 0;
};

struct ConvergenceResult {
    std::vector<ConvergenceRow> rows;
    /// Least-squares slope of log(error) against log(dt).
    double order = 0.0;
    bool monotone = true;
};

/// Solves u_t = Q[u] + b* from u*(0) for every dt and measures max-norm errors
/// against u* over all time nodes.
ConvergenceResult convergence_study(const OperatorSpec& spec, const expr::Expr& u_star, const TorusGrid& grid,
                                    double T, const std::vector<double>& dts, double tol, int threads = 1);

}  // namespace qlp
