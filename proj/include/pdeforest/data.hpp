#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pdeforest/eval.hpp"

namespace pdeforest::data {

enum class Problem { Burgers, KdV, ChafeeInfante, PdeDivide, PdeCompound };

inline constexpr Problem kAllProblems[] = {Problem::Burgers, Problem::KdV, Problem::ChafeeInfante,
                                           Problem::PdeDivide, Problem::PdeCompound};

/// "burgers", "kdv", "chafee_infante", "pde_divide", "pde_compound".
std::string_view problem_name(Problem p) noexcept;
std::optional<Problem> parse_problem(std::string_view name) noexcept;

enum class Boundary { Periodic, Dirichlet };

/// Problems and their right-hand sides:
///   burgers         u_t = -u u_x + nu u_xx                 periodic
///   kdv             u_t = a u u_x + b u_xxx                periodic, RK4 stepping
///   chafee_infante  u_t = u_xx - a u + a u^3               u = 0 at both ends
///   pde_divide      u_t = -u_x / x + 0.25 u_xx             u = 0 at both ends
///   pde_compound    u_t = (u u_x)_x                        u = 0 at both ends
struct SolverConfig {
    Problem problem = Problem::PdeDivide;
    int nx = 100;
    int nt_store = 251;
    double x_min = 1.0;
    double x_max = 2.0;
    double t_max = 2.5;
    double dt_internal = 1e-5;
    int subsample_every = 1000;
    std::map<std::string, double> params;

    Boundary boundary() const noexcept;
    /// Periodic grids exclude x_max; Dirichlet grids include both ends.
    double dx() const noexcept;
    double dt_store() const noexcept { return dt_internal * subsample_every; }
    Eigen::VectorXd x_axis() const;
    Eigen::VectorXd t_axis() const;
    double param(const std::string &name) const;

    /// Largest stable dt_internal for this grid, parameters and initial data.
    double stability_limit() const;

    /// Throws std::invalid_argument for malformed grids and StabilityError
    /// when dt_internal exceeds stability_limit().
    void check() const;
};

class StabilityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SolverError : public std::runtime_error {
public:
    SolverError(long step, const std::string &what);
    long step() const noexcept { return step_; }

private:
    long step_;
};

/// Stored-grid shapes: burgers 256x201, kdv 512x201, chafee_infante 301x200,
/// pde_divide and pde_compound 100x251.
SolverConfig preset(Problem p);

/// Initial condition on the configured grid, zero on Dirichlet boundaries.
Eigen::VectorXd initial_condition(const SolverConfig &cfg);

/// Solved field on the stored grid (nx by nt_store).
eval::Field solve_field(const SolverConfig &cfg);

eval::Dataset solve(const SolverConfig &cfg);

// ---- dataset files ----------------------------------------------------------

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kGeneratorVersion = "pdeforest 1.0.0";

struct DatasetMetadata {
    std::string problem = "custom";
    std::map<std::string, double> params;
    std::string generator = std::string(kGeneratorVersion);
};

DatasetMetadata metadata_for(const SolverConfig &cfg);

class DatasetFileError : public std::runtime_error {
public:
    enum class Kind { Io, Header, Shape, Value };
    DatasetFileError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct LoadedDataset {
    eval::Dataset dataset;
    DatasetMetadata metadata;
};

/// Text format: "# key=value" header lines (schema, problem, nx, nt, dx, dt,
/// params, generator), then the x axis, the t axis and nx rows of u, all
/// comma separated with 17 significant digits.
void write_dataset(const eval::Dataset &d, const std::filesystem::path &path,
                   const DatasetMetadata &meta = {});

LoadedDataset read_dataset_file(const std::filesystem::path &path,
                                int boundary_trim = eval::kDefaultBoundaryTrim);

eval::Dataset read_dataset(const std::filesystem::path &path, int boundary_trim = eval::kDefaultBoundaryTrim);

} // namespace pdeforest::data
