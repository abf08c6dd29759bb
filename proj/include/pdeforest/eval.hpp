#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "pdeforest/expr.hpp"

namespace pdeforest::eval {

/// Gridded field, rows = spatial points, columns = time slices.
using Field = Eigen::ArrayXXd;

/// Denominator entries with |d| below this are replaced by it.
inline constexpr double kDivisionFloor = 1e-10;

inline constexpr int kDefaultBoundaryTrim = 2;

class DatasetError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Observation u(x, t) on a uniform grid, with cached u_t and u_x.
class Dataset {
public:
    const Field &u() const noexcept { return u_; }
    const Field &ut() const noexcept { return ut_; }
    const Field &ux() const noexcept { return ux_; }
    const Eigen::VectorXd &x() const noexcept { return x_; }
    const Eigen::VectorXd &t() const noexcept { return t_; }

    Eigen::Index nx() const noexcept { return u_.rows(); }
    Eigen::Index nt() const noexcept { return u_.cols(); }
    double dx() const noexcept { return dx_; }
    double dt() const noexcept { return dt_; }

    /// Grid lines dropped on every edge before rows enter the regression.
    int boundary_trim() const noexcept { return trim_; }
    Eigen::Index retained_rows() const noexcept;

private:
    friend Dataset make_dataset(Field u, Eigen::VectorXd x, Eigen::VectorXd t, int boundary_trim);

    Field u_, ut_, ux_;
    Eigen::VectorXd x_, t_;
    double dx_ = 0.0, dt_ = 0.0;
    int trim_ = kDefaultBoundaryTrim;
};

/// Throws DatasetError on shape mismatch, a non-uniform or non-increasing
/// axis, fewer than 5 points on an axis, or a trim that leaves no rows.
Dataset make_dataset(Field u, Eigen::VectorXd x, Eigen::VectorXd t,
                     int boundary_trim = kDefaultBoundaryTrim);

/// Spatial derivative of each column. Second-order central stencil in the
/// interior, second-order one-sided stencils on the first and last rows.
Field diff_x(const Field &f, double dx, int order);

/// First-order time derivative of each row with the same stencils as diff_x.
Field diff_t(const Field &f, double dt);

struct FieldColumn {
    Eigen::VectorXd values;
    double finite_fraction = 1.0;

    bool finite() const noexcept { return finite_fraction == 1.0; }
};

struct FeatureMatrix {
    std::vector<FieldColumn> columns;
    Eigen::Index n_rows = 0;
    std::vector<std::string> term_labels;

    bool all_finite() const noexcept;
};

/// Full-grid evaluation of a tree, before trimming.
Field evaluate_field(const expr::Tree &t, const Dataset &d);

/// Drops boundary_trim lines on each edge and flattens row-major
/// (spatial line by spatial line).
FieldColumn trim_and_flatten(const Field &f, int trim);

FieldColumn evaluate_tree(const expr::Tree &t, const Dataset &d);

FeatureMatrix build_feature_matrix(const expr::Forest &f, const Dataset &d);

FieldColumn ut_vector(const Dataset &d);

} // namespace pdeforest::eval
