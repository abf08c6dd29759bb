#include "pdeforest/eval.hpp"

#include <cmath>

namespace pdeforest::eval {

namespace {

constexpr Eigen::Index kMinPoints = 5;
constexpr double kUniformTol = 1e-9;

double uniform_spacing(const Eigen::VectorXd &axis, const char *name) {
    const Eigen::Index n = axis.size();
    if (n < kMinPoints)
        throw DatasetError(std::string(name) + " axis needs at least 5 points, has " + std::to_string(n));
    const double h = (axis(n - 1) - axis(0)) / static_cast<double>(n - 1);
    if (!(h > 0.0)) throw DatasetError(std::string(name) + " axis is not strictly increasing");
    for (Eigen::Index i = 1; i < n; ++i) {
        const double step = axis(i) - axis(i - 1);
        if (!(std::abs(step - h) <= kUniformTol * h))
            throw DatasetError(std::string(name) + " axis is not uniform at index " + std::to_string(i));
    }
    return h;
}

// Derivative along the leading index of a column-major block: rows of `f`.
Field diff_rows(const Field &f, double h, int order) {
    const Eigen::Index n = f.rows();
    Field out(n, f.cols());
    if (order == 1) {
        const double s = 1.0 / (2.0 * h);
        out.middleRows(1, n - 2) = (f.bottomRows(n - 2) - f.topRows(n - 2)) * s;
        out.row(0) = (-3.0 * f.row(0) + 4.0 * f.row(1) - f.row(2)) * s;
        out.row(n - 1) = (3.0 * f.row(n - 1) - 4.0 * f.row(n - 2) + f.row(n - 3)) * s;
    } else {
        const double s = 1.0 / (h * h);
        out.middleRows(1, n - 2) = (f.bottomRows(n - 2) - 2.0 * f.middleRows(1, n - 2) + f.topRows(n - 2)) * s;
        out.row(0) = (2.0 * f.row(0) - 5.0 * f.row(1) + 4.0 * f.row(2) - f.row(3)) * s;
        out.row(n - 1) = (2.0 * f.row(n - 1) - 5.0 * f.row(n - 2) + 4.0 * f.row(n - 3) - f.row(n - 4)) * s;
    }
    return out;
}

Field guard_denominator(const Field &d) {
    return d.unaryExpr([](double v) { return std::abs(v) < kDivisionFloor ? kDivisionFloor : v; });
}

Field eval_node(const expr::Node &n, const Dataset &d) {
    using expr::Symbol;
    switch (n.symbol) {
    case Symbol::U: return d.u();
    case Symbol::UX: return d.ux();
    case Symbol::X: return d.x().array().replicate(1, d.nt());
    case Symbol::Zero: return Field::Zero(d.nx(), d.nt());
    case Symbol::Square: return eval_node(n.children[0], d).square();
    case Symbol::Cube: return eval_node(n.children[0], d).cube();
    case Symbol::D1: return diff_x(eval_node(n.children[0], d), d.dx(), 1);
    case Symbol::D2: return diff_x(eval_node(n.children[0], d), d.dx(), 2);
    default: break;
    }
    Field a = eval_node(n.children[0], d);
    const Field b = eval_node(n.children[1], d);
    switch (n.symbol) {
    case Symbol::Add: a += b; break;
    case Symbol::Sub: a -= b; break;
    case Symbol::Mul: a *= b; break;
    case Symbol::Div: a /= guard_denominator(b); break;
    default: break;
    }
    return a;
}

} // namespace

Eigen::Index Dataset::retained_rows() const noexcept {
    return (nx() - 2 * trim_) * (nt() - 2 * trim_);
}

Dataset make_dataset(Field u, Eigen::VectorXd x, Eigen::VectorXd t, int boundary_trim) {
    if (u.rows() != x.size() || u.cols() != t.size()) {
        throw DatasetError("u has shape (" + std::to_string(u.rows()) + ", " + std::to_string(u.cols()) +
                           ") but axes have lengths " + std::to_string(x.size()) + " and " +
                           std::to_string(t.size()));
    }
    Dataset d;
    d.dx_ = uniform_spacing(x, "x");
    d.dt_ = uniform_spacing(t, "t");
    if (boundary_trim < 0 || 2 * boundary_trim >= u.rows() || 2 * boundary_trim >= u.cols())
        throw DatasetError("boundary trim " + std::to_string(boundary_trim) + " leaves no rows");
    d.trim_ = boundary_trim;
    d.ux_ = diff_x(u, d.dx_, 1);
    d.ut_ = diff_t(u, d.dt_);
    d.u_ = std::move(u);
    d.x_ = std::move(x);
    d.t_ = std::move(t);
    return d;
}

Field diff_x(const Field &f, double dx, int order) {
    if (order != 1 && order != 2) throw std::invalid_argument("diff_x order must be 1 or 2");
    if (f.rows() < kMinPoints)
        throw DatasetError("diff_x needs at least 5 spatial points, has " + std::to_string(f.rows()));
    return diff_rows(f, dx, order);
}

Field diff_t(const Field &f, double dt) {
    if (f.cols() < kMinPoints)
        throw DatasetError("diff_t needs at least 5 time points, has " + std::to_string(f.cols()));
    return diff_rows(f.transpose(), dt, 1).transpose();
}

bool FeatureMatrix::all_finite() const noexcept {
    for (const auto &c : columns)
        if (!c.finite()) return false;
    return true;
}

Field evaluate_field(const expr::Tree &t, const Dataset &d) { return eval_node(t.root(), d); }

FieldColumn trim_and_flatten(const Field &f, int trim) {
    const Eigen::Index rows = f.rows() - 2 * trim;
    const Eigen::Index cols = f.cols() - 2 * trim;
    FieldColumn c;
    c.values.resize(rows * cols);
    Eigen::Index finite = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double v = f(i + trim, j + trim);
            c.values(i * cols + j) = v;
            finite += std::isfinite(v) ? 1 : 0;
        }
    }
    c.finite_fraction = c.values.size() ? static_cast<double>(finite) / static_cast<double>(c.values.size()) : 1.0;
    return c;
}

FieldColumn evaluate_tree(const expr::Tree &t, const Dataset &d) {
    return trim_and_flatten(evaluate_field(t, d), d.boundary_trim());
}

FeatureMatrix build_feature_matrix(const expr::Forest &f, const Dataset &d) {
    FeatureMatrix m;
    m.n_rows = d.retained_rows();
    m.columns.reserve(f.trees.size());
    for (const auto &tree : f.trees) {
        m.columns.push_back(evaluate_tree(tree, d));
        m.term_labels.push_back(expr::to_display_string(tree));
    }
    return m;
}

FieldColumn ut_vector(const Dataset &d) { return trim_and_flatten(d.ut(), d.boundary_trim()); }

} // namespace pdeforest::eval
