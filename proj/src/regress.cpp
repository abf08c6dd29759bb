#include "pdeforest/regress.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace pdeforest::regress {

void RegressionParams::check() const {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    if (max_sweeps < 1) throw std::invalid_argument("max_sweeps must be >= 1");
}

double aic(int k, double mse) { return 2.0 * k + 2.0 * std::log(std::max(mse, kMseFloor)); }

namespace {

// Gram matrix and right-hand side, formed once per candidate and reused by
// every thresholding sweep.
struct NormalEquations {
    Eigen::MatrixXd gram;
    Eigen::VectorXd rhs;
    Eigen::VectorXd norms;
};

NormalEquations normal_equations(const eval::FeatureMatrix &phi, const eval::FieldColumn &y) {
    const auto k = static_cast<Eigen::Index>(phi.columns.size());
    NormalEquations ne{Eigen::MatrixXd(k, k), Eigen::VectorXd(k), Eigen::VectorXd(k)};
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto &ci = phi.columns[static_cast<std::size_t>(i)].values;
        ne.rhs(i) = ci.dot(y.values);
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double g = ci.dot(phi.columns[static_cast<std::size_t>(j)].values);
            ne.gram(i, j) = g;
            ne.gram(j, i) = g;
        }
        ne.norms(i) = std::sqrt(ne.gram(i, i));
    }
    return ne;
}

struct SubsetSolution {
    Eigen::VectorXd xi;     // raw scale
    Eigen::VectorXd scaled; // on the thresholding scale
};

// Ridge solve restricted to `active` (indices into the full system).
std::optional<SubsetSolution> solve_subset(const NormalEquations &ne, const std::vector<Eigen::Index> &active,
                                           double lambda, bool normalize) {
    const auto m = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd a(m, m);
    Eigen::VectorXd b(m);
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(m);
    if (normalize)
        for (Eigen::Index i = 0; i < m; ++i) scale(i) = 1.0 / ne.norms(active[static_cast<std::size_t>(i)]);

    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index gi = active[static_cast<std::size_t>(i)];
        b(i) = ne.rhs(gi) * scale(i);
        for (Eigen::Index j = 0; j < m; ++j)
            a(i, j) = ne.gram(gi, active[static_cast<std::size_t>(j)]) * scale(i) * scale(j);
        a(i, i) += lambda;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < m) return std::nullopt;
    SubsetSolution s;
    s.scaled = qr.solve(b);
    if (!s.scaled.allFinite()) return std::nullopt;
    s.xi = s.scaled.cwiseProduct(scale);
    return s;
}

std::vector<Eigen::Index> nonzero_columns(const NormalEquations &ne) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < ne.norms.size(); ++i)
        if (ne.norms(i) > 0.0) idx.push_back(i);
    return idx;
}

bool shape_ok(const eval::FeatureMatrix &phi, const eval::FieldColumn &y) {
    for (const auto &c : phi.columns)
        if (c.values.size() != y.values.size()) return false;
    return static_cast<Eigen::Index>(phi.columns.size()) <= y.values.size();
}

Eigen::VectorXd scatter(const std::vector<Eigen::Index> &active, const Eigen::VectorXd &sub, Eigen::Index k) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < active.size(); ++i) full(active[i]) = sub(static_cast<Eigen::Index>(i));
    return full;
}

} // namespace

std::optional<Eigen::VectorXd> ridge_solve(const eval::FeatureMatrix &phi, const eval::FieldColumn &y,
                                           double lambda, bool normalize_columns) {
    if (!shape_ok(phi, y)) return std::nullopt;
    const auto k = static_cast<Eigen::Index>(phi.columns.size());
    const NormalEquations ne = normal_equations(phi, y);
    const auto active = nonzero_columns(ne);
    if (active.empty()) return Eigen::VectorXd::Zero(k);
    auto s = solve_subset(ne, active, lambda, normalize_columns);
    if (!s) return std::nullopt;
    return scatter(active, s->xi, k);
}

std::optional<Eigen::VectorXd> stridge(const eval::FeatureMatrix &phi, const eval::FieldColumn &y,
                                       const RegressionParams &p) {
    if (!shape_ok(phi, y)) return std::nullopt;
    const auto k = static_cast<Eigen::Index>(phi.columns.size());
    const NormalEquations ne = normal_equations(phi, y);
    std::vector<Eigen::Index> active = nonzero_columns(ne);

    for (int sweep = 0; sweep < p.max_sweeps; ++sweep) {
        if (active.empty()) return Eigen::VectorXd::Zero(k);
        auto s = solve_subset(ne, active, p.lambda, p.normalize_columns);
        if (!s) return std::nullopt;

        std::vector<Eigen::Index> kept;
        for (std::size_t i = 0; i < active.size(); ++i)
            if (std::abs(s->scaled(static_cast<Eigen::Index>(i))) >= p.tol) kept.push_back(active[i]);
        if (kept.size() == active.size()) return scatter(active, s->xi, k);
        active = std::move(kept);
    }
    if (active.empty()) return Eigen::VectorXd::Zero(k);
    // Sweep budget ran out while the set was still shrinking: refit on it.
    auto s = solve_subset(ne, active, p.lambda, p.normalize_columns);
    if (!s) return std::nullopt;
    return scatter(active, s->xi, k);
}

CandidateScore score(const eval::FeatureMatrix &phi, const eval::FieldColumn &y, const RegressionParams &p) {
    CandidateScore sc;
    const auto k = static_cast<Eigen::Index>(phi.columns.size());
    sc.xi = Eigen::VectorXd::Zero(k);
    sc.aic = std::numeric_limits<double>::infinity();
    sc.mse = std::numeric_limits<double>::infinity();
    if (!phi.all_finite() || !y.finite()) return sc;

    auto xi = stridge(phi, y, p);
    if (!xi) return sc;
    sc.xi = *xi;
    sc.k = static_cast<int>((sc.xi.array() != 0.0).count());

    Eigen::VectorXd residual = -y.values;
    for (Eigen::Index i = 0; i < k; ++i)
        if (sc.xi(i) != 0.0) residual += sc.xi(i) * phi.columns[static_cast<std::size_t>(i)].values;
    const double n = static_cast<double>(y.values.size());
    sc.mse = residual.squaredNorm() / n;
    if (sc.k == 0 || !std::isfinite(sc.mse)) return sc;
    sc.aic = aic(sc.k, sc.mse);
    sc.valid = std::isfinite(sc.aic);
    return sc;
}

} // namespace pdeforest::regress
