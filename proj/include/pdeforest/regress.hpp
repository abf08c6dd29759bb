#pragma once

#include <Eigen/Dense>

#include <optional>

#include "pdeforest/eval.hpp"

namespace pdeforest::regress {

struct RegressionParams {
    double lambda = 1e-5;
    /// Hard threshold; compared against coefficients of unit-norm columns
    /// when normalize_columns is set.
    double tol = 1e-2;
    int max_sweeps = 25;
    bool normalize_columns = true;

    void check() const;
};

/// MSE below this is clamped before taking the log.
inline constexpr double kMseFloor = 1e-30;

struct CandidateScore {
    Eigen::VectorXd xi;
    int k = 0;
    double mse = 0.0;
    double aic = 0.0;
    bool valid = false;
};

/// 2k + 2 ln(mse), with mse floored at kMseFloor.
double aic(int k, double mse);

/// Minimizer of ||Phi xi - y||^2 + lambda ||xi||^2. Returns nullopt when the
/// system is singular (lambda = 0 with rank-deficient Phi) or has fewer rows
/// than columns. Zero columns get a zero coefficient.
std::optional<Eigen::VectorXd> ridge_solve(const eval::FeatureMatrix &phi, const eval::FieldColumn &y,
                                           double lambda, bool normalize_columns = true);

/// Sequential thresholded ridge regression. Full-length result with zeros in
/// the slots that were thresholded away.
std::optional<Eigen::VectorXd> stridge(const eval::FeatureMatrix &phi, const eval::FieldColumn &y,
                                       const RegressionParams &p);

/// Runs stridge and ranks the fit by AIC. Invalid candidates (non-finite
/// columns, failed solve, or no surviving term) get aic = +inf.
CandidateScore score(const eval::FeatureMatrix &phi, const eval::FieldColumn &y, const RegressionParams &p);

} // namespace pdeforest::regress
