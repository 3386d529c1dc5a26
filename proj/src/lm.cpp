#include "masfm/lm.hpp"

#include <cmath>

#include "masfm/error.hpp"

namespace masfm {

namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

double cost_of(const Eigen::VectorXd& residuals) { return 0.5 * residuals.squaredNorm(); }

}  // namespace

const char* termination_name(Termination termination) {
  switch (termination) {
    case Termination::GradientTolerance: return "GradientTolerance";
    case Termination::CostTolerance: return "CostTolerance";
    case Termination::MaxIterations: return "MaxIterations";
    case Termination::StepTolerance: return "StepTolerance";
  }
  return "Unknown";
}

Eigen::MatrixXd finite_difference_jacobian(const ResidualProblem& problem, const Eigen::VectorXd& params) {
  const int tangent = problem.tangent_count();
  const int ambient = problem.parameter_count();
  const bool identity_chart = (tangent == ambient);
  Eigen::MatrixXd jac(problem.residual_count(), tangent);
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(tangent);
  Eigen::VectorXd r_plus(problem.residual_count()), r_minus(problem.residual_count());
  for (int j = 0; j < tangent; ++j) {
    // In a nontrivial chart the expansion point is delta = 0, so the
    // relative part of the step rule vanishes there.
    const double base = identity_chart ? std::abs(params[j]) : 0.0;
    const double h = std::max(1e-7, 1e-7 * base);
    delta[j] = h;
    if (!problem.evaluate(problem.plus(params, delta), r_plus)) {
      throw Error(ErrorCode::NumericalFailure, "finite difference probe left the feasible region");
    }
    delta[j] = -h;
    if (!problem.evaluate(problem.plus(params, delta), r_minus)) {
      throw Error(ErrorCode::NumericalFailure, "finite difference probe left the feasible region");
    }
    delta[j] = 0.0;
    jac.col(j) = (r_plus - r_minus) / (2.0 * h);
  }
  return jac;
}

bool ResidualProblem::normal_equations(const Eigen::VectorXd& params, Eigen::MatrixXd& hessian,
                                       Eigen::VectorXd& gradient, double* cost) const {
  Eigen::VectorXd residuals(residual_count());
  if (!evaluate(params, residuals) || !all_finite(residuals)) return false;
  Eigen::MatrixXd jac;
  if (!jacobian(params, jac)) {
    jac = finite_difference_jacobian(*this, params);
  }
  hessian.noalias() = jac.transpose() * jac;
  gradient.noalias() = jac.transpose() * residuals;
  if (cost) *cost = cost_of(residuals);
  return hessian.allFinite() && gradient.allFinite();
}

LmResult lm_minimize(const ResidualProblem& problem, const Eigen::VectorXd& initial,
                     const LmOptions& options) {
  const int tangent = problem.tangent_count();

  Eigen::VectorXd lower, upper;
  const bool has_bounds = problem.bounds(lower, upper);
  const auto clamp_to_bounds = [&](Eigen::VectorXd& x) {
    if (has_bounds) x = x.cwiseMax(lower).cwiseMin(upper);
  };

  Eigen::VectorXd x = initial;
  clamp_to_bounds(x);

  Eigen::VectorXd residuals(problem.residual_count());
  if (!problem.evaluate(x, residuals) || !all_finite(residuals)) {
    throw Error(ErrorCode::InvalidInitialPoint, "residuals are not finite at the initial point");
  }

  LmResult result;
  result.report.initial_cost = cost_of(residuals);
  double cost = result.report.initial_cost;

  double lambda = -1.0;  // set from the first J^T J mean diagonal
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;

  int iteration = 0;
  Termination termination = Termination::MaxIterations;
  for (; iteration < options.max_iterations; ++iteration) {
    double current_cost = 0.0;
    if (!problem.normal_equations(x, hessian, gradient, &current_cost)) {
      throw Error(ErrorCode::NumericalFailure, "normal equations are not finite");
    }
    cost = current_cost;

    if (gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      termination = Termination::GradientTolerance;
      break;
    }

    if (lambda < 0.0) {
      const double mean_diag = hessian.trace() / std::max(1, tangent);
      lambda = options.initial_damping_factor * std::max(mean_diag, 1e-300);
    }

    // Retry with increasing damping until a step decreases the cost.
    bool accepted = false;
    while (true) {
      Eigen::MatrixXd damped = hessian;
      damped.diagonal().array() += lambda;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      bool solved = (ldlt.info() == Eigen::Success);
      Eigen::VectorXd delta;
      if (solved) {
        delta = ldlt.solve(-gradient);
        solved = delta.allFinite();
      }

      if (solved) {
        if (delta.norm() < options.step_tolerance) {
          termination = Termination::StepTolerance;
          break;
        }
        Eigen::VectorXd candidate = problem.plus(x, delta);
        clamp_to_bounds(candidate);
        Eigen::VectorXd candidate_residuals(problem.residual_count());
        const bool valid = problem.evaluate(candidate, candidate_residuals) &&
                           all_finite(candidate_residuals);
        if (valid) {
          const double candidate_cost = cost_of(candidate_residuals);
          if (candidate_cost < cost) {
            const double relative_decrease = (cost - candidate_cost) / std::max(cost, 1e-300);
            x = std::move(candidate);
            problem.retract(x);
            cost = candidate_cost;
            result.report.step_costs.push_back(cost);
            lambda = std::max(lambda / options.damping_decrease, 1e-300);
            accepted = true;
            if (relative_decrease < options.cost_relative_tolerance) {
              termination = Termination::CostTolerance;
            }
            break;
          }
        }
      }

      lambda *= options.damping_increase;
      if (lambda > options.max_damping) {
        if (!solved) {
          throw Error(ErrorCode::NumericalFailure,
                      "normal equations unsolvable at maximum damping");
        }
        termination = Termination::StepTolerance;
        break;
      }
    }

    if (!accepted) break;
    if (termination == Termination::CostTolerance) {
      ++iteration;
      break;
    }
  }

  result.solution = x;
  result.report.final_cost = cost;
  result.report.iterations = iteration;
  result.report.termination = termination;
  return result;
}

}  // namespace masfm
