#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace masfm {

// Nonlinear least-squares problem over a parameter vector. Parameters may
// live on a manifold: plus() applies a tangent increment (default is plain
// addition with tangent_count() == parameter_count()). evaluate() returns
// false when residuals cannot be formed at the given point (for example a
// scene point behind a camera); the solver treats such steps as rejected.
class ResidualProblem {
 public:
  virtual ~ResidualProblem() = default;

  virtual int parameter_count() const = 0;
  virtual int residual_count() const = 0;
  virtual int tangent_count() const { return parameter_count(); }

  virtual bool evaluate(const Eigen::VectorXd& params, Eigen::VectorXd& residuals) const = 0;

  // residual_count x tangent_count. Returning false means "not provided";
  // the solver falls back to central finite differences.
  virtual bool jacobian(const Eigen::VectorXd& /*params*/, Eigen::MatrixXd& /*jac*/) const {
    return false;
  }

  virtual Eigen::VectorXd plus(const Eigen::VectorXd& params, const Eigen::VectorXd& delta) const {
    return params + delta;
  }

  // Optional fused Gauss-Newton accumulation (H = J^T J, g = J^T r). The
  // default builds the dense Jacobian; large sparse problems override this
  // with block accumulation.
  virtual bool normal_equations(const Eigen::VectorXd& params, Eigen::MatrixXd& hessian,
                                Eigen::VectorXd& gradient, double* cost) const;

  // Optional box bounds on the stored parameters (identity chart only).
  virtual bool bounds(Eigen::VectorXd& /*lower*/, Eigen::VectorXd& /*upper*/) const { return false; }

  // Optional cost-neutral renormalization applied after every accepted
  // step (gauge fixing). Must not change the residual vector.
  virtual void retract(Eigen::VectorXd& /*params*/) const {}
};

// Central finite-difference Jacobian in tangent coordinates with step
// max(1e-7, 1e-7 * |param|) per coordinate.
Eigen::MatrixXd finite_difference_jacobian(const ResidualProblem& problem, const Eigen::VectorXd& params);

enum class Termination {
  GradientTolerance,
  CostTolerance,
  MaxIterations,
  StepTolerance,
};

const char* termination_name(Termination termination);

struct SolveReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  Termination termination = Termination::MaxIterations;
  std::vector<double> step_costs;  // cost after each accepted step, strictly decreasing
};

struct LmOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  double cost_relative_tolerance = 1e-12;
  double step_tolerance = 1e-12;
  // Initial damping is this factor times the mean diagonal of J^T J.
  double initial_damping_factor = 1e-12;
  double damping_increase = 10.0;
  double damping_decrease = 10.0;
  double max_damping = 1e32;
};

struct LmResult {
  Eigen::VectorXd solution;
  SolveReport report;
};

// Dense Levenberg-Marquardt. Cost is 0.5 * ||r||^2 and is non-increasing
// over accepted steps. Throws InvalidInitialPoint when residuals cannot be
// evaluated at the start and NumericalFailure when the damped normal
// equations stay unsolvable at maximum damping.
LmResult lm_minimize(const ResidualProblem& problem, const Eigen::VectorXd& initial,
                     const LmOptions& options = {});

// Convenience adapter for small problems defined by lambdas.
class FunctionProblem : public ResidualProblem {
 public:
  using EvaluateFn = std::function<bool(const Eigen::VectorXd&, Eigen::VectorXd&)>;
  using JacobianFn = std::function<bool(const Eigen::VectorXd&, Eigen::MatrixXd&)>;

  FunctionProblem(int parameter_count, int residual_count, EvaluateFn evaluate,
                  JacobianFn jacobian = nullptr)
      : parameter_count_(parameter_count),
        residual_count_(residual_count),
        evaluate_(std::move(evaluate)),
        jacobian_(std::move(jacobian)) {}

  int parameter_count() const override { return parameter_count_; }
  int residual_count() const override { return residual_count_; }
  bool evaluate(const Eigen::VectorXd& params, Eigen::VectorXd& residuals) const override {
    return evaluate_(params, residuals);
  }
  bool jacobian(const Eigen::VectorXd& params, Eigen::MatrixXd& jac) const override {
    return jacobian_ ? jacobian_(params, jac) : false;
  }

 private:
  int parameter_count_;
  int residual_count_;
  EvaluateFn evaluate_;
  JacobianFn jacobian_;
};

}  // namespace masfm
