#pragma once

#include <iosfwd>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cfmimo::gp {

/// c * prod_i x_i^{a_i} with c > 0. Exponents are sparse (index, power).
struct Monomial {
  double coefficient = 1.0;
  std::vector<std::pair<int, double>> exponents;

  double eval(const Eigen::VectorXd& x) const;
};

Monomial operator*(const Monomial& a, const Monomial& b);
/// m^power, coefficient included.
Monomial pow(const Monomial& m, double power);

/// Sum of monomials; never empty in a valid problem.
struct Posynomial {
  std::vector<Monomial> terms;

  Posynomial() = default;
  Posynomial(Monomial m) : terms{std::move(m)} {}  // NOLINT: implicit by design

  double eval(const Eigen::VectorXd& x) const;
  bool is_monomial() const { return terms.size() == 1; }
  Posynomial& operator+=(const Monomial& m);
};

/// Posynomial divided by a monomial (still a posynomial).
Posynomial operator/(const Posynomial& p, const Monomial& m);

/// minimize objective(x) s.t. constraints[i](x) <= 1, x > 0.
struct Problem {
  int num_vars = 0;
  Posynomial objective;
  std::vector<Posynomial> constraints;

  /// Throws DomainError on a nonpositive coefficient, bad index, empty
  /// posynomial, or a variable that appears nowhere.
  void validate() const;
};

enum class Status { Optimal, Infeasible, MaxIterations, Unbounded };
std::string_view to_string(Status s);

struct Options {
  double tolerance = 1e-9;   // stop when (#constraints)/t < tolerance
  int max_outer = 50;
  int max_newton = 200;      // per phase
  double t0 = 1.0;
  double mu = 10.0;
};

struct Solution {
  Eigen::VectorXd values;  // x
  double objective = 0.0;  // objective(x)
  Status status = Status::MaxIterations;
  double kkt_residual = 0.0;  // log domain, infinity norm
  double phase1_slack = 0.0;  // Phase-I optimum (max log-constraint value), < 0 when feasible
  int newton_steps = 0;       // both phases
  int outer_iterations = 0;
};

/// log(sum_j exp(b_j + a_j . y)) with sparse a_j.
struct LogSumExp {
  struct Term {
    double offset = 0.0;
    std::vector<std::pair<int, double>> coeffs;
  };
  std::vector<Term> terms;

  double value(const Eigen::VectorXd& y) const;
  /// Returns the value; adds scale * gradient and scale * Hessian into the
  /// outputs when non-null.
  double accumulate(const Eigen::VectorXd& y, double scale, Eigen::VectorXd* grad,
                    Eigen::MatrixXd* hess) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& y) const;
};

/// minimize objective(y) s.t. constraints[i](y) <= 0, y = ln x.
struct LogConvexProgram {
  int num_vars = 0;
  LogSumExp objective;
  std::vector<LogSumExp> constraints;
};

LogConvexProgram to_log_convex(const Problem& p);

/// Phase I then barrier method. `warm_start` is an x-domain point; it is
/// used directly when strictly feasible, else as the Phase-I start.
Solution solve(const Problem& p, const Options& opts = {},
               const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

/// Plain-text dump: a header line per posynomial ("objective",
/// "constraint <i>") followed by one monomial per line as
/// "<coefficient> <index>:<exponent> ...".
void write_problem(std::ostream& out, const Problem& p);

}  // namespace cfmimo::gp
