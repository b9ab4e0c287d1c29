#include "cfmimo/gp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <ostream>

#include "cfmimo/errors.hpp"

namespace cfmimo::gp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Implicit box |ln x_i| <= kLogBox keeps every barrier subproblem bounded.
constexpr double kLogBox = 100.0;
constexpr double kBoxActive = 1.0;
constexpr double kCenteringTol = 1e-12;
constexpr double kRoundoffDecrement = 1e-6;
constexpr double kActiveSet = 1e-6;
constexpr double kArmijo = 0.25;
constexpr double kBacktrack = 0.5;
// Phase I stops as soon as every constraint has this much log-slack.
constexpr double kPhase1Margin = 1e-3;
constexpr double kPhase1Feasible = 1e-10;

std::vector<std::pair<int, double>> merge(std::vector<std::pair<int, double>> e) {
  std::sort(e.begin(), e.end(), [](auto& a, auto& b) { return a.first < b.first; });
  std::vector<std::pair<int, double>> out;
  for (const auto& [i, a] : e) {
    if (!out.empty() && out.back().first == i)
      out.back().second += a;
    else
      out.emplace_back(i, a);
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](auto& t) { return t.second == 0.0; }),
            out.end());
  return out;
}

double dot(const std::vector<std::pair<int, double>>& a, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (const auto& [i, c] : a) s += c * y(i);
  return s;
}

struct Barrier {
  const LogConvexProgram& p;

  bool strictly_feasible(const Eigen::VectorXd& y) const {
    for (const auto& c : p.constraints)
      if (!(c.value(y) < 0.0)) return false;
    return true;
  }

  // t f0 - sum log(-f_i); +inf outside the domain.
  double value(const Eigen::VectorXd& y, double t) const {
    double v = t * p.objective.value(y);
    for (const auto& c : p.constraints) {
      const double f = c.value(y);
      if (!(f < 0.0)) return kInf;
      v -= std::log(-f);
    }
    return v;
  }

  void derivatives(const Eigen::VectorXd& y, double t, Eigen::VectorXd& g,
                   Eigen::MatrixXd& h) const {
    const int n = p.num_vars;
    g.setZero(n);
    h.setZero(n, n);
    p.objective.accumulate(y, t, &g, &h);
    Eigen::VectorXd gi(n);
    Eigen::MatrixXd hi(n, n);
    for (const auto& c : p.constraints) {
      gi.setZero();
      hi.setZero();
      const double f = c.accumulate(y, 1.0, &gi, &hi);
      g += gi / (-f);
      h += hi / (-f);
      h.noalias() += (gi * gi.transpose()) / (f * f);
    }
  }

  // Infinity norm of grad f0 + sum lambda_i grad f_i, taking the better of
  // the barrier multipliers 1/(t (-f_i)) and nonnegative least-squares
  // multipliers on the nearly active set. The barrier ones lose digits when
  // f_i ~ -1/t is computed with cancellation.
  double kkt_residual(const Eigen::VectorXd& y, double t) const {
    const Eigen::VectorXd g0 = p.objective.gradient(y);
    Eigen::VectorXd r = g0;
    std::vector<Eigen::VectorXd> active;
    for (const auto& c : p.constraints) {
      const double f = c.value(y);
      const Eigen::VectorXd gi = c.gradient(y);
      r += gi / (t * -f);
      if (f > -kActiveSet) active.push_back(gi);
    }
    double best = r.cwiseAbs().maxCoeff();
    if (active.empty()) return std::min(best, g0.cwiseAbs().maxCoeff());
    Eigen::MatrixXd j(y.size(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i) j.col(static_cast<Eigen::Index>(i)) = active[i];
    const Eigen::VectorXd lam = j.colPivHouseholderQr().solve(-g0).cwiseMax(0.0);
    return std::min(best, (g0 + j * lam).cwiseAbs().maxCoeff());
  }
};

Eigen::VectorXd newton_direction(const Eigen::MatrixXd& h, const Eigen::VectorXd& g) {
  const int n = static_cast<int>(g.size());
  double reg = 0.0;
  const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 40; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(h + reg * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd dx = llt.solve(-g);
      if (dx.allFinite()) return dx;
    }
    reg = reg == 0.0 ? 1e-14 * scale : reg * 10.0;
  }
  return -g;
}

// Every constraint term and every objective term decreases (or stays) along d,
// with the objective strictly decreasing: the objective goes to zero on the ray.
bool certified_ray(const LogConvexProgram& p, const Eigen::VectorXd& d) {
  const double tol = 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff());
  for (const auto& c : p.constraints)
    for (const auto& term : c.terms)
      if (dot(term.coeffs, d) > tol) return false;
  for (const auto& term : p.objective.terms)
    if (!(dot(term.coeffs, d) < -tol)) return false;
  return true;
}

struct BarrierOutcome {
  Eigen::VectorXd y;
  Status status = Status::MaxIterations;
  double t = 1.0;
  int newton = 0;
  int outer = 0;
  bool stopped_early = false;
};

BarrierOutcome run_barrier(const LogConvexProgram& p, Eigen::VectorXd y, const Options& opts,
                           const std::function<bool(const Eigen::VectorXd&)>& early_stop) {
  Barrier b{p};
  BarrierOutcome out;
  const int m = static_cast<int>(p.constraints.size());
  double t = opts.t0;
  Eigen::VectorXd g;
  Eigen::MatrixXd h;

  for (out.outer = 1; out.outer <= opts.max_outer; ++out.outer) {
    for (;;) {
      b.derivatives(y, t, g, h);
      const Eigen::VectorXd dx = newton_direction(h, g);
      const double slope = g.dot(dx);
      if (-slope / 2.0 <= kCenteringTol) break;
      if (out.newton >= opts.max_newton) {
        out.y = y;
        out.t = t;
        out.status = Status::MaxIterations;
        return out;
      }
      ++out.newton;
      const double phi = b.value(y, t);
      const double floor = std::max(kRoundoffDecrement,
                                    64.0 * std::numeric_limits<double>::epsilon() * std::abs(phi));
      Eigen::VectorXd trial;
      if (-slope / 2.0 < floor) {
        // The barrier value cannot resolve further decrease; accept full
        // steps only while they clearly shrink the gradient.
        trial = y + dx;
        if (!b.strictly_feasible(trial)) break;
        Eigen::VectorXd g_full;
        Eigen::MatrixXd h_full;
        b.derivatives(trial, t, g_full, h_full);
        if (!(g_full.norm() < 0.5 * g.norm())) break;
      } else {
        double step = 1.0;
        trial = y + dx;
        while (!(b.value(trial, t) <= phi + kArmijo * step * slope)) {
          step *= kBacktrack;
          if (step < 1e-20) break;
          trial = y + step * dx;
        }
        if (step < 1e-20) break;  // no progress possible at this t
      }
      y = trial;
      if (early_stop && early_stop(y)) {
        out.y = y;
        out.t = t;
        out.status = Status::Optimal;
        out.stopped_early = true;
        return out;
      }
    }
    if (m == 0 || m / t < opts.tolerance) {
      out.y = y;
      out.t = t;
      out.status = Status::Optimal;
      return out;
    }
    t *= opts.mu;
  }
  out.outer = opts.max_outer;
  out.y = y;
  out.t = t;
  out.status = Status::MaxIterations;
  return out;
}

double max_constraint(const LogConvexProgram& p, const Eigen::VectorXd& y) {
  double worst = -kInf;
  for (const auto& c : p.constraints) worst = std::max(worst, c.value(y));
  return worst;
}

void add_box(LogConvexProgram& p, int vars) {
  for (int i = 0; i < vars; ++i) {
    p.constraints.push_back({{{-kLogBox, {{i, 1.0}}}}});
    p.constraints.push_back({{{-kLogBox, {{i, -1.0}}}}});
  }
}

}  // namespace

double Monomial::eval(const Eigen::VectorXd& x) const {
  double v = coefficient;
  for (const auto& [i, a] : exponents) v *= std::pow(x(i), a);
  return v;
}

Monomial operator*(const Monomial& a, const Monomial& b) {
  Monomial r;
  r.coefficient = a.coefficient * b.coefficient;
  r.exponents = a.exponents;
  r.exponents.insert(r.exponents.end(), b.exponents.begin(), b.exponents.end());
  r.exponents = merge(std::move(r.exponents));
  return r;
}

Monomial pow(const Monomial& m, double power) {
  Monomial r;
  r.coefficient = std::pow(m.coefficient, power);
  for (const auto& [i, a] : m.exponents) r.exponents.emplace_back(i, a * power);
  r.exponents = merge(std::move(r.exponents));
  return r;
}

double Posynomial::eval(const Eigen::VectorXd& x) const {
  double v = 0.0;
  for (const auto& t : terms) v += t.eval(x);
  return v;
}

Posynomial& Posynomial::operator+=(const Monomial& m) {
  terms.push_back(m);
  return *this;
}

Posynomial operator/(const Posynomial& p, const Monomial& m) {
  const Monomial inv = pow(m, -1.0);
  Posynomial r;
  r.terms.reserve(p.terms.size());
  for (const auto& t : p.terms) r.terms.push_back(t * inv);
  return r;
}

void Problem::validate() const {
  if (num_vars < 1) throw DomainError("gp: problem needs at least one variable");
  std::vector<char> used(static_cast<std::size_t>(num_vars), 0);
  auto check = [&](const Posynomial& p, const char* what) {
    if (p.terms.empty()) throw DomainError(std::string("gp: empty posynomial in ") + what);
    for (const auto& t : p.terms) {
      if (!(t.coefficient > 0.0) || !std::isfinite(t.coefficient))
        throw DomainError(std::string("gp: nonpositive coefficient in ") + what);
      for (const auto& [i, a] : t.exponents) {
        if (i < 0 || i >= num_vars) throw DomainError("gp: variable index out of range");
        if (!std::isfinite(a)) throw DomainError("gp: non-finite exponent");
        if (a != 0.0) used[static_cast<std::size_t>(i)] = 1;
      }
    }
  };
  check(objective, "objective");
  for (const auto& c : constraints) check(c, "constraint");
  for (int i = 0; i < num_vars; ++i)
    if (!used[static_cast<std::size_t>(i)])
      throw DomainError("gp: variable " + std::to_string(i) + " appears nowhere");
}

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::MaxIterations: return "max_iterations";
    case Status::Unbounded: return "unbounded";
  }
  return "unknown";
}

double LogSumExp::value(const Eigen::VectorXd& y) const {
  if (terms.size() == 1) return terms[0].offset + dot(terms[0].coeffs, y);
  double hi = -kInf;
  std::vector<double> z(terms.size());
  for (std::size_t j = 0; j < terms.size(); ++j) {
    z[j] = terms[j].offset + dot(terms[j].coeffs, y);
    hi = std::max(hi, z[j]);
  }
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double v : z) s += std::exp(v - hi);
  return hi + std::log(s);
}

double LogSumExp::accumulate(const Eigen::VectorXd& y, double scale, Eigen::VectorXd* grad,
                             Eigen::MatrixXd* hess) const {
  const std::size_t nt = terms.size();
  std::vector<double> w(nt);
  double hi = -kInf;
  for (std::size_t j = 0; j < nt; ++j) {
    w[j] = terms[j].offset + dot(terms[j].coeffs, y);
    hi = std::max(hi, w[j]);
  }
  double s = 0.0;
  for (auto& v : w) {
    v = std::exp(v - hi);
    s += v;
  }
  for (auto& v : w) v /= s;
  const double value = hi + std::log(s);
  if (!grad && !hess) return value;

  // gradient = sum w_j a_j ; Hessian = sum w_j a_j a_j^T - grad grad^T
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(y.size());
  for (std::size_t j = 0; j < nt; ++j)
    for (const auto& [i, a] : terms[j].coeffs) mean(i) += w[j] * a;
  if (grad) *grad += scale * mean;
  if (hess && nt > 1) {
    for (std::size_t j = 0; j < nt; ++j) {
      const auto& c = terms[j].coeffs;
      for (const auto& [i, a] : c)
        for (const auto& [l, b] : c) (*hess)(i, l) += scale * w[j] * a * b;
    }
    hess->noalias() -= scale * mean * mean.transpose();
  }
  return value;
}

Eigen::VectorXd LogSumExp::gradient(const Eigen::VectorXd& y) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(y.size());
  accumulate(y, 1.0, &g, nullptr);
  return g;
}

LogConvexProgram to_log_convex(const Problem& p) {
  auto convert = [](const Posynomial& q) {
    LogSumExp f;
    f.terms.reserve(q.terms.size());
    for (const auto& t : q.terms)
      f.terms.push_back({std::log(t.coefficient), merge(t.exponents)});
    return f;
  };
  LogConvexProgram lp;
  lp.num_vars = p.num_vars;
  lp.objective = convert(p.objective);
  lp.constraints.reserve(p.constraints.size());
  for (const auto& c : p.constraints) lp.constraints.push_back(convert(c));
  return lp;
}

Solution solve(const Problem& p, const Options& opts,
               const std::optional<Eigen::VectorXd>& warm_start) {
  p.validate();
  const LogConvexProgram lp = to_log_convex(p);
  const int n = lp.num_vars;
  Solution sol;

  LogConvexProgram boxed = lp;
  add_box(boxed, n);

  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  if (warm_start) {
    if (warm_start->size() != n || !(warm_start->array() > 0.0).all())
      throw DomainError("gp: warm start must be a positive vector of the right size");
    y = warm_start->array().log().matrix().cwiseMax(-0.9 * kLogBox).cwiseMin(0.9 * kLogBox);
  }

  if (!lp.constraints.empty() && !(max_constraint(lp, y) < 0.0)) {
    // Phase I: minimize s over (y, s) with f_i(y) - s <= 0 and s >= -1.
    LogConvexProgram ph;
    ph.num_vars = n + 1;
    ph.objective.terms.push_back({0.0, {{n, 1.0}}});
    add_box(ph, n);
    for (const auto& c : lp.constraints) {
      LogSumExp f = c;
      for (auto& t : f.terms) t.coeffs.emplace_back(n, -1.0);
      ph.constraints.push_back(std::move(f));
    }
    ph.constraints.push_back({{{-1.0, {{n, -1.0}}}}});
    Eigen::VectorXd z(n + 1);
    z.head(n) = y;
    z(n) = std::max(max_constraint(lp, y), -0.5) + 1.0;
    auto done = [n](const Eigen::VectorXd& v) { return v(n) < -kPhase1Margin; };
    const BarrierOutcome r1 = run_barrier(ph, z, opts, done);
    sol.newton_steps += r1.newton;
    y = r1.y.head(n);
    sol.phase1_slack = max_constraint(lp, y);
    if (!(sol.phase1_slack < -kPhase1Feasible)) {
      sol.status = r1.status == Status::MaxIterations ? Status::MaxIterations : Status::Infeasible;
      sol.values = y.array().exp().matrix();
      sol.objective = p.objective.eval(sol.values);
      sol.kkt_residual = kInf;
      return sol;
    }
  } else if (!lp.constraints.empty()) {
    sol.phase1_slack = max_constraint(lp, y);
  }

  const BarrierOutcome r2 = run_barrier(boxed, y, opts, nullptr);
  sol.newton_steps += r2.newton;
  sol.outer_iterations = r2.outer;
  sol.status = r2.status;
  sol.values = r2.y.array().exp().matrix();
  sol.objective = p.objective.eval(sol.values);
  sol.kkt_residual = Barrier{boxed}.kkt_residual(r2.y, r2.t);

  // A box face is active: the true problem is unbounded if the objective
  // keeps decreasing along the active faces without violating anything.
  Eigen::VectorXd ray = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    if (std::abs(r2.y(i)) > kLogBox - kBoxActive) ray(i) = r2.y(i) > 0 ? 1.0 : -1.0;
  if ((ray.array() != 0.0).any()) sol.status = certified_ray(lp, ray) ? Status::Unbounded : Status::MaxIterations;
  return sol;
}

void write_problem(std::ostream& out, const Problem& p) {
  const auto old_precision = out.precision(17);
  auto dump = [&out](const Posynomial& q) {
    for (const auto& t : q.terms) {
      out << t.coefficient;
      for (const auto& [i, a] : t.exponents) out << ' ' << i << ':' << a;
      out << '\n';
    }
  };
  out << "variables " << p.num_vars << '\n' << "objective\n";
  dump(p.objective);
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    out << "constraint " << i << '\n';
    dump(p.constraints[i]);
  }
  out.precision(old_precision);
}

}  // namespace cfmimo::gp
