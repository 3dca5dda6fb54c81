#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace mortgp {

struct NelderMeadOptions {
  int max_iterations = 500;
  double tolerance = 1e-8;    // stop when the simplex value spread drops below
  double initial_step = 0.25;  // per-coordinate simplex offset
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  // Best objective after each iteration; non-increasing by construction.
  std::vector<double> best_trace;
};

// Derivative-free simplex minimization (reflection 1, expansion 2,
// contraction 0.5, shrink 0.5). The objective may return +infinity to
// reject a point. Throws std::invalid_argument if the start evaluates
// non-finite.
[[nodiscard]] NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& start, const NelderMeadOptions& options = {});

// Smooth bijection between a box and all of R^d:
//   x = lo + (hi - lo) * (tanh(t) + 1) / 2.
// Arguments clamp just inside the box so atanh stays finite.
struct BoxTransform {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  [[nodiscard]] Eigen::VectorXd to_unconstrained(const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::VectorXd to_box(const Eigen::VectorXd& t) const;
};

// n scrambled Halton points in [0, 1)^dim: one prime base per dimension
// with a seeded random digit permutation. Deterministic for a fixed seed.
[[nodiscard]] std::vector<Eigen::VectorXd> scrambled_halton(int n, int dim,
                                                            std::uint64_t seed);

}  // namespace mortgp
