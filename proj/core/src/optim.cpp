#include "mortgp/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mortgp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double guarded(const std::function<double(const Eigen::VectorXd&)>& objective,
               const Eigen::VectorXd& x) {
  const double v = objective(x);
  return std::isnan(v) ? kInf : v;
}

}  // namespace

NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& start, const NelderMeadOptions& options) {
  const Eigen::Index dim = start.size();
  if (dim < 1) {
    throw std::invalid_argument("nelder-mead: empty start point");
  }

  // Simplex of dim + 1 vertices kept sorted by value.
  std::vector<Eigen::VectorXd> points;
  std::vector<double> values;
  points.reserve(static_cast<std::size_t>(dim) + 1);
  points.push_back(start);
  values.push_back(guarded(objective, start));
  if (!std::isfinite(values[0])) {
    throw std::invalid_argument(
        "nelder-mead: objective not finite at the start point");
  }
  for (Eigen::Index i = 0; i < dim; ++i) {
    Eigen::VectorXd p = start;
    p[i] += options.initial_step;
    points.push_back(p);
    values.push_back(guarded(objective, p));
  }

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  auto sort_simplex = [&] {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                     std::size_t b) {
      return values[a] < values[b];
    });
  };
  sort_simplex();

  NelderMeadResult result;
  result.best_trace.reserve(static_cast<std::size_t>(options.max_iterations));

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];

    if (std::isfinite(values[worst]) &&
        values[worst] - values[best] < options.tolerance) {
      result.iterations = iter;
      result.converged = true;
      break;
    }
    result.iterations = iter + 1;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      centroid += points[order[k]];
    }
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd reflected =
        centroid + (centroid - points[worst]);
    const double f_reflected = guarded(objective, reflected);

    if (f_reflected < values[best]) {
      const Eigen::VectorXd expanded =
          centroid + 2.0 * (centroid - points[worst]);
      const double f_expanded = guarded(objective, expanded);
      if (f_expanded < f_reflected) {
        points[worst] = expanded;
        values[worst] = f_expanded;
      } else {
        points[worst] = reflected;
        values[worst] = f_reflected;
      }
    } else if (f_reflected < values[second_worst]) {
      points[worst] = reflected;
      values[worst] = f_reflected;
    } else {
      const bool outside = f_reflected < values[worst];
      Eigen::VectorXd contracted;
      if (outside) {
        contracted = centroid + 0.5 * (reflected - centroid);
      } else {
        contracted = centroid - 0.5 * (centroid - points[worst]);
      }
      const double f_contracted = guarded(objective, contracted);
      if (f_contracted < std::min(f_reflected, values[worst])) {
        points[worst] = contracted;
        values[worst] = f_contracted;
      } else {
        // Shrink toward the best vertex.
        for (std::size_t k = 1; k < order.size(); ++k) {
          const std::size_t idx = order[k];
          points[idx] = points[best] + 0.5 * (points[idx] - points[best]);
          values[idx] = guarded(objective, points[idx]);
        }
      }
    }
    sort_simplex();
    result.best_trace.push_back(values[order.front()]);
  }

  result.x = points[order.front()];
  result.value = values[order.front()];
  return result;
}

Eigen::VectorXd BoxTransform::to_unconstrained(const Eigen::VectorXd& x) const {
  if (x.size() != lower.size() || x.size() != upper.size()) {
    throw std::invalid_argument("box transform: dimension mismatch");
  }
  Eigen::VectorXd t(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(upper[i] > lower[i])) {
      throw std::invalid_argument("box transform: bounds must be ordered");
    }
    double unit = (x[i] - lower[i]) / (upper[i] - lower[i]);
    unit = std::clamp(unit, 1e-12, 1.0 - 1e-12);
    t[i] = std::atanh(2.0 * unit - 1.0);
  }
  return t;
}

Eigen::VectorXd BoxTransform::to_box(const Eigen::VectorXd& t) const {
  if (t.size() != lower.size() || t.size() != upper.size()) {
    throw std::invalid_argument("box transform: dimension mismatch");
  }
  Eigen::VectorXd x(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    x[i] = lower[i] + (upper[i] - lower[i]) * 0.5 * (std::tanh(t[i]) + 1.0);
  }
  return x;
}

namespace {

std::vector<int> primes(int count) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int candidate = 2; static_cast<int>(out.size()) < count; ++candidate) {
    bool is_prime = true;
    for (int d = 2; d * d <= candidate; ++d) {
      if (candidate % d == 0) {
        is_prime = false;
        break;
      }
    }
    if (is_prime) out.push_back(candidate);
  }
  return out;
}

}  // namespace

std::vector<Eigen::VectorXd> scrambled_halton(int n, int dim,
                                              std::uint64_t seed) {
  if (n < 1 || dim < 1) {
    throw std::invalid_argument("halton: need n >= 1 and dim >= 1");
  }
  const std::vector<int> bases = primes(dim);
  std::mt19937_64 engine(seed);

  // Per-dimension digit permutations fixing pi(0) = 0 so that trailing
  // zero digits stay zero (otherwise every point gains spurious mass).
  std::vector<std::vector<int>> permutations;
  permutations.reserve(static_cast<std::size_t>(dim));
  for (int d = 0; d < dim; ++d) {
    std::vector<int> perm(static_cast<std::size_t>(bases[d]));
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size() - 1; i >= 2; --i) {
      const std::size_t j =
          1 + static_cast<std::size_t>(engine() % (i));  // within [1, i]
      std::swap(perm[i], perm[j]);
    }
    permutations.push_back(std::move(perm));
  }

  std::vector<Eigen::VectorXd> points;
  points.reserve(static_cast<std::size_t>(n));
  for (int index = 1; index <= n; ++index) {
    Eigen::VectorXd point(dim);
    for (int d = 0; d < dim; ++d) {
      const int base = bases[d];
      const auto& perm = permutations[static_cast<std::size_t>(d)];
      double value = 0.0;
      double scale = 1.0 / base;
      int k = index;
      while (k > 0) {
        value += scale * perm[static_cast<std::size_t>(k % base)];
        k /= base;
        scale /= base;
      }
      point[d] = value;
    }
    points.push_back(std::move(point));
  }
  return points;
}

}  // namespace mortgp
