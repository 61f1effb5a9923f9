#include "flattab/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flattab {

namespace {

// Cholesky solve of the (symmetric positive definite) Newton system.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
    if (diag <= 0.0) throw std::runtime_error("baseline_lr: Newton system not positive definite");
    const double ljj = std::sqrt(diag);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = v / ljj;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= a[i * n + k] * b[k];
    b[i] = v / a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double v = b[i];
    for (std::size_t k = i + 1; k < n; ++k) v -= a[k * n + i] * b[k];
    b[i] = v / a[i * n + i];
  }
  return b;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Binary regularized fit; returns weights over [features..., bias].
std::vector<double> fit_binary_lr(const Tensor& x, const std::vector<char>& y, double l2) {
  const std::size_t n = x.rows(), d = x.cols() + 1;
  std::vector<double> w(d, 0.0);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<double> grad(d, 0.0);
    std::vector<double> hess(d * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double z = w[d - 1];
      for (std::size_t j = 0; j + 1 < d; ++j) z += w[j] * x.at(i, j);
      const double p = sigmoid(z);
      const double r = p - (y[i] ? 1.0 : 0.0);
      const double s = std::max(p * (1.0 - p), 1e-10);
      for (std::size_t j = 0; j < d; ++j) {
        const double zj = j + 1 < d ? x.at(i, j) : 1.0;
        grad[j] += r * zj;
        for (std::size_t k = 0; k <= j; ++k) {
          const double zk = k + 1 < d ? x.at(i, k) : 1.0;
          hess[j * d + k] += s * zj * zk;
        }
      }
    }
    for (std::size_t j = 0; j + 1 < d; ++j) {
      grad[j] += l2 * w[j];
      hess[j * d + j] += l2;
    }
    hess[d * d - 1] += 1e-10;  // keep the bias row invertible
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = j + 1; k < d; ++k) hess[j * d + k] = hess[k * d + j];

    const std::vector<double> step = solve_spd(std::move(hess), grad);
    double max_step = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      w[j] -= step[j];
      max_step = std::max(max_step, std::fabs(step[j]));
    }
    if (max_step < 1e-10) break;
  }
  return w;
}

}  // namespace

std::vector<int> baseline_lr(const Task& task, double l2) {
  if (!(l2 > 0.0)) throw std::invalid_argument("baseline_lr: l2 strength must be positive");
  const std::size_t n = task.n_meta();
  if (n == 0) throw std::invalid_argument("baseline_lr: empty meta split");
  bool multi = false;
  {
    std::vector<char> seen(static_cast<std::size_t>(task.n_classes), 0);
    for (int y : task.meta_y) seen[static_cast<std::size_t>(y)] = 1;
    int present = 0;
    for (char s : seen) present += s;
    if (present < 2)
      throw std::runtime_error("baseline_lr: meta split of '" + task.source_name +
                               "' contains a single class");
    multi = task.n_classes > 2;
  }

  const std::size_t d = task.meta_x.cols() + 1;
  std::vector<std::vector<double>> scores;
  if (!multi) {
    std::vector<char> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = task.meta_y[i] == 1;
    scores.push_back(fit_binary_lr(task.meta_x, y, l2));
  } else {
    for (int c = 0; c < task.n_classes; ++c) {
      std::vector<char> y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = task.meta_y[i] == c;
      scores.push_back(fit_binary_lr(task.meta_x, y, l2));
    }
  }

  std::vector<int> out(task.n_target());
  for (std::size_t i = 0; i < task.n_target(); ++i) {
    if (!multi) {
      double z = scores[0][d - 1];
      for (std::size_t j = 0; j + 1 < d; ++j) z += scores[0][j] * task.target_x.at(i, j);
      out[i] = z > 0.0 ? 1 : 0;
    } else {
      int best = 0;
      double best_z = -1e300;
      for (int c = 0; c < task.n_classes; ++c) {
        double z = scores[static_cast<std::size_t>(c)][d - 1];
        for (std::size_t j = 0; j + 1 < d; ++j)
          z += scores[static_cast<std::size_t>(c)][j] * task.target_x.at(i, j);
        if (z > best_z) {
          best_z = z;
          best = c;
        }
      }
      out[i] = best;
    }
  }
  return out;
}

std::vector<int> baseline_knn(const Task& task, int k) {
  const std::size_t n = task.n_meta();
  if (n == 0) throw std::invalid_argument("baseline_knn: empty meta split");
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("baseline_knn: k=" + std::to_string(k) +
                                " out of range for n_meta=" + std::to_string(n));

  std::vector<int> out(task.n_target());
  std::vector<std::size_t> order(n);
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < task.n_target(); ++i) {
    for (std::size_t m = 0; m < n; ++m) {
      double s = 0.0;
      for (std::size_t j = 0; j < task.meta_x.cols(); ++j) {
        const double dv = task.target_x.at(i, j) - task.meta_x.at(m, j);
        s += dv * dv;
      }
      dist[m] = s;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
    });
    std::vector<int> votes(static_cast<std::size_t>(task.n_classes), 0);
    for (int t = 0; t < k; ++t) votes[static_cast<std::size_t>(task.meta_y[order[static_cast<std::size_t>(t)]])]++;
    int best = 0;
    for (int c = 1; c < task.n_classes; ++c)
      if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
    out[i] = best;
  }
  return out;
}

}  // namespace flattab
