#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "topk_uncert/core.hpp"
#include "topk_uncert/errors.hpp"
#include "topk_uncert/numeric.hpp"

namespace topk_uncert {

// Pairwise win counts over an indexed action set. wins[i][j] is the number of
// times action i was ranked above action j; the diagonal is zero.
struct PreferenceCounts {
  std::vector<ActionLabel> actions;
  std::vector<std::vector<std::uint64_t>> wins;

  std::size_t size() const { return actions.size(); }
};

struct BTConfig {
  // Pseudo-count added to every off-diagonal cell. Keeps the MLE bounded and
  // unique on the sparse, often disconnected comparison graphs that a handful
  // of short runs produce.
  double epsilon = 0.01;
  // Convergence threshold on max |delta s| between sweeps.
  double tol = 1e-8;
  // MM sweeps are microseconds each; the cap is sized so that lopsided
  // tournaments (every pair won M-0) still reach tol.
  std::size_t max_iters = 10000;
};

// Fitted latent utilities and their softmax normalization. The gauge is fixed
// so that sum(exp(s)) = 1, hence p_hat[i] == exp(s[i]).
struct BTScores {
  std::vector<ActionLabel> actions;
  std::vector<double> s;
  std::vector<double> p_hat;
  bool converged = false;
  std::size_t iterations = 0;
};

// MM iteration hit max_iters before max |delta s| fell below tol. The best
// iterate is carried in the payload.
struct NotConvergedError final : Error {
  explicit NotConvergedError(BTScores best_iterate)
      : Error("Bradley-Terry fit did not converge in " +
              std::to_string(best_iterate.iterations) + " iterations"),
        best(std::move(best_iterate)) {}
  BTScores best;
};

namespace detail {

inline void check_counts(const PreferenceCounts& c) {
  const std::size_t n = c.size();
  if (n == 0) throw InvalidArgumentError("preference counts over an empty action set");
  if (c.wins.size() != n) throw InvalidArgumentError("wins matrix is not square");
  for (std::size_t i = 0; i < n; ++i) {
    if (c.wins[i].size() != n) throw InvalidArgumentError("wins matrix is not square");
    if (c.wins[i][i] != 0) throw InvalidArgumentError("wins diagonal must be zero");
  }
}

// With no pseudo-counts the MLE exists only if every action has at least one
// win and one loss and the symmetrized comparison graph is connected.
inline void check_nondegenerate(const PreferenceCounts& c) {
  const std::size_t n = c.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t won = 0;
    std::uint64_t lost = 0;
    for (std::size_t j = 0; j < n; ++j) {
      won += c.wins[i][j];
      lost += c.wins[j][i];
    }
    if (won == 0) {
      throw DegenerateGraphError("action '" + c.actions[i].str() +
                                 "' has no wins; MLE unbounded without pseudo-counts");
    }
    if (lost == 0) {
      throw DegenerateGraphError("action '" + c.actions[i].str() +
                                 "' has no losses; MLE unbounded without pseudo-counts");
    }
  }
  std::vector<char> reached(n, 0);
  std::vector<std::size_t> stack{0};
  reached[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < n; ++j) {
      if (!reached[j] && (c.wins[i][j] + c.wins[j][i]) > 0) {
        reached[j] = 1;
        ++count;
        stack.push_back(j);
      }
    }
  }
  if (count != n) {
    throw DegenerateGraphError("comparison graph is disconnected; MLE non-unique");
  }
}

}  // namespace detail

// Pseudo-count-augmented Bradley-Terry log-likelihood:
//   LL(s) = sum_{i != j} (wins[i][j] + epsilon) * log(sigmoid(s_i - s_j)).
// Pairs with zero coefficient are skipped so extreme utilities cannot produce
// 0 * (-inf).
inline double bt_log_likelihood(const PreferenceCounts& c, std::span<const double> s,
                                double epsilon) {
  detail::check_counts(c);
  const std::size_t n = c.size();
  if (s.size() != n) throw InvalidArgumentError("score vector length mismatch");
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = static_cast<double>(c.wins[i][j]) + epsilon;
      if (w == 0.0) continue;
      ll += w * numeric::log_sigmoid(s[i] - s[j]);
    }
  }
  return ll;
}

// Analytic gradient of bt_log_likelihood with respect to s.
inline std::vector<double> bt_log_likelihood_gradient(const PreferenceCounts& c,
                                                      std::span<const double> s,
                                                      double epsilon) {
  detail::check_counts(c);
  const std::size_t n = c.size();
  if (s.size() != n) throw InvalidArgumentError("score vector length mismatch");
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double wij = static_cast<double>(c.wins[i][j]) + epsilon;
      const double wji = static_cast<double>(c.wins[j][i]) + epsilon;
      g[i] += wij * numeric::sigmoid(s[j] - s[i]) - wji * numeric::sigmoid(s[i] - s[j]);
    }
  }
  return g;
}

// Maximum-likelihood Bradley-Terry fit by minorization-maximization (Hunter's
// iteration), which ascends the likelihood monotonically without step-size
// tuning. MM is linearly convergent and crawls on lopsided tournaments, so
// every third sweep a geometric extrapolation of the log-utilities is tried
// and kept only when it improves the likelihood; ascent stays monotone.
// Starting point is s = 0; each sweep renormalizes to the sum(exp(s)) = 1
// gauge.
inline BTScores fit_bradley_terry(const PreferenceCounts& c, const BTConfig& cfg = {}) {
  detail::check_counts(c);
  if (cfg.epsilon < 0.0) throw InvalidArgumentError("epsilon must be >= 0");
  if (!(cfg.tol > 0.0)) throw InvalidArgumentError("tol must be > 0");
  if (cfg.max_iters < 1) throw InvalidArgumentError("max_iters must be >= 1");

  const std::size_t n = c.size();
  BTScores result;
  result.actions = c.actions;
  if (n == 1) {
    result.s = {0.0};
    result.p_hat = {1.0};
    result.converged = true;
    return result;
  }
  if (cfg.epsilon == 0.0) detail::check_nondegenerate(c);

  // Total wins per action and symmetric comparison totals, pseudo-counts in.
  std::vector<double> total_wins(n, 0.0);
  std::vector<std::vector<double>> totals(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double wij = static_cast<double>(c.wins[i][j]) + cfg.epsilon;
      total_wins[i] += wij;
      totals[i][j] = static_cast<double>(c.wins[i][j] + c.wins[j][i]) + 2.0 * cfg.epsilon;
    }
  }

  std::vector<double> gamma(n, 1.0 / static_cast<double>(n));
  std::vector<double> log_g(n);
  for (std::size_t i = 0; i < n; ++i) log_g[i] = std::log(gamma[i]);
  std::vector<double> log_prev(n, 0.0);
  std::vector<double> log_prev2(n, 0.0);
  std::vector<double> next(n, 0.0);
  bool converged = false;
  std::size_t iters = 0;
  while (iters < cfg.max_iters) {
    ++iters;
    for (std::size_t i = 0; i < n; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        denom += totals[i][j] / (gamma[i] + gamma[j]);
      }
      next[i] = total_wins[i] / denom;
    }
    double sum = 0.0;
    for (double g : next) sum += g;
    for (double& g : next) g /= sum;

    double delta = 0.0;
    log_prev2 = log_prev;
    log_prev = log_g;
    for (std::size_t i = 0; i < n; ++i) {
      log_g[i] = std::log(next[i]);
      delta = std::max(delta, std::abs(log_g[i] - log_prev[i]));
    }
    gamma.swap(next);
    if (delta < cfg.tol) {
      converged = true;
      break;
    }

    if (iters % 3 == 0 && iters >= 3) {
      // Estimate the linear contraction rate from the last two steps and jump
      // to the extrapolated geometric limit.
      double num = 0.0;
      double den = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d0 = log_prev[i] - log_prev2[i];
        const double d1 = log_g[i] - log_prev[i];
        num += d1 * d0;
        den += d0 * d0;
      }
      if (den > 0.0) {
        const double rate = num / den;
        if (rate > 0.0 && rate < 1.0) {
          std::vector<double> cand(n);
          for (std::size_t i = 0; i < n; ++i) {
            cand[i] = std::clamp(log_g[i] + (log_g[i] - log_prev[i]) * rate / (1.0 - rate),
                                 -700.0, 700.0);
          }
          if (bt_log_likelihood(c, cand, cfg.epsilon) >
              bt_log_likelihood(c, log_g, cfg.epsilon)) {
            double cand_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
              gamma[i] = std::exp(cand[i]);
              cand_sum += gamma[i];
            }
            for (std::size_t i = 0; i < n; ++i) {
              gamma[i] /= cand_sum;
              log_g[i] = std::log(gamma[i]);
            }
          }
        }
      }
    }
  }

  result.p_hat = gamma;
  result.s = log_g;
  result.converged = converged;
  result.iterations = iters;
  if (!converged) throw NotConvergedError(std::move(result));
  return result;
}

}  // namespace topk_uncert
