#include "drivadv/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "drivadv/errors.hpp"

namespace drivadv::cmaes {

namespace {

constexpr int kStagnationWindow = 20;

struct RunOutcome {
  Vector best_point;
  double best_fitness = std::numeric_limits<double>::infinity();
  int generations = 0;
  std::string stop_reason;
};

class Run {
 public:
  Run(const Config& cfg, std::size_t lambda, Vector mean, std::mt19937_64& rng)
      : cfg_(cfg), n_(static_cast<Eigen::Index>(cfg.dim)), lambda_(lambda), rng_(rng) {
    mu_ = lambda_ / 2;
    weights_.resize(static_cast<Eigen::Index>(mu_));
    for (std::size_t i = 0; i < mu_; ++i)
      weights_(static_cast<Eigen::Index>(i)) =
          std::log(static_cast<double>(mu_) + 0.5) - std::log(static_cast<double>(i + 1));
    weights_ /= weights_.sum();
    mueff_ = 1.0 / weights_.squaredNorm();

    const double n = static_cast<double>(n_);
    cc_ = (4.0 + mueff_ / n) / (n + 4.0 + 2.0 * mueff_ / n);
    cs_ = (mueff_ + 2.0) / (n + mueff_ + 5.0);
    c1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mueff_);
    cmu_ = std::min(1.0 - c1_, 2.0 * (mueff_ - 2.0 + 1.0 / mueff_) / ((n + 2.0) * (n + 2.0) + mueff_));
    damps_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff_ - 1.0) / (n + 1.0)) - 1.0) + cs_;
    chi_n_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    mean_ = std::move(mean);
    sigma_ = cfg.initial_sigma;
    pc_ = Vector::Zero(n_);
    ps_ = Vector::Zero(n_);
    cov_ = Matrix::Identity(n_, n_);
    basis_ = Matrix::Identity(n_, n_);
    scales_ = Vector::Ones(n_);
  }

  RunOutcome run(const Objective& f, const Observer& observer, int generation_budget,
                 Result& total) {
    RunOutcome out;
    out.best_point = mean_;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vector> xs(lambda_), ys(lambda_);
    std::vector<double> fit(lambda_);
    std::vector<std::size_t> order(lambda_);
    std::vector<double> best_so_far;

    for (int g = 0; g < generation_budget; ++g) {
      for (std::size_t k = 0; k < lambda_; ++k) {
        Vector z(n_);
        for (Eigen::Index i = 0; i < n_; ++i) z(i) = normal(rng_);
        Vector x = mean_ + sigma_ * (basis_ * scales_.cwiseProduct(z));
        if (cfg_.bounds) x = x.cwiseMax(cfg_.bounds->lower).cwiseMin(cfg_.bounds->upper);
        ys[k] = (x - mean_) / sigma_;
        xs[k] = std::move(x);
      }
      for (std::size_t k = 0; k < lambda_; ++k) {
        fit[k] = f(xs[k]);
        ++total.evaluations;
        if (!std::isfinite(fit[k])) {
          Vector bp = out.best_point;
          throw NonFiniteObjective({bp.data(), bp.data() + bp.size()}, out.best_fitness);
        }
        if (fit[k] < out.best_fitness) {
          out.best_fitness = fit[k];
          out.best_point = xs[k];
        }
      }
      if (observer) observer(xs, fit);
      ++out.generations;

      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });
      total.history.push_back(fit[order[0]]);
      best_so_far.push_back(out.best_fitness);

      if (cfg_.stop_fitness && out.best_fitness <= *cfg_.stop_fitness) {
        out.stop_reason = "stop_fitness";
        return out;
      }

      update(ys, order, g);

      if (cfg_.target_tolerance > 0.0 && best_so_far.size() > kStagnationWindow) {
        const double earlier = best_so_far[best_so_far.size() - 1 - kStagnationWindow];
        if (earlier - out.best_fitness < cfg_.target_tolerance) {
          out.stop_reason = "stagnation";
          return out;
        }
      }
      if (!(sigma_ * scales_.maxCoeff() > 1e-300) || !cov_.allFinite()) {
        out.stop_reason = "degenerate";
        return out;
      }
    }
    out.stop_reason = "max_generations";
    return out;
  }

 private:
  void update(const std::vector<Vector>& ys, const std::vector<std::size_t>& order, int g) {
    Vector yw = Vector::Zero(n_);
    for (std::size_t i = 0; i < mu_; ++i) yw += weights_(static_cast<Eigen::Index>(i)) * ys[order[i]];
    mean_ += sigma_ * yw;

    Matrix inv_sqrt = basis_ * scales_.cwiseInverse().asDiagonal() * basis_.transpose();
    ps_ = (1.0 - cs_) * ps_ + std::sqrt(cs_ * (2.0 - cs_) * mueff_) * (inv_sqrt * yw);
    const double ps_norm = ps_.norm();
    const double denom = std::sqrt(1.0 - std::pow(1.0 - cs_, 2.0 * (g + 1)));
    const double n = static_cast<double>(n_);
    const bool hsig = ps_norm / denom < (1.4 + 2.0 / (n + 1.0)) * chi_n_;
    pc_ = (1.0 - cc_) * pc_ + (hsig ? std::sqrt(cc_ * (2.0 - cc_) * mueff_) : 0.0) * yw;

    Matrix rank_mu = Matrix::Zero(n_, n_);
    for (std::size_t i = 0; i < mu_; ++i) {
      const Vector& y = ys[order[i]];
      rank_mu.noalias() += weights_(static_cast<Eigen::Index>(i)) * y * y.transpose();
    }
    const double delta_h = hsig ? 0.0 : cc_ * (2.0 - cc_);
    cov_ = (1.0 - c1_ - cmu_) * cov_ + c1_ * (pc_ * pc_.transpose() + delta_h * cov_) + cmu_ * rank_mu;
    cov_ = 0.5 * (cov_ + cov_.transpose()).eval();

    sigma_ *= std::exp((cs_ / damps_) * (ps_norm / chi_n_ - 1.0));

    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_);
    Vector ev = eig.eigenvalues().cwiseMax(1e-300);
    basis_ = eig.eigenvectors();
    scales_ = ev.cwiseSqrt();
  }

  const Config& cfg_;
  Eigen::Index n_;
  std::size_t lambda_;
  std::size_t mu_ = 0;
  std::mt19937_64& rng_;
  Vector weights_;
  double mueff_ = 0, cc_ = 0, cs_ = 0, c1_ = 0, cmu_ = 0, damps_ = 0, chi_n_ = 0;
  Vector mean_;
  double sigma_ = 0;
  Vector pc_, ps_;
  Matrix cov_, basis_;
  Vector scales_;
};

}  // namespace

std::size_t Config::effective_population() const {
  if (population != 0) return population;
  return 4 + static_cast<std::size_t>(std::floor(3.0 * std::log(static_cast<double>(dim))));
}

void Config::validate() const {
  if (dim == 0) throw InvalidConfig("CMA-ES dimension must be positive");
  if (static_cast<std::size_t>(initial_mean.size()) != dim)
    throw DimensionMismatch("CMA-ES initial mean", dim, initial_mean.size());
  if (!initial_mean.allFinite()) throw InvalidConfig("CMA-ES initial mean must be finite");
  if (!(initial_sigma > 0.0) || !std::isfinite(initial_sigma))
    throw InvalidConfig("CMA-ES initial sigma must be positive");
  if (effective_population() < 2) throw InvalidConfig("CMA-ES population must be at least 2");
  if (max_generations < 1) throw InvalidConfig("CMA-ES needs at least one generation");
  if (bounds) {
    if (static_cast<std::size_t>(bounds->lower.size()) != dim)
      throw DimensionMismatch("CMA-ES lower bound", dim, bounds->lower.size());
    if (static_cast<std::size_t>(bounds->upper.size()) != dim)
      throw DimensionMismatch("CMA-ES upper bound", dim, bounds->upper.size());
    for (std::size_t i = 0; i < dim; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      if (!(bounds->lower(k) < bounds->upper(k)))
        throw InvalidConfig("CMA-ES bound " + std::to_string(i) + " has lower >= upper");
      if (initial_mean(k) < bounds->lower(k) || initial_mean(k) > bounds->upper(k))
        throw InvalidConfig("CMA-ES initial mean lies outside the bounds");
    }
  }
}

Result minimize(const Objective& objective, const Config& config, const Observer& observer) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  Result result;
  std::size_t lambda = config.effective_population();
  int budget = config.max_generations;
  const int max_runs = config.restart_on_stagnation ? 2 : 1;

  result.best_fitness = std::numeric_limits<double>::infinity();
  result.best_point = config.initial_mean;
  for (int run_index = 0; run_index < max_runs && budget > 0; ++run_index) {
    Run run(config, lambda, config.initial_mean, rng);
    RunOutcome out = run.run(objective, observer, budget, result);
    budget -= out.generations;
    result.generations_used += out.generations;
    if (out.best_fitness < result.best_fitness) {
      result.best_fitness = out.best_fitness;
      result.best_point = out.best_point;
    }
    result.stop_reason = out.stop_reason;
    if (out.stop_reason != "stagnation") break;
    if (run_index + 1 < max_runs) {
      ++result.restarts;
      lambda *= 2;
    }
  }
  return result;
}

Result maximize(const Objective& objective, const Config& config, const Observer& observer) {
  auto negated = [&](const Vector& x) { return -objective(x); };
  Observer flipped;
  if (observer) {
    flipped = [&](std::span<const Vector> xs, std::span<const double> fit) {
      std::vector<double> pos(fit.size());
      for (std::size_t i = 0; i < fit.size(); ++i) pos[i] = -fit[i];
      observer(xs, pos);
    };
  }
  try {
    Result r = minimize(negated, config, flipped);
    r.best_fitness = -r.best_fitness;
    for (double& h : r.history) h = -h;
    return r;
  } catch (const NonFiniteObjective& e) {
    throw NonFiniteObjective(e.best_point(), -e.best_fitness());
  }
}

}  // namespace drivadv::cmaes
