#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bvcqr/model.hpp"

namespace bvcqr {

struct SamplerConfig {
  int iterations = 2000;  // total per chain, warmup included
  int warmup = 1000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 1;
  int chains = 4;
  double init_radius = 2.0;
  double max_energy_error = 1000.0;  // divergence threshold
  double divergence_tolerance = 0.10;  // fraction above which a fit is unreliable
  bool parallel = true;

  void validate() const;
  int retained() const { return iterations - warmup; }
};

/// Value-and-gradient callback over an unconstrained vector.
struct LogDensity {
  Eigen::Index dim = 0;
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)> value_and_gradient;
};

/// Wraps a model as a sampler target (the model must outlive the target).
LogDensity make_target(const Model& model);

struct PhasePoint {
  Eigen::VectorXd q;     // position
  Eigen::VectorXd p;     // momentum
  Eigen::VectorXd grad;  // gradient of log density at q
  double log_density = 0.0;
};

/// One leapfrog step with a diagonal inverse metric.
void leapfrog(const LogDensity& target, PhasePoint& z, double epsilon,
              const Eigen::VectorXd& inv_metric);

/// -log density + kinetic energy.
double hamiltonian(const PhasePoint& z, const Eigen::VectorXd& inv_metric);

/// Step-size adaptation by dual averaging toward a target acceptance statistic.
class DualAveraging {
 public:
  explicit DualAveraging(double target = 0.8, double gamma = 0.05, double t0 = 10.0,
                         double kappa = 0.75);
  void set_mu(double mu) { mu_ = mu; }
  void restart();
  /// Updates and returns the next step size.
  double learn(double accept_stat);
  double final_step_size() const { return std::exp(x_bar_); }

 private:
  double target_, gamma_, t0_, kappa_;
  double mu_ = 0.0;
  double counter_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0;
};

/// Fast/slow/fast warmup schedule with expanding variance windows.
class WindowedVarianceAdaptation {
 public:
  WindowedVarianceAdaptation(Eigen::Index dim, int num_warmup, int init_buffer = 75,
                             int term_buffer = 50, int base_window = 25);

  /// Feeds one warmup position; returns true (and updates `inv_metric`)
  /// when a slow window closes.
  bool learn(const Eigen::VectorXd& q, Eigen::VectorXd& inv_metric);

  /// Iteration indices (0-based) at which windows close.
  std::vector<int> window_ends() const;

 private:
  bool in_window() const;
  bool window_closes() const;
  void next_window();

  int num_warmup_, init_buffer_, term_buffer_, base_window_;
  int counter_ = 0, window_size_ = 0, next_window_end_ = 0;
  long samples_ = 0;
  Eigen::VectorXd mean_, m2_;
};

struct DrawStats {
  double energy = 0.0;
  double accept_stat = 0.0;
  double step_size = 0.0;
  int tree_depth = 0;
  int n_leapfrog = 0;
  bool divergent = false;
};

/// Post-warmup draws of one or more chains in the constrained view.
struct PosteriorDraws {
  std::vector<std::string> names;          // packing-order manifest
  std::vector<Eigen::MatrixXd> chains;     // per chain: retained x dim
  std::vector<std::vector<DrawStats>> stats;
  std::vector<double> step_size;           // adapted, per chain
  std::vector<Eigen::VectorXd> inv_metric; // adapted, per chain
  std::vector<int> warmup_divergences;
  SamplerConfig config;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(names.size()); }
  std::size_t num_chains() const { return chains.size(); }
  Eigen::Index draws_per_chain() const { return chains.empty() ? 0 : chains.front().rows(); }
  std::size_t divergent_count() const;
  double divergent_fraction() const;
  bool unreliable() const;

  /// Index of a named coordinate; throws a usage error when absent.
  Eigen::Index index_of(const std::string& name) const;

  /// All chains stacked in chain order.
  Eigen::MatrixXd pooled() const;
  /// One coordinate, all chains stacked in chain order.
  std::vector<double> pooled_column(Eigen::Index k) const;
};

/// Runs NUTS on an arbitrary target and returns draws on the target's own
/// (unconstrained) scale; `names` defaults to x[1..dim].
PosteriorDraws run_nuts(const LogDensity& target, const SamplerConfig& config,
                        std::vector<std::string> names = {},
                        std::function<Eigen::VectorXd(const Eigen::VectorXd&)> transform = {});

/// Runs NUTS on the model and stores draws in the constrained view.
PosteriorDraws sample(const Model& model, const SamplerConfig& config);

/// Derived per-chain seed.
std::uint64_t chain_seed(std::uint64_t seed, int chain);

}  // namespace bvcqr
