#include "bvcqr/sampler.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "bvcqr/error.hpp"
#include "bvcqr/stats.hpp"

namespace bvcqr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

bool no_u_turn(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
               const Eigen::VectorXd& rho) {
  return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
}

class NutsChain {
 public:
  NutsChain(const LogDensity& target, const SamplerConfig& config, std::uint64_t seed)
      : target_(target),
        config_(config),
        rng_(seed),
        inv_metric_(Eigen::VectorXd::Ones(target.dim)) {}

  void initialize() {
    std::uniform_real_distribution<double> init(-config_.init_radius, config_.init_radius);
    const Eigen::Index d = target_.dim;
    for (int attempt = 0; attempt < 100; ++attempt) {
      z_.q.resize(d);
      for (Eigen::Index k = 0; k < d; ++k) z_.q[k] = init(rng_);
      z_.log_density = target_.value_and_gradient(z_.q, z_.grad);
      if (std::isfinite(z_.log_density) && z_.grad.allFinite()) {
        z_.p = Eigen::VectorXd::Zero(d);
        return;
      }
    }
    throw_numerical("could not find a finite initial density after 100 attempts");
  }

  // Double or halve the step size until one leapfrog step crosses acceptance 0.8.
  void init_step_size() {
    PhasePoint z0 = z_;
    sample_momentum(z0);
    const double H0 = hamiltonian(z0, inv_metric_);
    PhasePoint z = z0;
    leapfrog(target_, z, epsilon_, inv_metric_);
    double h = hamiltonian(z, inv_metric_);
    if (std::isnan(h)) h = kInf;
    const double direction = (H0 - h) > std::log(0.8) ? 1.0 : -1.0;
    for (int guard = 0; guard < 100; ++guard) {
      z = z0;
      sample_momentum(z);
      const double H = hamiltonian(z, inv_metric_);
      leapfrog(target_, z, epsilon_, inv_metric_);
      h = hamiltonian(z, inv_metric_);
      if (std::isnan(h)) h = kInf;
      const double delta = H - h;
      if (direction == 1.0 && !(delta > std::log(0.8))) break;
      if (direction == -1.0 && !(delta < std::log(0.8))) break;
      epsilon_ = direction == 1.0 ? 2.0 * epsilon_ : 0.5 * epsilon_;
      if (epsilon_ > 1e7 || epsilon_ < 1e-12) break;
    }
  }

  DrawStats transition() {
    sample_momentum(z_);
    const Eigen::VectorXd p0 = z_.p;
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;

    Eigen::VectorXd p_sharp0 = inv_metric_.cwiseProduct(p0);
    Eigen::VectorXd p_fwd_fwd = p0, p_sharp_fwd_fwd = p_sharp0;
    Eigen::VectorXd p_fwd_bck = p0, p_sharp_fwd_bck = p_sharp0;
    Eigen::VectorXd p_bck_fwd = p0, p_sharp_bck_fwd = p_sharp0;
    Eigen::VectorXd p_bck_bck = p0, p_sharp_bck_bck = p_sharp0;
    Eigen::VectorXd rho = p0;

    double log_sum_weight = 0.0;
    const double H0 = hamiltonian(z_, inv_metric_);
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    divergent_ = false;
    int depth = 0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    while (depth < config_.max_tree_depth) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(rho.size());
      Eigen::VectorXd rho_bck = Eigen::VectorXd::Zero(rho.size());
      bool valid = false;
      double lsw_subtree = -kInf;

      if (unif(rng_) > 0.5) {
        z_ = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                           p_fwd_fwd, H0, 1.0, n_leapfrog, lsw_subtree, sum_metro_prob);
        z_fwd = z_;
      } else {
        z_ = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                           p_bck_bck, H0, -1.0, n_leapfrog, lsw_subtree, sum_metro_prob);
        z_bck = z_;
      }
      if (!valid) break;
      ++depth;

      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (unif(rng_) < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = no_u_turn(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      Eigen::VectorXd rho_ext = rho_bck + p_fwd_bck;
      persist = persist && no_u_turn(p_sharp_bck_bck, p_sharp_fwd_bck, rho_ext);
      rho_ext = rho_fwd + p_bck_fwd;
      persist = persist && no_u_turn(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_ext);
      if (!persist) break;
    }

    z_ = z_sample;
    DrawStats st;
    st.tree_depth = depth;
    st.n_leapfrog = n_leapfrog;
    st.divergent = divergent_;
    st.accept_stat = n_leapfrog > 0 ? sum_metro_prob / n_leapfrog : 0.0;
    st.step_size = epsilon_;
    st.energy = hamiltonian(z_, inv_metric_);
    return st;
  }

  PhasePoint& state() { return z_; }
  double& step_size() { return epsilon_; }
  Eigen::VectorXd& inv_metric() { return inv_metric_; }

 private:
  void sample_momentum(PhasePoint& z) {
    std::normal_distribution<double> normal(0.0, 1.0);
    z.p.resize(target_.dim);
    for (Eigen::Index k = 0; k < target_.dim; ++k)
      z.p[k] = normal(rng_) / std::sqrt(inv_metric_[k]);
  }

  bool build_tree(int depth, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg,
                  Eigen::VectorXd& p_sharp_end, Eigen::VectorXd& rho, Eigen::VectorXd& p_beg,
                  Eigen::VectorXd& p_end, double H0, double sign, int& n_leapfrog,
                  double& log_sum_weight, double& sum_metro_prob) {
    if (depth == 0) {
      leapfrog(target_, z_, sign * epsilon_, inv_metric_);
      ++n_leapfrog;
      double h = hamiltonian(z_, inv_metric_);
      if (std::isnan(h)) h = kInf;
      if (h - H0 > config_.max_energy_error) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, H0 - h);
      sum_metro_prob += H0 - h > 0 ? 1.0 : std::exp(H0 - h);
      z_propose = z_;
      p_sharp_beg = inv_metric_.cwiseProduct(z_.p);
      p_sharp_end = p_sharp_beg;
      rho += z_.p;
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent_;
    }

    const Eigen::Index d = target_.dim;
    double lsw_init = -kInf;
    Eigen::VectorXd p_init_end(d), p_sharp_init_end(d), rho_init = Eigen::VectorXd::Zero(d);
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg,
                    p_init_end, H0, sign, n_leapfrog, lsw_init, sum_metro_prob))
      return false;

    PhasePoint z_propose_final = z_;
    double lsw_final = -kInf;
    Eigen::VectorXd p_final_beg(d), p_sharp_final_beg(d), rho_final = Eigen::VectorXd::Zero(d);
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final,
                    p_final_beg, p_end, H0, sign, n_leapfrog, lsw_final, sum_metro_prob))
      return false;

    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      if (unif(rng_) < std::exp(lsw_final - lsw_subtree)) z_propose = z_propose_final;
    }

    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = no_u_turn(p_sharp_beg, p_sharp_end, rho_subtree);
    Eigen::VectorXd rho_ext = rho_init + p_final_beg;
    persist = persist && no_u_turn(p_sharp_beg, p_sharp_final_beg, rho_ext);
    rho_ext = rho_final + p_init_end;
    persist = persist && no_u_turn(p_sharp_init_end, p_sharp_end, rho_ext);
    return persist;
  }

  const LogDensity& target_;
  const SamplerConfig& config_;
  std::mt19937_64 rng_;
  PhasePoint z_;
  Eigen::VectorXd inv_metric_;
  double epsilon_ = 1.0;
  bool divergent_ = false;
};

struct ChainOutput {
  Eigen::MatrixXd draws;
  std::vector<DrawStats> stats;
  double step_size = 0.0;
  Eigen::VectorXd inv_metric;
  int warmup_divergences = 0;
};

ChainOutput run_chain(const LogDensity& target, const SamplerConfig& config, int chain,
                      const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& transform,
                      Eigen::Index out_dim) {
  NutsChain nuts(target, config, chain_seed(config.seed, chain));
  nuts.initialize();
  nuts.init_step_size();

  DualAveraging step_adapt(config.target_accept);
  step_adapt.set_mu(std::log(10.0 * nuts.step_size()));
  WindowedVarianceAdaptation metric_adapt(target.dim, config.warmup);

  ChainOutput out;
  out.draws.resize(config.retained(), out_dim);
  out.stats.reserve(static_cast<std::size_t>(config.retained()));

  for (int it = 0; it < config.iterations; ++it) {
    const bool warming = it < config.warmup;
    DrawStats st = nuts.transition();
    if (warming) {
      if (st.divergent) ++out.warmup_divergences;
      nuts.step_size() = step_adapt.learn(st.accept_stat);
      if (metric_adapt.learn(nuts.state().q, nuts.inv_metric())) {
        nuts.init_step_size();
        step_adapt.set_mu(std::log(10.0 * nuts.step_size()));
        step_adapt.restart();
      }
      if (it + 1 == config.warmup) nuts.step_size() = step_adapt.final_step_size();
      continue;
    }
    const Eigen::Index row = it - config.warmup;
    out.draws.row(row) = transform ? transform(nuts.state().q).transpose()
                                   : nuts.state().q.transpose();
    out.stats.push_back(st);
  }
  out.step_size = nuts.step_size();
  out.inv_metric = nuts.inv_metric();
  return out;
}

}  // namespace

void SamplerConfig::validate() const {
  if (iterations <= 0) throw_usage("iterations must be positive");
  if (warmup < 0 || warmup >= iterations) throw_usage("warmup must satisfy 0 <= warmup < iterations");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw_usage("target_accept must lie in (0, 1)");
  if (max_tree_depth < 1) throw_usage("max_tree_depth must be at least 1");
  if (chains < 1) throw_usage("chains must be at least 1");
  if (!(init_radius > 0.0)) throw_usage("init_radius must be positive");
}

LogDensity make_target(const Model& model) {
  return {model.dim(), [&model](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
            return model.log_density_gradient(u, g);
          }};
}

void leapfrog(const LogDensity& target, PhasePoint& z, double epsilon,
              const Eigen::VectorXd& inv_metric) {
  z.p += 0.5 * epsilon * z.grad;
  z.q += epsilon * inv_metric.cwiseProduct(z.p);
  z.log_density = target.value_and_gradient(z.q, z.grad);
  if (!std::isfinite(z.log_density) || z.grad.size() != z.q.size() || !z.grad.allFinite()) {
    z.log_density = -kInf;
    z.grad = Eigen::VectorXd::Zero(z.q.size());
    return;
  }
  z.p += 0.5 * epsilon * z.grad;
}

double hamiltonian(const PhasePoint& z, const Eigen::VectorXd& inv_metric) {
  return -z.log_density + 0.5 * z.p.cwiseAbs2().dot(inv_metric);
}

DualAveraging::DualAveraging(double target, double gamma, double t0, double kappa)
    : target_(target), gamma_(gamma), t0_(t0), kappa_(kappa) {}

void DualAveraging::restart() {
  counter_ = 0.0;
  s_bar_ = 0.0;
  x_bar_ = 0.0;
}

double DualAveraging::learn(double accept_stat) {
  counter_ += 1.0;
  accept_stat = std::min(1.0, accept_stat);
  const double eta = 1.0 / (counter_ + t0_);
  s_bar_ = (1.0 - eta) * s_bar_ + eta * (target_ - accept_stat);
  const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
  const double x_eta = std::pow(counter_, -kappa_);
  x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
  return std::exp(x);
}

WindowedVarianceAdaptation::WindowedVarianceAdaptation(Eigen::Index dim, int num_warmup,
                                                       int init_buffer, int term_buffer,
                                                       int base_window)
    : num_warmup_(num_warmup),
      init_buffer_(init_buffer),
      term_buffer_(term_buffer),
      base_window_(base_window),
      mean_(Eigen::VectorXd::Zero(dim)),
      m2_(Eigen::VectorXd::Zero(dim)) {
  if (num_warmup < 20) {
    // too short to adapt the metric; windows never open
    init_buffer_ = num_warmup;
    term_buffer_ = 0;
    base_window_ = 0;
  } else if (init_buffer_ + base_window_ + term_buffer_ > num_warmup) {
    init_buffer_ = static_cast<int>(0.15 * num_warmup);
    term_buffer_ = static_cast<int>(0.10 * num_warmup);
    base_window_ = num_warmup - (init_buffer_ + term_buffer_);
  }
  window_size_ = base_window_;
  next_window_end_ = init_buffer_ + base_window_ - 1;
}

bool WindowedVarianceAdaptation::in_window() const {
  return counter_ >= init_buffer_ && counter_ < num_warmup_ - term_buffer_ &&
         counter_ != num_warmup_ && base_window_ > 0;
}

bool WindowedVarianceAdaptation::window_closes() const {
  return counter_ == next_window_end_ && counter_ != num_warmup_ && base_window_ > 0;
}

void WindowedVarianceAdaptation::next_window() {
  if (next_window_end_ == num_warmup_ - term_buffer_ - 1) return;
  window_size_ *= 2;
  next_window_end_ = counter_ + window_size_;
  if (next_window_end_ != num_warmup_ - term_buffer_ - 1) {
    const int boundary = next_window_end_ + 2 * window_size_;
    if (boundary >= num_warmup_ - term_buffer_) next_window_end_ = num_warmup_ - term_buffer_ - 1;
  }
}

bool WindowedVarianceAdaptation::learn(const Eigen::VectorXd& q, Eigen::VectorXd& inv_metric) {
  if (in_window()) {
    ++samples_;
    const Eigen::VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(samples_);
    m2_ += delta.cwiseProduct(q - mean_);
  }
  if (window_closes()) {
    next_window();
    const double n = static_cast<double>(samples_);
    if (samples_ > 1) {
      const Eigen::VectorXd var = m2_ / (n - 1.0);
      inv_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
    }
    samples_ = 0;
    mean_.setZero();
    m2_.setZero();
    ++counter_;
    return true;
  }
  ++counter_;
  return false;
}

std::vector<int> WindowedVarianceAdaptation::window_ends() const {
  WindowedVarianceAdaptation probe(1, num_warmup_, init_buffer_, term_buffer_, base_window_);
  std::vector<int> ends;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(1), m = Eigen::VectorXd::Ones(1);
  for (int it = 0; it < num_warmup_; ++it)
    if (probe.learn(q, m)) ends.push_back(it);
  return ends;
}

std::size_t PosteriorDraws::divergent_count() const {
  std::size_t count = 0;
  for (const auto& chain : stats)
    for (const auto& st : chain) count += st.divergent ? 1 : 0;
  return count;
}

double PosteriorDraws::divergent_fraction() const {
  std::size_t total = 0;
  for (const auto& chain : stats) total += chain.size();
  return total == 0 ? 0.0 : static_cast<double>(divergent_count()) / static_cast<double>(total);
}

bool PosteriorDraws::unreliable() const {
  return divergent_fraction() > config.divergence_tolerance;
}

Eigen::Index PosteriorDraws::index_of(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return static_cast<Eigen::Index>(k);
  throw_usage("unknown parameter '" + name + "'");
}

Eigen::MatrixXd PosteriorDraws::pooled() const {
  Eigen::Index rows = 0;
  for (const auto& c : chains) rows += c.rows();
  Eigen::MatrixXd out(rows, dim());
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    out.middleRows(r, c.rows()) = c;
    r += c.rows();
  }
  return out;
}

std::vector<double> PosteriorDraws::pooled_column(Eigen::Index k) const {
  std::vector<double> out;
  for (const auto& c : chains)
    for (Eigen::Index r = 0; r < c.rows(); ++r) out.push_back(c(r, k));
  return out;
}

std::uint64_t chain_seed(std::uint64_t seed, int chain) {
  return stats::splitmix64(stats::splitmix64(seed) ^
                           (0x632be59bd9b4e019ULL * static_cast<std::uint64_t>(chain + 1)));
}

PosteriorDraws run_nuts(const LogDensity& target, const SamplerConfig& config,
                        std::vector<std::string> names,
                        std::function<Eigen::VectorXd(const Eigen::VectorXd&)> transform) {
  config.validate();
  if (names.empty()) {
    for (Eigen::Index k = 0; k < target.dim; ++k)
      names.push_back("x[" + std::to_string(k + 1) + "]");
  }
  const auto out_dim = static_cast<Eigen::Index>(names.size());
  std::vector<ChainOutput> outputs(static_cast<std::size_t>(config.chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.chains));

  auto work = [&](int c) {
    try {
      outputs[static_cast<std::size_t>(c)] = run_chain(target, config, c, transform, out_dim);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };
  if (config.parallel && config.chains > 1) {
    std::vector<std::thread> threads;
    for (int c = 0; c < config.chains; ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  } else {
    for (int c = 0; c < config.chains; ++c) work(c);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  PosteriorDraws draws;
  draws.names = std::move(names);
  draws.config = config;
  for (auto& o : outputs) {
    draws.chains.push_back(std::move(o.draws));
    draws.stats.push_back(std::move(o.stats));
    draws.step_size.push_back(o.step_size);
    draws.inv_metric.push_back(std::move(o.inv_metric));
    draws.warmup_divergences.push_back(o.warmup_divergences);
  }
  return draws;
}

PosteriorDraws sample(const Model& model, const SamplerConfig& config) {
  const LogDensity target = make_target(model);
  return run_nuts(target, config, model.layout().names(),
                  [&model](const Eigen::VectorXd& u) { return model.constrain(u).flatten(); });
}

}  // namespace bvcqr
