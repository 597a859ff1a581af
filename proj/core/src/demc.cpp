#include "earthpress/demc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include "earthpress/errors.hpp"
#include "earthpress/pressure_field.hpp"

namespace earthpress {

void SamplerConfig::validate(std::size_t dimension) const {
  const std::size_t minimum = std::max<std::size_t>(3, 2 * dimension);
  if (chains < minimum) {
    throw ConfigError("DE-MC needs at least " + std::to_string(minimum) + " chains for " +
                      std::to_string(dimension) + " parameters, got " + std::to_string(chains));
  }
  if (iterations == 0) throw ConfigError("iterations must be at least 1");
  if (jump_rate && !(*jump_rate > 0.0)) throw ConfigError("jump rate must be positive");
  if (jitter_std && !(*jitter_std > 0.0)) throw ConfigError("jitter std must be positive");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw ConfigError("burn-in fraction must lie in [0, 1)");
  }
  if (thin == 0) throw ConfigError("thinning stride must be at least 1");
  if (workers == 0) throw ConfigError("worker count must be at least 1");
}

ProposalKernel ProposalKernel::resolve(const SamplerConfig& config, const PriorSpec& prior) {
  ProposalKernel kernel;
  kernel.jump_rate = config.jump_rate.value_or(2.38 / std::sqrt(2.0 * static_cast<double>(prior.dimension)));
  kernel.jitter_std = config.jitter_std.value_or(1e-3 * (prior.q_max - prior.q_min));
  return kernel;
}

ChainEnsemble::ChainEnsemble(std::size_t chains, std::size_t dimension)
    : chains_(chains),
      dimension_(dimension),
      current_(chains * dimension, 0.0),
      log_density_(chains, kLogZero) {}

std::span<double> ChainEnsemble::state(std::size_t chain) {
  return {current_.data() + chain * dimension_, dimension_};
}

std::span<const double> ChainEnsemble::state(std::size_t chain) const {
  return {current_.data() + chain * dimension_, dimension_};
}

void ChainEnsemble::record(std::size_t iteration) {
  stored_iterations_.push_back(iteration);
  history_.insert(history_.end(), current_.begin(), current_.end());
}

void ChainEnsemble::append_history(std::size_t iteration, std::span<const double> states) {
  if (states.size() != chains_ * dimension_) {
    throw DimensionError("history entry needs chains x dimension values");
  }
  stored_iterations_.push_back(iteration);
  history_.insert(history_.end(), states.begin(), states.end());
}

std::span<const double> ChainEnsemble::stored_state(std::size_t k, std::size_t chain) const {
  return {history_.data() + (k * chains_ + chain) * dimension_, dimension_};
}

std::size_t ChainEnsemble::first_retained() const {
  const auto cutoff = static_cast<std::size_t>(std::floor(burn_in_fraction * static_cast<double>(iterations)));
  const auto it = std::upper_bound(stored_iterations_.begin(), stored_iterations_.end(), cutoff);
  return static_cast<std::size_t>(it - stored_iterations_.begin());
}

std::pair<std::size_t, std::size_t> draw_partners(std::size_t chain, std::size_t chains,
                                                  RandomStream& rng) {
  if (chains < 3) throw ConfigError("DE-MC proposals need at least three chains");
  // Draw from the other T-1 chains, then from the remaining T-2.
  std::size_t a = rng.index(chains - 1);
  if (a >= chain) ++a;
  std::size_t b = rng.index(chains - 2);
  const std::size_t lo = std::min(a, chain);
  const std::size_t hi = std::max(a, chain);
  if (b >= lo) ++b;
  if (b >= hi) ++b;
  return {a, b};
}

namespace {

void propose_into(std::size_t chain, const ChainEnsemble& ensemble, const ProposalKernel& kernel,
                  RandomStream& rng, std::span<double> out) {
  const auto [a, b] = draw_partners(chain, ensemble.chains(), rng);
  const auto x = ensemble.state(chain);
  const auto xa = ensemble.state(a);
  const auto xb = ensemble.state(b);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = x[k] + kernel.jump_rate * (xa[k] - xb[k]) + kernel.jitter_std * rng.normal();
  }
}

bool metropolis(double current, double candidate, RandomStream& rng) {
  if (std::isinf(current) && current < 0) {
    throw InvalidStateError("current chain state has zero posterior density");
  }
  if (std::isnan(candidate) || (std::isinf(candidate) && candidate < 0)) return false;
  const double delta = candidate - current;
  if (delta >= 0.0) return true;
  return std::log(rng.uniform01()) < delta;
}

}  // namespace

std::vector<double> propose(std::size_t chain, const ChainEnsemble& ensemble,
                            const ProposalKernel& kernel, RandomStream& rng) {
  std::vector<double> out(ensemble.dimension());
  propose_into(chain, ensemble, kernel, rng, out);
  return out;
}

AcceptOutcome accept_step(std::span<const double> current, double current_log_density,
                          std::span<const double> candidate, double candidate_log_density,
                          RandomStream& rng) {
  AcceptOutcome outcome;
  outcome.accepted = metropolis(current_log_density, candidate_log_density, rng);
  const auto chosen = outcome.accepted ? candidate : current;
  outcome.state.assign(chosen.begin(), chosen.end());
  outcome.log_density = outcome.accepted ? candidate_log_density : current_log_density;
  return outcome;
}

namespace {

/// R-hat of one parameter over history entries [first, stored).
double rhat_from(const ChainEnsemble& ensemble, std::size_t parameter, std::size_t first) {
  const std::size_t t = ensemble.stored() - first;
  std::vector<std::vector<double>> chains(ensemble.chains(), std::vector<double>(t));
  for (std::size_t k = 0; k < t; ++k) {
    for (std::size_t c = 0; c < ensemble.chains(); ++c) {
      chains[c][k] = ensemble.stored_state(first + k, c)[parameter];
    }
  }
  return potential_scale_reduction(chains);
}

void record_rhat(ChainEnsemble& ensemble, std::size_t iteration) {
  const auto half = iteration / 2;
  std::size_t first = 0;
  while (first < ensemble.stored() && ensemble.stored_iteration(first) <= half) ++first;
  if (ensemble.stored() - first < 2) return;
  for (std::size_t p = 0; p < ensemble.dimension(); ++p) {
    try {
      ensemble.rhat_trace.push_back({iteration, p, rhat_from(ensemble, p, first)});
    } catch (const DegenerateVarianceError&) {
      // Frozen chains early on; nothing meaningful to record yet.
    }
  }
}

}  // namespace

ChainEnsemble run(const LogDensity& log_density, const PriorSpec& prior, const SamplerConfig& config) {
  prior.validate();
  config.validate(prior.dimension);
  const ProposalKernel kernel = ProposalKernel::resolve(config, prior);
  const std::size_t chains = config.chains;
  const std::size_t n = prior.dimension;

  ChainEnsemble ensemble(chains, n);
  ensemble.iterations = config.iterations;
  ensemble.burn_in_fraction = config.burn_in_fraction;

  std::vector<RandomStream> streams;
  streams.reserve(chains);
  for (std::size_t c = 0; c < chains; ++c) streams.emplace_back(derive_seed(config.seed, c));

  for (std::size_t c = 0; c < chains; ++c) {
    auto x = ensemble.state(c);
    for (auto& v : x) v = streams[c].uniform(prior.q_min, prior.q_max);
  }

  std::vector<double> candidates(chains * n);
  std::vector<double> candidate_lp(chains);
  const std::size_t workers = std::min(config.workers, chains);

  // Runs body(c) for every chain, split over the worker threads.
  auto for_chains = [&](auto&& body) {
    if (workers <= 1) {
      for (std::size_t c = 0; c < chains; ++c) body(c);
      return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      pool.reserve(workers - 1);
      for (std::size_t w = 1; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t c = w; c < chains; c += workers) body(c);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      try {
        for (std::size_t c = 0; c < chains; c += workers) body(c);
      } catch (...) {
        errors[0] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  };

  for_chains([&](std::size_t c) { ensemble.set_log_density(c, log_density(ensemble.state(c))); });
  for (std::size_t c = 0; c < chains; ++c) {
    if (std::isinf(ensemble.log_density(c)) && ensemble.log_density(c) < 0) {
      throw InvalidStateError("initial state of chain " + std::to_string(c) +
                              " has zero posterior density");
    }
  }

  const auto burn_cutoff =
      static_cast<std::size_t>(std::floor(config.burn_in_fraction * static_cast<double>(config.iterations)));
  std::vector<char> accepted(chains);

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    // Proposals read the generation-start snapshot; states change only after
    // every chain has proposed and been evaluated.
    for_chains([&](std::size_t c) {
      const std::span<double> cand(candidates.data() + c * n, n);
      propose_into(c, ensemble, kernel, streams[c], cand);
      candidate_lp[c] = prior.contains(cand) ? log_density(cand) : kLogZero;
    });
    std::size_t count = 0;
    for (std::size_t c = 0; c < chains; ++c) {
      accepted[c] = metropolis(ensemble.log_density(c), candidate_lp[c], streams[c]);
      if (accepted[c]) {
        const std::span<const double> cand(candidates.data() + c * n, n);
        std::copy(cand.begin(), cand.end(), ensemble.state(c).begin());
        ensemble.set_log_density(c, candidate_lp[c]);
        ++count;
      }
    }
    ensemble.accepted_total += count;
    if (it > burn_cutoff) {
      ensemble.accepted_after_burn_in += count;
      ensemble.proposed_after_burn_in += chains;
    }
    ensemble.acceptance_log.push_back({it, count, chains});
    if (it % config.thin == 0) ensemble.record(it);
    if (config.diagnostics_every > 0 && (it % config.diagnostics_every == 0 || it == config.iterations)) {
      record_rhat(ensemble, it);
    }
  }
  return ensemble;
}

double potential_scale_reduction(std::span<const std::vector<double>> chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw ConfigError("R-hat needs at least two chains");
  const std::size_t t = chains.front().size();
  if (t < 2) throw ConfigError("R-hat needs at least two samples per chain");
  for (const auto& c : chains) {
    if (c.size() != t) throw DimensionError("R-hat chains must have equal length");
  }
  const double td = static_cast<double>(t);
  const double md = static_cast<double>(m);
  std::vector<double> means(m);
  double grand = 0.0;
  double within = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (const double v : chains[j]) s += v;
    means[j] = s / td;
    grand += means[j];
    double ss = 0.0;
    for (const double v : chains[j]) ss += (v - means[j]) * (v - means[j]);
    within += ss / (td - 1.0);
  }
  grand /= md;
  within /= md;
  if (!(within > 0.0)) throw DegenerateVarianceError("within-chain variance is zero");
  double between = 0.0;
  for (const double mj : means) between += (mj - grand) * (mj - grand);
  between *= td / (md - 1.0);
  return std::sqrt((td - 1.0) / td + (md + 1.0) / (md * td) * between / within);
}

double gelman_rubin(const ChainEnsemble& ensemble, std::size_t parameter) {
  if (parameter >= ensemble.dimension()) throw DimensionError("parameter index out of range");
  return rhat_from(ensemble, parameter, ensemble.first_retained());
}

std::size_t PressureGrid::bin(double value) const noexcept {
  const double x = std::floor((value - lower) / width());
  if (!(x > 0.0)) return 0;
  const auto k = static_cast<std::size_t>(x);
  return std::min(k, bins - 1);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ConfigError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

PosteriorSummary summarize(const ChainEnsemble& ensemble, std::span<const double> angles_deg,
                           const PressureGrid& grid) {
  return summarize_profiles(ensemble, interpolation_matrix(ensemble.dimension(), angles_deg), angles_deg,
                            grid);
}

PosteriorSummary summarize_profiles(const ChainEnsemble& ensemble, const Eigen::MatrixXd& profile_operator,
                                    std::span<const double> angles_deg, const PressureGrid& grid) {
  if (static_cast<std::size_t>(profile_operator.rows()) != angles_deg.size() ||
      static_cast<std::size_t>(profile_operator.cols()) != ensemble.dimension()) {
    throw DimensionError("profile operator must be angles x knots");
  }
  if (grid.bins == 0 || !(grid.upper > grid.lower)) throw ConfigError("pressure grid is empty");
  const std::size_t first = ensemble.first_retained();
  const std::size_t chains = ensemble.chains();
  const std::size_t count = (ensemble.stored() - first) * chains;
  if (count == 0) throw InvalidStateError("no retained samples to summarize");

  const std::size_t n = ensemble.dimension();
  const std::size_t m = angles_deg.size();
  // Retained samples as columns, in (iteration, chain) order.
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(count));
  std::size_t col = 0;
  for (std::size_t k = first; k < ensemble.stored(); ++k) {
    for (std::size_t c = 0; c < chains; ++c, ++col) {
      const auto q = ensemble.stored_state(k, c);
      for (std::size_t i = 0; i < n; ++i) samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) = q[i];
    }
  }

  PosteriorSummary s;
  s.angles_deg.assign(angles_deg.begin(), angles_deg.end());
  s.grid = grid;
  s.sample_count = count;
  s.mean.resize(m);
  s.std.resize(m);
  s.p05.resize(m);
  s.p50.resize(m);
  s.p95.resize(m);
  s.density = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(grid.bins));
  s.mean_knots.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.mean_knots[i] = samples.row(static_cast<Eigen::Index>(i)).mean();

  const double total = static_cast<double>(count);
  std::vector<double> values(count);
  for (std::size_t j = 0; j < m; ++j) {
    const Eigen::RowVectorXd row = profile_operator.row(static_cast<Eigen::Index>(j)) * samples;
    double sum = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      values[k] = row(static_cast<Eigen::Index>(k));
      sum += values[k];
    }
    const double mean = sum / total;
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    s.mean[j] = mean;
    s.std[j] = count > 1 ? std::sqrt(ss / (total - 1.0)) : 0.0;
    for (const double v : values) s.density(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(grid.bin(v))) += 1.0;
    s.density.row(static_cast<Eigen::Index>(j)) /= total;
    std::sort(values.begin(), values.end());
    s.p05[j] = quantile_sorted(values, 0.05);
    s.p50[j] = quantile_sorted(values, 0.50);
    s.p95[j] = quantile_sorted(values, 0.95);
  }
  return s;
}

}  // namespace earthpress
