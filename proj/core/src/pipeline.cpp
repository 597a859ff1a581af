#include "earthpress/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "earthpress/errors.hpp"
#include "earthpress/random.hpp"

namespace earthpress {

using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Experiment::Experiment(Scenario scenario, Logger log) : scenario_(std::move(scenario)), log_(std::move(log)) {
  scenario_.validate();
  solver_ = std::make_shared<const LiningSolver>(scenario_.lining);
  monitoring_ = evenly_spaced_angles(scenario_.summary.monitoring_points);
  if (!scenario_.truth) return;

  truth_ = truth_field(*scenario_.truth);
  LiningModel fine = scenario_.lining;
  fine.element_count *= scenario_.truth->mesh_factor;
  truth_solver_ = std::make_unique<LiningSolver>(fine);
  truth_total_ = evaluate_many(*truth_, monitoring_);

  const SolveResult result = truth_solver_->solve(*truth_);
  const auto reaction = reaction_pressure(result, fine, truth_solver_->mesh());
  // Nodes are evenly spaced from the crown, so the nodal net pressures are
  // the knots of a periodic piecewise-linear field.
  const PressureField net(net_pressure(*truth_, reaction, truth_solver_->mesh()));
  truth_net_ = evaluate_many(net, monitoring_);
}

std::shared_ptr<const LiningSolver> Experiment::solver_with(double foundation_stiffness) const {
  if (foundation_stiffness == scenario_.lining.foundation_stiffness) return solver_;
  LiningModel model = scenario_.lining;
  model.foundation_stiffness = foundation_stiffness;
  return std::make_shared<const LiningSolver>(model);
}

const PressureField& Experiment::truth() const {
  if (!truth_) throw ConfigError("scenario has no truth field");
  return *truth_;
}

const std::vector<double>& Experiment::truth_total() const {
  truth();
  return truth_total_;
}

const std::vector<double>& Experiment::truth_net() const {
  truth();
  return truth_net_;
}

const std::vector<double>& Experiment::truth_target() const {
  return scenario_.target == Target::net ? truth_net() : truth_total();
}

std::uint64_t Experiment::observation_seed() const noexcept { return derive_seed(scenario_.seed, "observations"); }

std::uint64_t Experiment::sampler_seed(const std::string& label) const noexcept {
  return derive_seed(scenario_.seed, "sampler/" + label);
}

std::uint64_t Experiment::optimizer_seed(const std::string& label) const noexcept {
  return derive_seed(scenario_.seed, "baseline/" + label);
}

void Experiment::log(std::string_view message) const {
  if (log_) log_(message);
}

const ObservationSet& Experiment::observations(double noise_std_mm) const {
  const auto& plan = scenario_.observations;
  if (plan.file) noise_std_mm = 0.0;  // measured data: one set regardless of the requested level
  const auto found = observations_.find(noise_std_mm);
  if (found != observations_.end()) return found->second;

  ObservationSet obs;
  if (plan.file) {
    obs = read_observations(*plan.file);
  } else {
    const auto angles = all_baselines(solver_->mesh()).angles_deg();
    const BaselineSet baselines = baselines_at(truth_solver_->mesh(), angles);
    const SolveResult clean = truth_solver_->solve(*truth_);
    const double force = hoop_force_at(clean, truth_solver_->mesh(), plan.force_angle_deg);

    SynthesisPlan synth;
    synth.noise_std_mm = noise_std_mm;
    synth.likelihood_sigma_mm = plan.sigma_mm;
    synth.force_angle_deg = plan.force_angle_deg;
    synth.force_noise_std_kn = plan.force_noise_fraction * std::abs(force);
    synth.force_sigma_fraction = plan.force_sigma_fraction;
    synth.seed = observation_seed();
    obs = synthesize_observations(*truth_, *truth_solver_, baselines, synth);
  }
  return observations_.emplace(noise_std_mm, std::move(obs)).first->second;
}

ObservationSet Experiment::case_observations(const CaseSpec& spec) const {
  const ObservationSet& full = observations(spec.noise_std_mm.value_or(scenario_.observations.noise_std_mm));
  const auto angles = select_baselines(all_baselines(solver_->mesh()), spec.baselines).angles_deg();
  ObservationSet obs = full.subset(angles);
  if (!spec.force) {
    obs.force.reset();
  } else if (!obs.force) {
    throw ConfigError("case " + spec.label + " needs a force reading but the observations have none");
  }
  return obs;
}

CaseModel build_case_model(const Experiment& experiment, const CaseSpec& spec, std::size_t knot_count) {
  const Scenario& s = experiment.scenario();
  CaseModel model;
  model.solver = experiment.solver_with(spec.foundation_stiffness.value_or(s.lining.foundation_stiffness));
  const Mesh& mesh = model.solver->mesh();
  model.baselines = select_baselines(all_baselines(mesh), spec.baselines);
  std::optional<double> force_angle;
  if (spec.force) force_angle = s.observations.force_angle_deg;
  const FemResponse exact(model.solver, model.baselines, force_angle, knot_count);
  model.response = std::make_shared<const LinearResponse>(LinearResponse::tabulate(exact));
  model.net_operator = interpolation_matrix(static_cast<std::size_t>(mesh.node_count()), experiment.monitoring_angles()) *
                       net_pressure_operator(*model.solver, knot_count);
  return model;
}

namespace {

void finish_case(const Experiment& experiment, CaseResult& r) {
  const Scenario& s = experiment.scenario();
  double worst = 0.0;
  for (std::size_t p = 0; p < r.ensemble.dimension(); ++p) {
    double rhat = std::numeric_limits<double>::infinity();
    try {
      rhat = gelman_rubin(r.ensemble, p);
    } catch (const DegenerateVarianceError&) {
    }
    worst = std::max(worst, rhat);
  }
  r.max_rhat = worst;
  r.converged = worst < 1.2;
  const auto proposed = r.ensemble.proposed_after_burn_in;
  r.acceptance_rate =
      proposed ? static_cast<double>(r.ensemble.accepted_after_burn_in) / static_cast<double>(proposed) : 0.0;
  if (!r.converged) {
    experiment.log("warning: case " + r.spec.label + " has max R-hat " + format_number(worst) +
                   " (>= 1.2); summarizing anyway");
  }
  if (experiment.has_truth() && s.summary.monitoring_points >= 2) {
    const PosteriorSummary& target = r.target();
    r.metrics = score(target.mean, experiment.truth_target(), &target);
  }
}

}  // namespace

CaseResult run_case(const Experiment& experiment, const CaseSpec& spec, std::optional<std::size_t> knot_count,
                    std::optional<std::size_t> chains) {
  const Scenario& s = experiment.scenario();
  const auto start = std::chrono::steady_clock::now();
  CaseResult r;
  r.spec = spec;
  r.knot_count = knot_count.value_or(s.knot_count);
  r.sampler_seed = experiment.sampler_seed(spec.label);

  SamplerConfig config = s.sampler;
  config.seed = r.sampler_seed;
  if (chains) config.chains = *chains;
  const PriorSpec prior{s.prior.q_min, s.prior.q_max, r.knot_count};

  r.observations = experiment.case_observations(spec);
  const CaseModel model = build_case_model(experiment, spec, r.knot_count);
  LikelihoodSpec likelihood{r.observations, model.response};
  const Posterior posterior(prior, likelihood);

  experiment.log("case " + spec.label + ": " + std::to_string(spec.baselines) + " baselines" +
                 (spec.force ? " + force" : "") + ", " + std::to_string(r.knot_count) + " knots, " +
                 std::to_string(config.chains) + " chains x " + std::to_string(config.iterations) + " iterations");
  r.ensemble = run([&](std::span<const double> q) { return posterior(q); }, prior, config);
  r.forward_evaluations = posterior.forward_evaluations();

  r.total = summarize(r.ensemble, experiment.monitoring_angles(), s.summary.grid);
  if (s.target == Target::net) {
    r.net = summarize_profiles(r.ensemble, model.net_operator, experiment.monitoring_angles(), s.summary.grid);
  }
  finish_case(experiment, r);
  r.seconds = seconds_since(start);
  return r;
}

CaseResult run_prior_only(const Experiment& experiment) {
  const Scenario& s = experiment.scenario();
  const auto start = std::chrono::steady_clock::now();
  CaseResult r;
  r.spec.label = "prior";
  r.spec.baselines = 0;
  r.knot_count = s.knot_count;
  r.sampler_seed = experiment.sampler_seed("prior");
  SamplerConfig config = s.sampler;
  config.seed = r.sampler_seed;
  const Posterior posterior(s.prior);
  r.ensemble = run([&](std::span<const double> q) { return posterior(q); }, s.prior, config);
  r.total = summarize(r.ensemble, experiment.monitoring_angles(), s.summary.grid);
  double worst = 0.0;
  for (std::size_t p = 0; p < r.ensemble.dimension(); ++p) worst = std::max(worst, gelman_rubin(r.ensemble, p));
  r.max_rhat = worst;
  r.converged = worst < 1.2;
  r.seconds = seconds_since(start);
  return r;
}

ForwardResult run_forward(const Scenario& scenario) {
  if (!scenario.truth) throw ConfigError("forward run needs a truth field");
  const PressureField field = truth_field(*scenario.truth);
  const LiningSolver solver(scenario.lining);
  const Mesh& mesh = solver.mesh();
  const SolveResult result = solver.solve(field);
  const auto reaction = reaction_pressure(result, scenario.lining, mesh);
  const auto net = net_pressure(field, reaction, mesh);

  ForwardResult out;
  out.nodes.header = {"node", "angle_deg", "ux_mm", "uy_mm", "rz_rad", "radial_mm", "hoop_kN", "reaction_kPa", "net_kPa"};
  for (int k = 0; k < mesh.node_count(); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const Eigen::Vector2d u(result.displacements(3 * k), result.displacements(3 * k + 1));
    out.nodes.rows.push_back({static_cast<double>(k + 1), mesh.node_angles_deg[idx], 1000.0 * u.x(),
                              1000.0 * u.y(), result.displacements(3 * k + 2),
                              1000.0 * u.dot(mesh.inward_normal(k)),
                              hoop_force_at(result, mesh, mesh.node_angles_deg[idx]), reaction[idx], net[idx]});
  }
  const BaselineSet baselines = all_baselines(mesh);
  const auto conv = convergence(result, mesh, baselines);
  out.baselines.header = {"baseline", "angle_deg", "convergence_mm"};
  for (std::size_t b = 0; b < baselines.size(); ++b) {
    out.baselines.rows.push_back({static_cast<double>(baselines.items[b].label), baselines.items[b].angle_deg, conv[b]});
  }
  out.crown_force_kn = hoop_force_at(result, mesh, 0.0);
  return out;
}

namespace {

// One active-set descent from `x` (feasible). Free variables take the
// minimum-norm Newton step on their subproblem, so directions the data
// cannot see keep the value they started with.
BoxLeastSquares descend_from(Eigen::VectorXd x, const Eigen::MatrixXd& q, const Eigen::VectorXd& b, double lower,
                             double upper, const OptimizerSpec& spec) {
  const Eigen::Index n = x.size();
  const double width = upper - lower;
  const double snap = spec.tolerance_kpa;
  const double kkt_tolerance = 1e-10 * std::max(1.0, q.diagonal().cwiseAbs().maxCoeff() * width);
  std::vector<bool> free(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) free[static_cast<std::size_t>(k)] = x(k) > lower && x(k) < upper;

  BoxLeastSquares out;
  while (out.sweeps < spec.max_sweeps) {
    ++out.sweeps;
    // Inner loop: move to the free-set minimizer, stopping at the first bound hit.
    for (Eigen::Index guard = 0; guard <= n; ++guard) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (free[static_cast<std::size_t>(k)]) idx.push_back(k);
      }
      if (idx.empty()) break;
      const auto m = static_cast<Eigen::Index>(idx.size());
      Eigen::MatrixXd qff(m, m);
      Eigen::VectorXd rhs(m);
      const Eigen::VectorXd residual = b - q * x;
      for (Eigen::Index a = 0; a < m; ++a) {
        rhs(a) = residual(idx[static_cast<std::size_t>(a)]);
        for (Eigen::Index c = 0; c < m; ++c) qff(a, c) = q(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]);
      }
      const Eigen::VectorXd step = qff.completeOrthogonalDecomposition().solve(rhs);
      double alpha = 1.0;
      for (Eigen::Index a = 0; a < m; ++a) {
        const double xk = x(idx[static_cast<std::size_t>(a)]);
        if (step(a) > 0.0 && xk + step(a) > upper) alpha = std::min(alpha, (upper - xk) / step(a));
        if (step(a) < 0.0 && xk + step(a) < lower) alpha = std::min(alpha, (lower - xk) / step(a));
      }
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index k = idx[static_cast<std::size_t>(a)];
        x(k) = std::clamp(x(k) + alpha * step(a), lower, upper);
        if (alpha < 1.0 && (x(k) - lower <= snap || upper - x(k) <= snap)) {
          x(k) = x(k) - lower <= snap ? lower : upper;
          free[static_cast<std::size_t>(k)] = false;
        }
      }
      if (alpha >= 1.0) break;
    }
    // Release the bound variable whose multiplier most violates optimality.
    const Eigen::VectorXd gradient = q * x - b;
    Eigen::Index release = -1;
    double worst = kkt_tolerance;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (free[static_cast<std::size_t>(k)]) continue;
      const double pull = x(k) <= lower ? -gradient(k) : gradient(k);
      if (pull > worst) {
        worst = pull;
        release = k;
      }
    }
    if (release < 0) {
      out.converged = true;
      break;
    }
    free[static_cast<std::size_t>(release)] = true;
  }
  out.x = to_vector(x);
  return out;
}

}  // namespace

BoxLeastSquares box_least_squares(const Eigen::MatrixXd& g, const Eigen::VectorXd& d, const Eigen::VectorXd& weights,
                                  double lower, double upper, const OptimizerSpec& spec, std::uint64_t seed) {
  if (g.rows() != d.size() || weights.size() != d.size()) throw DimensionError("least-squares sizes disagree");
  if (!(lower < upper)) throw ConfigError("least-squares box is empty");
  const Eigen::Index n = g.cols();
  const Eigen::MatrixXd wg = weights.asDiagonal() * g;
  const Eigen::MatrixXd q = g.transpose() * wg;
  const Eigen::VectorXd b = wg.transpose() * d;

  RandomStream rng(seed);
  BoxLeastSquares best;
  best.objective = std::numeric_limits<double>::infinity();
  const std::size_t starts = std::max<std::size_t>(spec.starts, 1);
  for (std::size_t s = 0; s < starts; ++s) {
    Eigen::VectorXd x(n);
    for (Eigen::Index k = 0; k < n; ++k) x(k) = rng.uniform(lower, upper);
    BoxLeastSquares fit = descend_from(std::move(x), q, b, lower, upper, spec);
    const Eigen::Map<const Eigen::VectorXd> xf(fit.x.data(), n);
    fit.objective = (weights.array() * (d - g * xf).array().square()).sum();
    if (fit.objective < best.objective) best = std::move(fit);
  }
  return best;
}

BaselineResult deterministic_baseline(const Experiment& experiment, const CaseSpec& spec) {
  const Scenario& s = experiment.scenario();
  const ObservationSet obs = experiment.case_observations(spec);
  const CaseModel model = build_case_model(experiment, spec, s.knot_count);
  const LikelihoodSpec likelihood{obs, model.response};
  const Eigen::VectorXd d = likelihood.data();
  Eigen::VectorXd w(d.size());
  const Eigen::Index h = static_cast<Eigen::Index>(obs.size());
  w.head(h).setConstant(1.0 / (obs.sigma_mm * obs.sigma_mm));
  if (obs.force) w(h) = 1.0 / (obs.force->sigma_kn * obs.force->sigma_kn);

  BaselineResult r;
  r.label = spec.label;
  r.fit = box_least_squares(model.response->matrix(), d, w, s.prior.q_min, s.prior.q_max, s.optimizer,
                            experiment.optimizer_seed(spec.label));
  if (!r.fit.converged) {
    experiment.log("warning: baseline optimizer for case " + spec.label + " stopped after " +
                   std::to_string(r.fit.sweeps) + " sweeps without meeting the tolerance; reporting best point");
  }
  const Eigen::Map<const Eigen::VectorXd> x(r.fit.x.data(), static_cast<Eigen::Index>(r.fit.x.size()));
  const Eigen::VectorXd residual = (d - model.response->matrix() * x).head(h);
  r.residual_mm = std::sqrt(residual.squaredNorm() / static_cast<double>(h));
  if (s.target == Target::net) {
    r.profile = to_vector(model.net_operator * x);
  } else {
    r.profile = evaluate_many(PressureField(r.fit.x), experiment.monitoring_angles());
  }
  r.total_variation = total_variation(r.profile);
  if (experiment.has_truth() && r.profile.size() >= 2) r.metrics = score(r.profile, experiment.truth_target());
  return r;
}

KnotTrialReport knot_count_trial(const Experiment& experiment, const std::vector<std::size_t>& counts,
                                 const CaseSpec& spec, double tolerance_kpa) {
  if (counts.empty()) throw ConfigError("knot trial needs at least one count");
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] <= counts[i - 1]) throw ConfigError("knot trial counts must be ascending");
  }
  KnotTrialReport report;
  for (const std::size_t n : counts) {
    KnotTrialEntry entry;
    entry.knot_count = n;
    entry.chains = std::max(experiment.scenario().sampler.chains, 2 * n);
    entry.chains_raised = entry.chains != experiment.scenario().sampler.chains;
    if (entry.chains_raised) {
      experiment.log("knot trial: raising chains to " + std::to_string(entry.chains) + " for " + std::to_string(n) +
                     " knots");
    }
    CaseSpec trial = spec;
    trial.label = spec.label + "_n" + std::to_string(n);
    const CaseResult r = run_case(experiment, trial, n, entry.chains);
    entry.profile = r.target().mean;
    entry.metrics = r.metrics;
    entry.max_rhat = r.max_rhat;
    if (!report.entries.empty()) {
      entry.rmse_to_previous = rmse(entry.profile, report.entries.back().profile);
      if (!report.stabilized_at && *entry.rmse_to_previous < tolerance_kpa) {
        report.stabilized_at = report.entries.size();
      }
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

std::vector<PresetRun> sensitivity_presets(const Experiment& experiment) {
  const Scenario& s = experiment.scenario();
  const CaseSpec& base = s.find_case(s.presets.base_case);
  const double base_noise = base.noise_std_mm.value_or(s.observations.noise_std_mm);
  const double base_kf = base.foundation_stiffness.value_or(s.lining.foundation_stiffness);
  std::vector<PresetRun> runs;
  for (std::size_t i = 0; i < s.presets.noise_levels_mm.size(); ++i) {
    CaseSpec spec = base;
    spec.label = base.label + "_noise" + std::to_string(i + 1);
    spec.noise_std_mm = s.presets.noise_levels_mm[i];
    spec.foundation_stiffness = base_kf;
    runs.push_back({"noise", *spec.noise_std_mm, base_kf, run_case(experiment, spec)});
  }
  for (const double kf : s.presets.foundation_stiffness) {
    CaseSpec spec = base;
    spec.label = base.label + "_kf" + format_number(kf);
    spec.noise_std_mm = base_noise;
    spec.foundation_stiffness = kf;
    runs.push_back({"spring", base_noise, kf, run_case(experiment, spec)});
  }
  return runs;
}

// Output -------------------------------------------------------------------

Table observation_table(const ObservationSet& observations) {
  Table t;
  t.header = {"baseline_angle_deg", "reading_mm", "sigma_mm"};
  for (std::size_t i = 0; i < observations.size(); ++i) {
    t.rows.push_back({observations.angles_deg[i], observations.readings_mm[i], observations.sigma_mm});
  }
  return t;
}

std::optional<Table> force_table(const ObservationSet& observations) {
  if (!observations.force) return std::nullopt;
  Table t;
  t.header = {"angle_deg", "force_kN", "sigma_kN"};
  t.rows.push_back({observations.force->angle_deg, observations.force->value_kn, observations.force->sigma_kn});
  return t;
}

Table summary_table(const PosteriorSummary& summary) {
  Table t;
  t.header = {"angle_deg", "mean_kPa", "std_kPa", "p05_kPa", "p50_kPa", "p95_kPa"};
  for (std::size_t j = 0; j < summary.angles_deg.size(); ++j) {
    t.rows.push_back({summary.angles_deg[j], summary.mean[j], summary.std[j], summary.p05[j], summary.p50[j],
                      summary.p95[j]});
  }
  return t;
}

Table density_table(const PosteriorSummary& summary) {
  Table t;
  t.header = {"angle_deg", "pressure_bin_kPa", "probability"};
  for (std::size_t j = 0; j < summary.angles_deg.size(); ++j) {
    for (std::size_t k = 0; k < summary.grid.bins; ++k) {
      t.rows.push_back({summary.angles_deg[j], summary.grid.center(k),
                        summary.density(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))});
    }
  }
  return t;
}

Table samples_table(const ChainEnsemble& ensemble) {
  Table t;
  t.header = {"iteration", "chain"};
  for (std::size_t i = 0; i < ensemble.dimension(); ++i) t.header.push_back("q" + std::to_string(i + 1));
  for (std::size_t k = ensemble.first_retained(); k < ensemble.stored(); ++k) {
    for (std::size_t c = 0; c < ensemble.chains(); ++c) {
      std::vector<double> row{static_cast<double>(ensemble.stored_iteration(k)), static_cast<double>(c + 1)};
      const auto q = ensemble.stored_state(k, c);
      row.insert(row.end(), q.begin(), q.end());
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

Table diagnostics_table(const ChainEnsemble& ensemble) {
  Table t;
  t.header = {"iteration", "parameter", "rhat"};
  for (const auto& r : ensemble.rhat_trace) {
    t.rows.push_back({static_cast<double>(r.iteration), static_cast<double>(r.parameter + 1), r.rhat});
  }
  return t;
}

Table acceptance_table(const ChainEnsemble& ensemble) {
  Table t;
  t.header = {"iteration", "accepted", "proposed"};
  for (const auto& a : ensemble.acceptance_log) {
    t.rows.push_back({static_cast<double>(a.iteration), static_cast<double>(a.accepted),
                      static_cast<double>(a.proposed)});
  }
  return t;
}

namespace {

Table metrics_table(const CaseResult& r) {
  Table t;
  t.header = {"ia", "ia_degenerate", "rmse_kPa", "std_kPa", "monitoring_points", "ia_threshold", "ia_passes",
              "max_rhat", "rhat_converged", "acceptance_rate"};
  const MetricReport m = r.metrics.value_or(MetricReport{});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const bool known = r.metrics.has_value();
  t.rows.push_back({known ? m.ia : nan, known ? static_cast<double>(m.ia_degenerate) : nan, known ? m.rmse : nan,
                    std_factor(r.target()), static_cast<double>(r.target().angles_deg.size()), kAgreementThreshold,
                    known ? static_cast<double>(m.passes()) : nan, r.max_rhat, static_cast<double>(r.converged),
                    r.acceptance_rate});
  return t;
}

std::string relative_to(const std::filesystem::path& root, const std::filesystem::path& file) {
  return std::filesystem::relative(file, root).generic_string();
}

}  // namespace

std::vector<std::string> write_case_outputs(const std::filesystem::path& root, const std::filesystem::path& dir,
                                            const Experiment& experiment, const CaseResult& result) {
  std::vector<std::string> files;
  auto put = [&](const std::string& name, const Table& table) {
    const auto path = dir / name;
    write_csv(path, table);
    files.push_back(relative_to(root, path));
  };
  put("observations.csv", observation_table(result.observations));
  if (auto force = force_table(result.observations)) put("force.csv", *force);
  put("samples.csv", samples_table(result.ensemble));
  put("summary.csv", summary_table(result.total));
  put("density.csv", density_table(result.total));
  if (result.net) {
    put("net_summary.csv", summary_table(*result.net));
    put("net_density.csv", density_table(*result.net));
  }
  Table knots;
  knots.header = {"knot", "angle_deg", "mean_kPa"};
  const double spacing = 360.0 / static_cast<double>(result.knot_count);
  for (std::size_t k = 0; k < result.total.mean_knots.size(); ++k) {
    knots.rows.push_back({static_cast<double>(k + 1), spacing * static_cast<double>(k), result.total.mean_knots[k]});
  }
  put("posterior_mean_knots.csv", knots);
  if (experiment.has_truth()) {
    Table truth;
    truth.header = {"angle_deg", "total_kPa", "net_kPa"};
    const auto& angles = experiment.monitoring_angles();
    for (std::size_t j = 0; j < angles.size(); ++j) {
      truth.rows.push_back({angles[j], experiment.truth_total()[j], experiment.truth_net()[j]});
    }
    put("truth.csv", truth);
  }
  put("metrics.csv", metrics_table(result));
  put("diagnostics.csv", diagnostics_table(result.ensemble));
  put("acceptance.csv", acceptance_table(result.ensemble));
  return files;
}

ObservationSet read_observations(const std::filesystem::path& path) {
  const Table t = read_csv(path);
  ObservationSet obs;
  obs.angles_deg = t.column_values("baseline_angle_deg");
  obs.readings_mm = t.column_values("reading_mm");
  const auto sigma = t.column_values("sigma_mm");
  if (sigma.empty()) throw IoError(path.string() + " has no readings");
  if (std::any_of(sigma.begin(), sigma.end(), [&](double v) { return v != sigma.front(); })) {
    throw IoError(path.string() + ": readings must share one sigma_mm");
  }
  obs.sigma_mm = sigma.front();
  const auto force_path = path.parent_path() / "force.csv";
  if (std::filesystem::exists(force_path)) {
    const Table f = read_csv(force_path);
    if (f.rows.size() != 1) throw IoError(force_path.string() + " must hold exactly one reading");
    obs.force = ForceReading{f.rows[0][f.column("angle_deg")], f.rows[0][f.column("force_kN")],
                             f.rows[0][f.column("sigma_kN")]};
  }
  obs.validate();
  return obs;
}

ChainEnsemble read_samples(const std::filesystem::path& path) {
  const Table t = read_csv(path);
  if (t.header.size() < 3 || t.header[0] != "iteration" || t.header[1] != "chain") {
    throw IoError(path.string() + " is not a samples table");
  }
  if (t.rows.empty()) throw IoError(path.string() + " holds no samples");
  std::size_t chains = 0;
  for (const auto& row : t.rows) chains = std::max(chains, static_cast<std::size_t>(row[1]));
  const std::size_t n = t.header.size() - 2;
  if (t.rows.size() % chains != 0) throw IoError(path.string() + ": ragged generations");
  ChainEnsemble ensemble(chains, n);
  ensemble.burn_in_fraction = 0.0;
  std::vector<double> states(chains * n);
  for (std::size_t r = 0; r < t.rows.size(); r += chains) {
    const auto iteration = static_cast<std::size_t>(t.rows[r][0]);
    for (std::size_t c = 0; c < chains; ++c) {
      const auto& row = t.rows[r + c];
      if (static_cast<std::size_t>(row[0]) != iteration || static_cast<std::size_t>(row[1]) != c + 1) {
        throw IoError(path.string() + ": rows must be ordered by iteration then chain");
      }
      std::copy(row.begin() + 2, row.end(), states.begin() + static_cast<std::ptrdiff_t>(c * n));
    }
    ensemble.append_history(iteration, states);
    ensemble.iterations = iteration;
  }
  // All rows are retained samples; keep them all.
  ensemble.burn_in_fraction = 0.0;
  return ensemble;
}

struct Manifest::Impl {
  json doc;
};

Manifest::Manifest(const Experiment& experiment, std::string verb) : impl_(std::make_shared<Impl>()) {
  auto& d = impl_->doc;
  d["verb"] = std::move(verb);
  d["scenario"] = json::parse(scenario_to_json(experiment.scenario()));
  d["seeds"] = {{"master", experiment.scenario().seed}, {"observations", experiment.observation_seed()}};
  d["files"] = json::array();
  d["cases"] = json::array();
  d["warnings"] = json::array();
  d["timings"] = json::object();
  d["records"] = json::object();
}

void Manifest::add_files(const std::vector<std::string>& files) {
  for (const auto& f : files) impl_->doc["files"].push_back(f);
}

void Manifest::add_case(const CaseResult& r) {
  json c;
  c["label"] = r.spec.label;
  c["baselines"] = r.spec.baselines;
  c["force"] = r.spec.force;
  c["noise_std_mm"] = r.spec.noise_std_mm ? json(*r.spec.noise_std_mm) : json(nullptr);
  c["foundation_stiffness"] = r.spec.foundation_stiffness ? json(*r.spec.foundation_stiffness) : json(nullptr);
  c["knot_count"] = r.knot_count;
  c["chains"] = r.ensemble.chains();
  c["sampler_seed"] = r.sampler_seed;
  c["max_rhat"] = r.max_rhat;
  c["rhat_converged"] = r.converged;
  c["acceptance_rate"] = r.acceptance_rate;
  c["forward_evaluations"] = r.forward_evaluations;
  c["std_kPa"] = std_factor(r.target());
  if (r.metrics) {
    c["ia"] = r.metrics->ia;
    c["ia_degenerate"] = r.metrics->ia_degenerate;
    c["rmse_kPa"] = r.metrics->rmse;
    c["ia_passes"] = r.metrics->passes();
  }
  impl_->doc["cases"].push_back(c);
  impl_->doc["seeds"]["sampler/" + r.spec.label] = r.sampler_seed;
  add_timing(r.spec.label, r.seconds);
}

void Manifest::add_seed(const std::string& name, std::uint64_t seed) { impl_->doc["seeds"][name] = seed; }

void Manifest::add_timing(const std::string& name, double seconds) { impl_->doc["timings"][name] = seconds; }

void Manifest::add_warning(const std::string& text) { impl_->doc["warnings"].push_back(text); }

void Manifest::add_record(const std::string& key, const std::string& json_text) {
  impl_->doc["records"][key] = json::parse(json_text);
}

std::filesystem::path Manifest::write(const std::filesystem::path& root) const {
  const auto path = root / ("manifest-" + impl_->doc.at("verb").get<std::string>() + ".json");
  write_text(path, impl_->doc.dump(2) + "\n");
  return path;
}

Scenario scenario_from_manifest(const std::filesystem::path& manifest_path) {
  const json doc = json::parse(read_text(manifest_path));
  return parse_scenario(doc.at("scenario").dump());
}

std::vector<std::string> manifest_case_labels(const std::filesystem::path& manifest_path) {
  const json doc = json::parse(read_text(manifest_path));
  std::vector<std::string> labels;
  if (!doc.is_object() || !doc.contains("verb")) return labels;
  for (const json& c : doc.value("cases", json::array())) labels.push_back(c.at("label").get<std::string>());
  const json records = doc.value("records", json::object());
  for (const json& c : records.value("baseline_cases", json::array())) labels.push_back(c.at("label").get<std::string>());
  return labels;
}

std::vector<ReportEntry> report_run(const std::filesystem::path& manifest_path) {
  const json doc = json::parse(read_text(manifest_path));
  const auto root = manifest_path.parent_path();
  const Experiment experiment(parse_scenario(doc.at("scenario").dump()));
  const Scenario& s = experiment.scenario();
  std::vector<ReportEntry> out;
  for (const json& c : doc.at("cases")) {
    ReportEntry entry;
    entry.label = c.at("label").get<std::string>();
    const auto dir = root / entry.label;
    if (!std::filesystem::exists(dir / "samples.csv")) continue;
    const ChainEnsemble ensemble = read_samples(dir / "samples.csv");
    entry.samples = ensemble.stored() * ensemble.chains();
    const PosteriorSummary total = summarize(ensemble, experiment.monitoring_angles(), s.summary.grid);
    bool same = csv_text(summary_table(total)) == read_text(dir / "summary.csv") &&
                csv_text(density_table(total)) == read_text(dir / "density.csv");
    const PosteriorSummary* target = &total;
    std::optional<PosteriorSummary> net;
    if (s.target == Target::net) {
      CaseSpec spec;
      spec.label = entry.label;
      spec.baselines = c.at("baselines").get<std::size_t>();
      spec.force = c.at("force").get<bool>();
      if (!c.at("foundation_stiffness").is_null()) spec.foundation_stiffness = c.at("foundation_stiffness").get<double>();
      const CaseModel model = build_case_model(experiment, spec, ensemble.dimension());
      net = summarize_profiles(ensemble, model.net_operator, experiment.monitoring_angles(), s.summary.grid);
      same = same && csv_text(summary_table(*net)) == read_text(dir / "net_summary.csv");
      target = &*net;
    }
    entry.summary_reproduced = same;
    if (experiment.has_truth()) entry.metrics = score(target->mean, experiment.truth_target(), target);
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace earthpress
