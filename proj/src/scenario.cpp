#include "optomech/scenario.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "optomech/analysis.hpp"
#include "optomech/csv.hpp"
#include "optomech/error.hpp"
#include "optomech/meanfield.hpp"

namespace optomech {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::array<std::pair<Task, std::string_view>, 9> kTaskNames = {{
    {Task::Potential, "potential"},
    {Task::SteadyStates, "steady-states"},
    {Task::BifurcationScan, "bifurcation-scan"},
    {Task::MeanFieldEvolve, "meanfield"},
    {Task::Evolve, "evolve"},
    {Task::QuantumSteadyState, "quantum-steady-state"},
    {Task::GroundState, "ground-state"},
    {Task::Analyze, "analyze"},
    {Task::Sweep, "sweep"},
}};

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(path + key, "required field is missing");
  return j.at(key);
}

double as_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ValidationError(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(field, "must be finite");
  return v;
}

int as_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ValidationError(field, "expected an integer");
  return j.get<int>();
}

std::vector<double> as_numbers(const json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

/// Either {"values": [...]} or {"start", "stop", "count"} (inclusive ends).
std::vector<double> parse_range(const json& j, const std::string& field) {
  if (j.is_array()) return as_numbers(j, field);
  if (j.contains("values")) return as_numbers(j.at("values"), field + ".values");
  const double a = as_number(require(j, "start", field + "."), field + ".start");
  const double b = as_number(require(j, "stop", field + "."), field + ".stop");
  const int n = as_int(require(j, "count", field + "."), field + ".count");
  if (n < 1) throw ValidationError(field + ".count", "must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return out;
}

SystemParams parse_params(const json& j) {
  SystemParams p;
  const std::string c = require(j, "coupling", "params.").get<std::string>();
  try {
    p.coupling = coupling_from_string(c);
  } catch (const Error&) {
    throw ValidationError("params.coupling", "expected \"linear\" or \"quadratic\", got \"" + c + "\"");
  }
  p.g = as_numbers(require(j, "g", "params."), "params.g");
  p.gamma = j.contains("gamma") ? as_numbers(j.at("gamma"), "params.gamma") : std::vector<double>(p.g.size(), 0.0);
  p.delta_c = as_number(require(j, "delta_c", "params."), "params.delta_c");
  p.eta = as_number(require(j, "eta", "params."), "params.eta");
  p.omega_m = as_number(require(j, "omega_m", "params."), "params.omega_m");
  if (j.contains("kappa") && as_number(j.at("kappa"), "params.kappa") != 1.0) {
    throw ValidationError("params.kappa", "rates are in units of kappa; kappa must be 1");
  }
  p.validate();
  return p;
}

InitialState parse_initial(const json& j) {
  InitialState s;
  const std::string type = j.is_string() ? j.get<std::string>() : require(j, "type", "initial_state.").get<std::string>();
  if (type == "vacuum") {
    s.kind = InitialState::Kind::Vacuum;
  } else if (type == "effective-ground-state") {
    s.kind = InitialState::Kind::EffectiveGroundState;
  } else if (type == "cat") {
    s.kind = InitialState::Kind::Cat;
    s.beta0 = as_number(require(j, "beta0", "initial_state."), "initial_state.beta0");
    s.phi0 = j.contains("phi0") ? as_number(j.at("phi0"), "initial_state.phi0") : 0.0;
  } else if (type == "coherent") {
    s.kind = InitialState::Kind::Coherent;
    const json& b = require(j, "beta", "initial_state.");
    if (!b.is_array()) throw ValidationError("initial_state.beta", "expected one [re, im] pair per mechanical mode");
    for (std::size_t i = 0; i < b.size(); ++i) {
      const std::string f = "initial_state.beta[" + std::to_string(i) + "]";
      if (b[i].is_number()) {
        s.beta.emplace_back(as_number(b[i], f), 0.0);
      } else {
        const auto v = as_numbers(b[i], f);
        if (v.size() != 2) throw ValidationError(f, "expected [re, im]");
        s.beta.emplace_back(v[0], v[1]);
      }
    }
  } else {
    throw ValidationError("initial_state.type", "unknown initial state \"" + type + "\"");
  }
  return s;
}

const std::vector<std::string> kOutputs = {"x", "p", "n_a", "n_b", "L", "P(x)", "P(0)", "entropy", "schmidt", "state"};

SystemParams with_sweep_value(SystemParams p, const std::string& parameter, double v) {
  if (parameter == "eta") {
    p.eta = v;
  } else {
    p.delta_c = v;
  }
  return p;
}

/// Position grid for P(x) output.
std::vector<double> distribution_points(const ScenarioConfig& c) {
  const GridAxis ax = c.grid.value_or(GridAxis{-10.0, 10.0, 400});
  return ax.points();
}

[[noreturn]] void rethrow_with_context(const std::string& ctx) {
  try {
    throw;
  } catch (const ValidationError& e) {
    throw ValidationError(e.field(), ctx + e.what());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(ctx + e.what(), e.residual());
  } catch (const IntegrationFailure& e) {
    throw IntegrationFailure(ctx + e.what());
  } catch (const BoundaryLeak& e) {
    throw BoundaryLeak(ctx + e.what());
  } catch (const TruncationInadequate& e) {
    throw TruncationInadequate(ctx + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(ctx + e.what());
  } catch (const ContractViolation& e) {
    throw ContractViolation(ctx + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(ctx + e.what());
  } catch (const DomainError& e) {
    throw DomainError(ctx + e.what());
  } catch (const Error& e) {
    throw Error(ctx + e.what());
  }
}

struct Run {
  const ScenarioConfig& config;
  fs::path dir;
  std::vector<fs::path> files;
  InvariantDrift drift;

  fs::path out(const std::string& name) {
    files.push_back(dir / name);
    return dir / name;
  }

  void merge_drift(const InvariantDrift& d) {
    drift.trace = std::max(drift.trace, d.trace);
    drift.hermiticity = std::max(drift.hermiticity, d.hermiticity);
    drift.min_eigenvalue = std::min(drift.min_eigenvalue, d.min_eigenvalue);
    drift.within_tolerance = drift.within_tolerance && d.within_tolerance;
  }

  std::vector<double> sweep_values() const {
    if (config.sweep) return config.sweep->values;
    return {config.params.eta};
  }
  std::string sweep_name() const { return config.sweep ? config.sweep->parameter : std::string("eta"); }

  HilbertSpace space() const { return HilbertSpace(config.dims); }

  ode::Options ode_options(ode::Options base) const {
    if (config.fixed_step) base.fixed_step = config.fixed_step;
    return base;
  }

  QuantumState initial_state() const {
    const HilbertSpace s = space();
    const int n = config.params.n_mech();
    const auto& init = config.initial_state;
    std::vector<QuantumState> mech;
    switch (init.kind) {
      case InitialState::Kind::Vacuum:
        return vacuum_state(s);
      case InitialState::Kind::Cat:
        for (int k = 0; k < n; ++k) mech.push_back(prepare_cat_state(init.beta0, init.phi0, s.dim(k + 1)));
        return cavity_vacuum_product(s.dim(0), mech);
      case InitialState::Kind::Coherent:
        for (int k = 0; k < n; ++k) mech.push_back(coherent_state(s.dim(k + 1), init.beta[static_cast<std::size_t>(k)]));
        return cavity_vacuum_product(s.dim(0), mech);
      case InitialState::Kind::EffectiveGroundState: {
        const auto gs = solve_ground_state(config.params, ground_grid());
        const std::vector<int> mdims(config.dims.begin() + 1, config.dims.end());
        const QuantumState factors[] = {fock_state(HilbertSpace({s.dim(0)}), std::vector<int>{0}),
                                        fock_project(gs.psi, mdims).state()};
        return product_state(factors);
      }
    }
    throw DomainError("unknown initial state");
  }

  PositionGrid ground_grid() const {
    PositionGrid g = default_grid(config.params.n_mech());
    if (config.grid) {
      for (auto& ax : g.axes) ax = *config.grid;
      g.values = Eigen::VectorXd::Zero(g.size());
    }
    return g;
  }

  void potential() {
    const int n = config.params.n_mech();
    const GridAxis ax = config.grid.value_or(GridAxis{-12.0, 12.0, 480});
    const auto x = ax.points();
    std::vector<std::string> header = {sweep_name()};
    if (n == 1) {
      header.insert(header.end(), {"x", "U_eff [hbar kappa]"});
    } else {
      header.insert(header.end(), {"x1", "x2", "U_eff [hbar kappa]"});
    }
    CsvWriter csv(out("potential.csv"), header);
    for (double v : sweep_values()) {
      const SystemParams p = with_sweep_value(config.params, sweep_name(), v);
      if (n == 1) {
        for (double xi : x) {
          const double pt[] = {xi};
          csv.row({v, xi, effective_potential(pt, p)});
        }
      } else {
        for (double x1 : x)
          for (double x2 : x) {
            const double pt[] = {x1, x2};
            csv.row({v, x1, x2, effective_potential(pt, p)});
          }
      }
    }
    csv.close();
  }

  void steady_states(const char* file) {
    const int n = config.params.n_mech();
    std::vector<std::string> header = {sweep_name(), "branch"};
    for (int k = 1; k <= n; ++k) header.push_back("x_s" + std::to_string(k));
    header.insert(header.end(), {"stability", "degenerate", "U_eff [hbar kappa]"});
    CsvWriter csv(out(file), header);
    for (double v : sweep_values()) {
      const SystemParams p = with_sweep_value(config.params, sweep_name(), v);
      const auto sols = p.coupling == Coupling::Linear ? linear_steady_states(p) : quadratic_steady_states(p);
      for (std::size_t b = 0; b < sols.size(); ++b) {
        std::vector<std::string> cells = {format_double(v), std::to_string(b)};
        for (double xi : sols[b].x_s) cells.push_back(format_double(xi));
        cells.emplace_back(to_string(sols[b].stability));
        cells.emplace_back(sols[b].degenerate ? "1" : "0");
        cells.push_back(format_double(sols[b].potential_value));
        csv.row_cells(cells);
      }
    }
    csv.close();
  }

  void meanfield() {
    const int n = config.params.n_mech();
    MeanFieldState s;
    s.x.assign(static_cast<std::size_t>(n), 0.0);
    s.p.assign(static_cast<std::size_t>(n), 0.0);
    s.alpha = cplx(0.0);
    if (config.initial_state.kind == InitialState::Kind::Coherent) {
      for (int k = 0; k < n; ++k) {
        const cplx b = config.initial_state.beta[static_cast<std::size_t>(k)];
        s.x[static_cast<std::size_t>(k)] = std::sqrt(2.0) * b.real();
        s.p[static_cast<std::size_t>(k)] = std::sqrt(2.0) * b.imag();
      }
    }
    const auto traj = integrate_meanfield(s, config.params, config.times->values, ode_options(meanfield_ode_options()));
    std::vector<std::string> header = {"t [1/kappa]"};
    for (int k = 1; k <= n; ++k) header.push_back("x" + std::to_string(k));
    for (int k = 1; k <= n; ++k) header.push_back("p" + std::to_string(k));
    header.insert(header.end(), {"re_alpha", "im_alpha", "E_mech [hbar kappa]"});
    CsvWriter csv(out("meanfield.csv"), header);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      const auto& st = traj.states[i];
      std::vector<double> row = {traj.times[i]};
      row.insert(row.end(), st.x.begin(), st.x.end());
      row.insert(row.end(), st.p.begin(), st.p.end());
      row.push_back(st.alpha->real());
      row.push_back(st.alpha->imag());
      row.push_back(mechanical_energy(st, config.params));
      csv.row(row);
    }
    csv.close();
  }

  struct Observables {
    std::vector<std::string> header;
    std::vector<Operator> ops;
  };

  Observables observables(const HilbertSpace& s) const {
    Observables o;
    const int n = config.params.n_mech();
    if (config.wants("n_a")) {
      o.header.emplace_back("n_a");
      o.ops.push_back(embed(number_op(s.dim(0)), 0, s));
    }
    for (int k = 1; k <= n; ++k) {
      if (config.wants("x")) {
        o.header.push_back("x" + std::to_string(k));
        o.ops.push_back(embed(position_op(s.dim(k)), k, s));
      }
      if (config.wants("p")) {
        o.header.push_back("p" + std::to_string(k));
        o.ops.push_back(embed(momentum_op(s.dim(k)), k, s));
      }
      if (config.wants("n_b")) {
        o.header.push_back("n_b" + std::to_string(k));
        o.ops.push_back(embed(number_op(s.dim(k)), k, s));
      }
    }
    if (config.wants("L") && n >= 2) {
      o.header.emplace_back("L12");
      o.ops.push_back(angular_momentum_operator(s, 1, 2));
    }
    return o;
  }

  /// Reduced single-mode states of every mechanical mode.
  std::vector<CMatrix> mechanical_marginals(const QuantumState& st) const {
    std::vector<CMatrix> out;
    for (int k = 1; k <= config.params.n_mech(); ++k) {
      const int keep[] = {k};
      out.push_back(partial_trace(st, keep).matrix());
    }
    return out;
  }

  void evolve() {
    const HilbertSpace s = space();
    const auto gen = build_generator(config.params, s);
    const auto rho0 = initial_state();
    const int n = config.params.n_mech();
    const Observables obs = observables(s);
    const auto xs = distribution_points(config);
    const bool want_px = config.wants("P(x)");
    const bool want_p0 = config.wants("P(0)");
    const bool want_entropy = config.wants("entropy") && n == 2;

    std::vector<std::string> header = {"t [1/kappa]"};
    header.insert(header.end(), obs.header.begin(), obs.header.end());
    if (want_p0)
      for (int k = 1; k <= n; ++k) header.push_back("P0_" + std::to_string(k));
    if (want_entropy) header.insert(header.end(), {"S1", "S2", "S12", "I12"});
    CsvWriter series(out("observables.csv"), header);
    std::optional<CsvWriter> slab;
    if (want_px) slab.emplace(out("position.csv"), std::vector<std::string>{"t [1/kappa]", "mode", "x", "P"});

    const double zero[] = {0.0};
    EvolveOptions opt;
    opt.ode = ode_options(opt.ode);
    opt.storage = StoragePolicy::ObservablesOnly;
    CMatrix last;
    opt.observer = [&](double t, const CMatrix& rho) {
      std::vector<double> row = {t};
      for (const auto& op : obs.ops) row.push_back(expectation(op, rho).real());
      const auto st = QuantumState::density_unchecked(s, rho);
      if (want_p0 || want_px) {
        const auto marg = mechanical_marginals(st);
        for (int k = 0; k < n && want_p0; ++k) row.push_back(position_distribution(marg[static_cast<std::size_t>(k)], zero)(0));
        if (want_px) {
          for (int k = 0; k < n; ++k) {
            const auto px = position_distribution(marg[static_cast<std::size_t>(k)], xs);
            for (std::size_t i = 0; i < xs.size(); ++i) slab->row({t, double(k + 1), xs[i], px(static_cast<Index>(i))});
          }
        }
      }
      if (want_entropy) {
        const int keep[] = {1, 2};
        const auto rep = entropy_report(partial_trace(st, keep));
        row.insert(row.end(), {rep.s1, rep.s2, rep.joint, rep.mutual_information});
      }
      series.row(row);
      last = rho;
    };
    const auto traj = optomech::evolve(rho0, gen, config.times->values, opt);
    merge_drift(traj.drift);
    series.close();
    if (slab) slab->close();
    if (config.wants("state") && last.size() > 0) write_state(out("final.state"), QuantumState::density_unchecked(s, last));
  }

  struct QuantumPoint {
    std::vector<double> x;
    double n_a = 0.0;
    double residual = 0.0;
    std::string method;
    CMatrix rho;
  };

  QuantumPoint quantum_point(const SystemParams& p) const {
    const HilbertSpace s = space();
    const auto gen = build_generator(p, s);
    const auto res = steady_state(gen, std::nullopt, config.steady_state);
    QuantumPoint q;
    for (int k = 1; k <= p.n_mech(); ++k) q.x.push_back(expectation(embed(position_op(s.dim(k)), k, s), res.rho).real());
    q.n_a = expectation(embed(number_op(s.dim(0)), 0, s), res.rho).real();
    q.residual = res.residual;
    q.method = std::string(to_string(res.method));
    q.rho = res.rho;
    return q;
  }

  void quantum_steady_state() {
    const HilbertSpace s = space();
    const int n = config.params.n_mech();
    const auto q = quantum_point(config.params);
    std::vector<std::string> header = {"eta", "delta_c"};
    for (int k = 1; k <= n; ++k) header.push_back("x" + std::to_string(k));
    header.insert(header.end(), {"n_a", "residual", "method"});
    CsvWriter csv(out("steady_state.csv"), header);
    std::vector<std::string> cells = {format_double(config.params.eta), format_double(config.params.delta_c)};
    for (double v : q.x) cells.push_back(format_double(v));
    cells.insert(cells.end(), {format_double(q.n_a), format_double(q.residual), q.method});
    csv.row_cells(cells);
    csv.close();
    const auto st = QuantumState::density_unchecked(s, q.rho);
    if (config.wants("P(x)")) {
      const auto xs = distribution_points(config);
      CsvWriter px(out("position.csv"), {"mode", "x", "P"});
      const auto marg = mechanical_marginals(st);
      for (int k = 0; k < n; ++k) {
        const auto d = position_distribution(marg[static_cast<std::size_t>(k)], xs);
        for (std::size_t i = 0; i < xs.size(); ++i) px.row({double(k + 1), xs[i], d(static_cast<Index>(i))});
      }
      px.close();
    }
    if (config.wants("entropy") && n == 2) {
      const int keep[] = {1, 2};
      const auto rep = entropy_report(partial_trace(st, keep));
      CsvWriter e(out("entropy.csv"), {"S1", "S2", "S12", "I12"});
      e.row({rep.s1, rep.s2, rep.joint, rep.mutual_information});
      e.close();
    }
    if (config.wants("state")) write_state(out("steady.state"), st);
  }

  void sweep() {
    const auto values = sweep_values();
    const int n = config.params.n_mech();
    const auto m = static_cast<std::ptrdiff_t>(values.size());
    std::vector<QuantumPoint> points(values.size());
    std::vector<std::exception_ptr> errors(values.size());
    fs::create_directories(dir / "points");
    // Each point is independent; the inner kernels run serially inside the pool.
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < m; ++i) {
      const auto k = static_cast<std::size_t>(i);
      try {
        points[k] = quantum_point(with_sweep_value(config.params, sweep_name(), values[k]));
        char name[32];
        std::snprintf(name, sizeof name, "point_%04td.csv", i);
        CsvWriter one(dir / "points" / name, {sweep_name(), "x1", "n_a", "residual"});
        one.row({values[k], points[k].x[0], points[k].n_a, points[k].residual});
        one.close();
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
    for (std::size_t k = 0; k < errors.size(); ++k) {
      if (errors[k]) {
        try {
          std::rethrow_exception(errors[k]);
        } catch (...) {
          rethrow_with_context("sweep point " + sweep_name() + "=" + format_double(values[k]) + ": ");
        }
      }
    }
    for (std::ptrdiff_t i = 0; i < m; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "point_%04td.csv", i);
      files.push_back(dir / "points" / name);
    }

    std::vector<std::vector<SteadyStateSolution>> classical;
    std::size_t branches = 0;
    for (double v : values) {
      const SystemParams p = with_sweep_value(config.params, sweep_name(), v);
      classical.push_back(p.coupling == Coupling::Linear ? linear_steady_states(p) : quadratic_steady_states(p));
      branches = std::max(branches, classical.back().size());
    }
    std::vector<std::string> header = {sweep_name()};
    for (int k = 1; k <= n; ++k) header.push_back("x" + std::to_string(k) + "_quantum");
    header.insert(header.end(), {"n_a", "residual"});
    for (std::size_t b = 0; b < branches; ++b) {
      header.push_back("x_classical_" + std::to_string(b));
      header.push_back("stability_" + std::to_string(b));
    }
    CsvWriter csv(out("sweep.csv"), header);
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::vector<std::string> cells = {format_double(values[i])};
      for (double v : points[i].x) cells.push_back(format_double(v));
      cells.push_back(format_double(points[i].n_a));
      cells.push_back(format_double(points[i].residual));
      for (std::size_t b = 0; b < branches; ++b) {
        if (b < classical[i].size()) {
          cells.push_back(format_double(classical[i][b].x_s[0]));
          cells.emplace_back(to_string(classical[i][b].stability));
        } else {
          cells.emplace_back();
          cells.emplace_back();
        }
      }
      csv.row_cells(cells);
    }
    csv.close();
  }

  void write_schmidt(const SchmidtDecomposition& sd) {
    CsvWriter csv(out("schmidt.csv"), {"index", "lambda"});
    for (Index i = 0; i < sd.coefficients.size(); ++i) csv.row({double(i), sd.coefficients(i)});
    csv.close();
  }

  void ground_state() {
    const auto res = solve_ground_state(config.params, ground_grid());
    const int n = config.params.n_mech();
    const auto x = res.psi.axes[0].points();
    if (n == 1) {
      CsvWriter csv(out("ground_state.csv"), {"x", "psi"});
      for (std::size_t i = 0; i < x.size(); ++i) csv.row({x[i], res.psi.values(static_cast<Index>(i))});
      csv.close();
    } else {
      const auto y = res.psi.axes[1].points();
      CsvWriter csv(out("ground_state.csv"), {"x1", "x2", "psi"});
      for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j)
          csv.row({x[i], y[j], res.psi.values(static_cast<Index>(i * y.size() + j))});
      csv.close();
    }
    json summary = {{"energy", res.energy},
                    {"iterations", res.iterations},
                    {"rejected_steps", res.rejected_steps},
                    {"final_dtau", res.final_dtau},
                    {"units", "energy in hbar kappa, time in 1/kappa"}};
    if (!config.dims.empty() && (config.wants("schmidt") || config.wants("state") || config.wants("entropy"))) {
      const std::vector<int> mdims(config.dims.begin() + 1, config.dims.end());
      const auto proj = fock_project(res.psi, mdims);
      summary["reconstruction_error"] = proj.reconstruction_error;
      const auto st = proj.state();
      if (config.wants("schmidt") && n == 2) {
        const auto sd = schmidt_decompose(st);
        summary["schmidt_number"] = sd.schmidt_number;
        write_schmidt(sd);
      }
      if (config.wants("entropy") && n == 2) {
        const auto rep = entropy_report(st);
        summary["entropy"] = {{"S1", rep.s1}, {"S2", rep.s2}, {"S12", rep.joint}, {"I12", rep.mutual_information}};
      }
      if (config.wants("state")) write_state(out("ground.state"), st);
    }
    std::ofstream(out("ground_state.json")) << summary.dump(2) << "\n";
  }

  void analyze() {
    const auto st = read_state(config.base_dir / *config.input);
    const int modes = st.space().modes();
    CsvWriter csv(out("analysis.csv"), {"quantity", "value"});
    auto put = [&](const std::string& k, double v) { csv.row_cells({k, format_double(v)}); };
    put("trace", st.density_matrix().trace().real());
    for (int m = 0; m < modes; ++m) {
      const int keep[] = {m};
      const auto red = partial_trace(st, keep);
      const int d = red.space().dim(0);
      put("n_" + std::to_string(m), expectation(number_op(d), red.matrix()).real());
      put("x_" + std::to_string(m), expectation(position_op(d), red.matrix()).real());
      if (config.wants("entropy")) put("S_" + std::to_string(m), von_neumann_entropy(red));
    }
    if (config.wants("schmidt") && modes == 2 && st.is_pure()) {
      const auto sd = schmidt_decompose(st);
      put("schmidt_number", sd.schmidt_number);
      write_schmidt(sd);
    }
    if (config.wants("entropy") && modes >= 2) {
      const int keep[] = {modes - 2, modes - 1};
      const auto pair = modes == 2 ? st : partial_trace(st, keep);
      const auto rep = entropy_report(pair);
      put("S_joint_last_two", rep.joint);
      put("I_last_two", rep.mutual_information);
    }
    csv.close();
    if (config.wants("P(x)")) {
      const auto xs = distribution_points(config);
      CsvWriter px(out("position.csv"), {"mode", "x", "P"});
      for (int m = 0; m < modes; ++m) {
        const int keep[] = {m};
        const auto d = position_distribution(partial_trace(st, keep), xs);
        for (std::size_t i = 0; i < xs.size(); ++i) px.row({double(m), xs[i], d(static_cast<Index>(i))});
      }
      px.close();
    }
  }
};

std::string hex(const unsigned char* data, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < n; ++i) {
    s.push_back(digits[data[i] >> 4]);
    s.push_back(digits[data[i] & 15]);
  }
  return s;
}

}  // namespace

std::string_view to_string(Task t) {
  for (const auto& [task, name] : kTaskNames)
    if (task == t) return name;
  return "unknown";
}

Task task_from_string(std::string_view s) {
  for (const auto& [task, name] : kTaskNames)
    if (name == s) return task;
  throw ValidationError("task", "unknown task \"" + std::string(s) + "\"");
}

bool ScenarioConfig::wants(std::string_view output) const {
  return std::find(outputs.begin(), outputs.end(), output) != outputs.end();
}

ScenarioConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError("<config>", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("<config>", "top level must be an object");
  ScenarioConfig c;
  c.source = j.dump();
  c.base_dir = base_dir;
  c.name = require(j, "name", "").get<std::string>();
  c.task = task_from_string(require(j, "task", "").get<std::string>());
  c.params = parse_params(require(j, "params", ""));
  if (j.contains("space")) {
    const json& dims = require(j.at("space"), "dims", "space.");
    if (!dims.is_array()) throw ValidationError("space.dims", "expected an array of integers");
    for (std::size_t i = 0; i < dims.size(); ++i) {
      const int d = as_int(dims[i], "space.dims[" + std::to_string(i) + "]");
      if (d < 2) throw ValidationError("space.dims[" + std::to_string(i) + "]", "every mode needs dimension >= 2");
      c.dims.push_back(d);
    }
  }
  if (j.contains("initial_state")) c.initial_state = parse_initial(j.at("initial_state"));
  if (j.contains("times")) {
    c.times = TimeSpec{parse_range(j.at("times"), "times")};
    for (std::size_t i = 0; i < c.times->values.size(); ++i) {
      if (c.times->values[i] < 0.0 || (i > 0 && c.times->values[i] < c.times->values[i - 1]))
        throw ValidationError("times", "must be non-negative and non-decreasing");
    }
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    GridAxis ax;
    ax.x_min = as_number(require(g, "x_min", "grid."), "grid.x_min");
    ax.x_max = as_number(require(g, "x_max", "grid."), "grid.x_max");
    ax.n_points = as_int(require(g, "n_points", "grid."), "grid.n_points");
    if (!(ax.x_max > ax.x_min)) throw ValidationError("grid.x_max", "must exceed grid.x_min");
    if (ax.n_points < 2) throw ValidationError("grid.n_points", "must be >= 2");
    c.grid = ax;
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    SweepSpec sw;
    if (s.contains("parameter")) sw.parameter = s.at("parameter").get<std::string>();
    if (sw.parameter != "eta" && sw.parameter != "delta_c")
      throw ValidationError("sweep.parameter", "only \"eta\" and \"delta_c\" can be swept");
    sw.values = parse_range(s, "sweep");
    if (sw.values.empty()) throw ValidationError("sweep", "no sweep values");
    if (sw.parameter == "eta")
      for (double v : sw.values)
        if (v < 0.0) throw ValidationError("sweep", "pump rates must be >= 0");
    c.sweep = sw;
  }
  if (j.contains("outputs")) {
    for (const auto& o : j.at("outputs")) {
      const std::string s = o.get<std::string>();
      if (std::find(kOutputs.begin(), kOutputs.end(), s) == kOutputs.end())
        throw ValidationError("outputs", "unknown observable \"" + s + "\"");
      c.outputs.push_back(s);
    }
  }
  if (j.contains("steady_state")) {
    const json& s = j.at("steady_state");
    if (s.contains("method")) {
      try {
        c.steady_state.method = steady_state_method_from_string(s.at("method").get<std::string>());
      } catch (const Error& e) {
        throw ValidationError("steady_state.method", e.what());
      }
    }
    if (s.contains("tolerance")) c.steady_state.tolerance = as_number(s.at("tolerance"), "steady_state.tolerance");
    if (s.contains("max_time")) c.steady_state.max_time = as_number(s.at("max_time"), "steady_state.max_time");
  }
  if (j.contains("input")) c.input = fs::path(j.at("input").get<std::string>());
  if (j.contains("fixed_step")) {
    c.fixed_step = as_number(j.at("fixed_step"), "fixed_step");
    if (!(*c.fixed_step > 0.0)) throw ValidationError("fixed_step", "must be > 0");
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<std::int64_t>();
  validate_config(c);
  return c;
}

ScenarioConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("--config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

void validate_config(const ScenarioConfig& c) {
  c.params.validate();
  const int n = c.params.n_mech();
  const bool quantum = c.task == Task::Evolve || c.task == Task::QuantumSteadyState || c.task == Task::Sweep;
  if (quantum) {
    if (c.dims.empty()) throw ValidationError("space.dims", "required for task " + std::string(to_string(c.task)));
  }
  if (!c.dims.empty() && static_cast<int>(c.dims.size()) != 1 + n && c.task != Task::Analyze)
    throw ValidationError("space.dims", "expected " + std::to_string(1 + n) + " entries (cavity first)");
  if ((c.task == Task::Evolve || c.task == Task::MeanFieldEvolve) && !c.times)
    throw ValidationError("times", "required for task " + std::string(to_string(c.task)));
  if ((c.task == Task::BifurcationScan || c.task == Task::Sweep) && !c.sweep)
    throw ValidationError("sweep", "required for task " + std::string(to_string(c.task)));
  if ((c.task == Task::Potential || c.task == Task::GroundState) && n > 2)
    throw ValidationError("params.g", "grid tasks support one or two mechanical modes");
  if (c.initial_state.kind == InitialState::Kind::Coherent && static_cast<int>(c.initial_state.beta.size()) != n)
    throw ValidationError("initial_state.beta", "expected one amplitude per mechanical mode");
  if (c.initial_state.kind == InitialState::Kind::EffectiveGroundState && n > 2)
    throw ValidationError("initial_state.type", "effective ground state needs one or two mechanical modes");
  if (c.initial_state.kind == InitialState::Kind::Cat && c.initial_state.beta0 < 0.0)
    throw ValidationError("initial_state.beta0", "must be >= 0");
  if (c.task == Task::Analyze) {
    if (!c.input) throw ValidationError("input", "required for task analyze");
    if (!fs::exists(c.base_dir / *c.input)) throw ValidationError("input", "file not found: " + (c.base_dir / *c.input).string());
  }
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  return hex(md, len);
}

void write_state(const fs::path& path, const QuantumState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write("OMSTATE1", 8);
  const auto& dims = state.space().dims();
  const auto modes = static_cast<std::int32_t>(dims.size());
  out.write(reinterpret_cast<const char*>(&modes), sizeof modes);
  for (int d : dims) {
    const auto v = static_cast<std::int32_t>(d);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  const std::int32_t kind = state.is_pure() ? 0 : 1;
  out.write(reinterpret_cast<const char*>(&kind), sizeof kind);
  if (state.is_pure()) {
    out.write(reinterpret_cast<const char*>(state.vector().data()),
              static_cast<std::streamsize>(state.vector().size() * sizeof(cplx)));
  } else {
    out.write(reinterpret_cast<const char*>(state.matrix().data()),
              static_cast<std::streamsize>(state.matrix().size() * sizeof(cplx)));
  }
  if (!out) throw Error("failed writing " + path.string());
}

QuantumState read_state(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("input", "cannot read " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "OMSTATE1", 8) != 0) throw ValidationError("input", "not a state file: " + path.string());
  std::int32_t modes = 0;
  in.read(reinterpret_cast<char*>(&modes), sizeof modes);
  if (!in || modes < 1 || modes > 16) throw ValidationError("input", "corrupt mode count");
  std::vector<int> dims;
  for (int i = 0; i < modes; ++i) {
    std::int32_t d = 0;
    in.read(reinterpret_cast<char*>(&d), sizeof d);
    if (!in || d < 1) throw ValidationError("input", "corrupt dimensions");
    dims.push_back(d);
  }
  std::int32_t kind = -1;
  in.read(reinterpret_cast<char*>(&kind), sizeof kind);
  HilbertSpace space(dims);
  const Index n = space.total();
  if (kind == 0) {
    CVector psi(n);
    in.read(reinterpret_cast<char*>(psi.data()), static_cast<std::streamsize>(n * sizeof(cplx)));
    if (!in) throw ValidationError("input", "truncated state file");
    return QuantumState::pure(std::move(space), std::move(psi));
  }
  if (kind != 1) throw ValidationError("input", "unknown state kind");
  CMatrix rho(n, n);
  in.read(reinterpret_cast<char*>(rho.data()), static_cast<std::streamsize>(n * n * sizeof(cplx)));
  if (!in) throw ValidationError("input", "truncated state file");
  // Integrator output only meets the drift tolerances, not the strict ones.
  return QuantumState::density_unchecked(std::move(space), std::move(rho));
}

RunManifest run_scenario(const ScenarioConfig& config, const fs::path& out_dir) {
  validate_config(config);
  fs::create_directories(out_dir);
  const auto start = std::chrono::steady_clock::now();
  Run run{config, out_dir, {}, {}};
  try {
    switch (config.task) {
      case Task::Potential:
        run.potential();
        break;
      case Task::SteadyStates:
        run.steady_states("steady_states.csv");
        break;
      case Task::BifurcationScan:
        run.steady_states("bifurcation.csv");
        break;
      case Task::MeanFieldEvolve:
        run.meanfield();
        break;
      case Task::Evolve:
        run.evolve();
        break;
      case Task::QuantumSteadyState:
        run.quantum_steady_state();
        break;
      case Task::GroundState:
        run.ground_state();
        break;
      case Task::Analyze:
        run.analyze();
        break;
      case Task::Sweep:
        run.sweep();
        break;
    }
  } catch (const Error&) {
    rethrow_with_context("scenario " + config.name + " (" + std::string(to_string(config.task)) + "): ");
  }
  RunManifest m;
  m.name = config.name;
  m.task = std::string(to_string(config.task));
  m.version = OPTOMECH_VERSION;
  m.config = config.source;
  m.drift = run.drift;
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& f : run.files) {
    m.outputs.push_back({fs::relative(f, out_dir).string(), sha256_file(f), fs::file_size(f)});
  }

  json files = json::array();
  for (const auto& f : m.outputs) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  const json doc = {{"name", m.name},
                    {"task", m.task},
                    {"version", m.version},
                    {"config", json::parse(m.config)},
                    {"invariant_drift",
                     {{"trace", m.drift.trace},
                      {"hermiticity", m.drift.hermiticity},
                      {"min_eigenvalue", m.drift.min_eigenvalue},
                      {"within_tolerance", m.drift.within_tolerance}}},
                    {"wall_seconds", m.wall_seconds},
                    {"outputs", files}};
  const fs::path tmp = out_dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    out << doc.dump(2) << "\n";
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, out_dir / "manifest.json");
  return m;
}

}  // namespace optomech
