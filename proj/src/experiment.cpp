#include "psc/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "psc/reduction.hpp"

namespace psc {

Field build_u0(const WarpedMetric& m, const std::string& tag, Potential potential, std::uint64_t seed) {
  const auto colon = tag.find(':');
  const std::string kind = tag.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : tag.substr(colon + 1);
  const Field one = Field::Ones(m.size());
  const Field& r = m.grid.nodes;
  if (kind == "const") {
    const double c = detail::parse_number(rest, "u0 constant");
    if (!(c > 0)) throw ConfigError("u0 constant must be positive");
    return c * one;
  }
  if (kind == "cos") return one + detail::parse_number(rest, "u0 amplitude") * r.array().cos().matrix();
  if (kind == "mode") {
    const auto c2 = rest.find(':');
    if (c2 == std::string::npos) throw ConfigError("u0 mode needs mode:<l>:<amplitude>");
    const int l = static_cast<int>(detail::parse_number(rest.substr(0, c2), "mode index"));
    const double amp = detail::parse_number(rest.substr(c2 + 1), "u0 amplitude");
    const SpectralDecomposition d = eigendecompose(assemble(m, potential), m);
    Field phi = d.eigenfield(d.mode_index(l));
    phi /= phi.cwiseAbs().maxCoeff();
    return one + amp * phi;
  }
  if (kind == "kernel") {
    const WarpedKernel k = warped_kernel_solve(m);
    return one + detail::parse_number(rest, "u0 amplitude") * k.psi;
  }
  if (kind == "random") {
    const double amp = detail::parse_number(rest, "u0 amplitude");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    Field profile = Field::Zero(m.size());
    for (int k = 1; k <= 4; ++k) profile += coef(rng) * (k * r.array()).cos().matrix();
    profile /= profile.cwiseAbs().maxCoeff();
    return one + amp * profile;
  }
  throw ConfigError("unknown u0 spec '" + tag + "'");
}

Experiment prepare(const RunConfig& config) {
  config.validate();
  Experiment ex;
  ex.config = config;
  const RadialGrid grid = make_grid(config.dim, config.n_cells);
  ex.metric = build_metric(grid, parse_metric_family(config.family), parse_f_spec(config.f));
  ex.u0 = build_u0(ex.metric, config.u0, parse_potential(config.potential), config.seed);
  check_positive(ex.u0);
  ex.controls.scheme = parse_scheme(config.scheme);
  ex.controls.dt = parse_dt_policy(config.dt);
  ex.controls.horizon = config.horizon;
  ex.controls.cadence = config.cadence;
  ex.controls.stop_tol = config.stop_tol;
  ex.controls.renormalize = parse_renormalize(config.renormalize);
  ex.controls.u_ref_final = config.u_ref == "final";
  return ex;
}

nlohmann::json to_json(const RateFit& fit) {
  return {{"model", fit.model},
          {"rate", fit.rate},
          {"amplitude", fit.amplitude},
          {"log_residual", fit.log_residual},
          {"window", {fit.window.t_start, fit.window.t_end}},
          {"points", fit.points}};
}

nlohmann::json to_json(const RateClassification& c) {
  nlohmann::json j = {{"model", c.model}, {"window", {c.window.t_start, c.window.t_end}}};
  j["exponential"] = c.exponential ? to_json(*c.exponential) : nlohmann::json(nullptr);
  j["polynomial"] = c.polynomial ? to_json(*c.polynomial) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const LojasiewiczEstimate& e) {
  return {{"theta", e.theta}, {"slope", e.slope}, {"residual", e.residual}, {"points", e.points}};
}

nlohmann::json to_json(const EnergyReport& r, double t) {
  return {{"t", t},
          {"E", r.energy},
          {"alpha", r.alpha},
          {"grad_l2", r.grad_l2},
          {"dissipation", r.dissipation},
          {"f_volume", r.f_volume}};
}

RunResult run_experiment(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const Experiment ex = prepare(config);
  RunResult result;
  result.trace = run(ex.metric, ex.u0, ex.controls);
  const FlowTrace& tr = result.trace;

  nlohmann::json rec;
  rec["tool"] = kToolVersion;
  rec["config"] = config.to_json();
  rec["termination"] = tr.termination;
  rec["failed"] = tr.failed;
  rec["steps"] = tr.steps;
  rec["dt"] = tr.dt;
  rec["samples"] = tr.size();

  const std::size_t last = tr.size() - 1;
  rec["final"] = {{"t", tr.times[last]},       {"E", tr.energy[last]},          {"alpha", tr.alpha[last]},
                  {"grad_l2", tr.grad_l2[last]}, {"volume", tr.volume[last]},     {"f_volume", tr.f_volume[last]},
                  {"dist_sup", tr.dist_sup[last]}, {"dist_l2", tr.dist_l2[last]}};

  const double v0 = tr.volume.front();
  double drift = 0;
  for (double v : tr.volume) drift = std::max(drift, std::abs(v - v0) / v0);
  rec["volume_drift"] = drift;
  rec["energy_monotone"] = tr.energy_monotone();
  rec["max_energy_excess"] = std::isfinite(tr.max_energy_excess) ? nlohmann::json(tr.max_energy_excess) : nullptr;

  // Bounds min f Vol <= int f dV_g <= max f Vol with Vol the conserved volume.
  const double lo = ex.metric.f.minCoeff() * v0, hi = ex.metric.f.maxCoeff() * v0;
  bool within = true;
  const double slack = drift + 1e-12;
  for (double fv : tr.f_volume) within = within && fv >= lo * (1 - slack) && fv <= hi * (1 + slack);
  rec["f_volume_bounds"] = {{"lower", lo}, {"upper", hi}, {"holds", within}};

  nlohmann::json fits;
  try {
    fits["dist_l2"] = to_json(classify_rate(tr.times, tr.dist_l2));
  } catch (const DomainError& e) {
    fits["dist_l2"] = {{"error", e.what()}};
  }
  rec["fits"] = fits;
  try {
    rec["lojasiewicz"] = to_json(lojasiewicz_estimate(tr.energy, tr.grad_l2, tr.energy.back()));
  } catch (const DomainError& e) {
    rec["lojasiewicz"] = {{"error", e.what()}};
  }
  rec["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.record = std::move(rec);
  return result;
}

std::string trace_csv(const FlowTrace& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "t,volume,f_volume,E,alpha,grad_l2,dist_sup,dist_l2\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    os << trace.times[i] << ',' << trace.volume[i] << ',' << trace.f_volume[i] << ',' << trace.energy[i] << ','
       << trace.alpha[i] << ',' << trace.grad_l2[i] << ',' << trace.dist_sup[i] << ',' << trace.dist_l2[i] << '\n';
  return os.str();
}

void write_outputs(const RunConfig& config, const RunResult& result) {
  namespace fs = std::filesystem;
  const fs::path dir(config.dir);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "trace.csv");
    out << trace_csv(result.trace);
  }
  {
    std::ofstream out(dir / "run.json");
    out << result.record.dump(2) << '\n';
  }
  if (config.energy_log) {
    const FlowTrace& tr = result.trace;
    std::ofstream out(dir / "energy.jsonl");
    for (std::size_t i = 0; i < tr.size(); ++i) {
      EnergyReport r;
      r.energy = tr.energy[i];
      r.alpha = tr.alpha[i];
      r.grad_l2 = tr.grad_l2[i];
      r.dissipation = tr.dissipation[i];
      r.f_volume = tr.f_volume[i];
      out << to_json(r, tr.times[i]).dump() << '\n';
    }
  }
}

std::map<std::string, std::vector<double>> read_csv_columns(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV '" + path + "'");
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  std::map<std::string, std::vector<double>> cols;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k >= names.size()) throw ConfigError("too many columns on line " + std::to_string(lineno));
      cols[names[k++]].push_back(detail::parse_number(cell, "CSV value"));
    }
    if (k != names.size()) throw ConfigError("too few columns on line " + std::to_string(lineno));
  }
  return cols;
}

std::vector<nlohmann::json> sweep(const std::vector<RunConfig>& configs, unsigned threads) {
  std::set<std::string> dirs;
  for (const auto& c : configs) {
    c.validate();
    if (!dirs.insert(std::filesystem::weakly_canonical(c.dir).string()).second)
      throw ConfigError("sweep configs must write to distinct output directories");
  }
  std::vector<nlohmann::json> records(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        RunResult r = run_experiment(configs[i]);
        write_outputs(configs[i], r);
        records[i] = std::move(r.record);
      } catch (const Error& e) {
        records[i] = {{"config", configs[i].to_json()}, {"error", e.what()}};
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(configs.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 0; k + 1 < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return records;
}

}  // namespace psc
