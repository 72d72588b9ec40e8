// psclab: command-line front end for the prescribed scalar curvature lab.

#include <CLI11.hpp>

#include <cmath>
#include <iomanip>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "psc/experiment.hpp"
#include "psc/reduction.hpp"

namespace {

using nlohmann::json;

json cubic_json(const psc::CubicTermReport& r) {
  return {{"measure", psc::to_string(r.measure)},
          {"radial_integral", r.radial_integral},
          {"weighted_integral", r.weighted_integral},
          {"prefactor", r.prefactor},
          {"F3", r.value}};
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for the prescribed scalar curvature flow on warped products", "psclab"};
  app.set_version_flag("--version", psc::kToolVersion);
  app.require_subcommand(1);

  // flow run
  auto* flow = app.add_subcommand("flow", "Flow experiments");
  flow->require_subcommand(1);
  auto* flow_run = flow->add_subcommand("run", "Run the flow from a config file or run record");
  std::string config_path;
  flow_run->add_option("--config", config_path, "TOML-style config or run.json")->required();
  std::string out_dir;
  flow_run->add_option("--out", out_dir, "Override output.dir");

  // spectrum
  auto* spectrum = app.add_subcommand("spectrum", "Eigenvalues of the linearized operator as CSV");
  int sp_dim = 3, sp_cells = 128;
  std::string sp_family = "round", sp_f = "critical", sp_potential = "R", sp_config;
  double sp_tol = -1;
  spectrum->add_option("--config", sp_config, "Take grid, metric and f from a config");
  spectrum->add_option("--n", sp_dim, "Dimension");
  spectrum->add_option("--cells", sp_cells, "Number of radial cells");
  spectrum->add_option("--family", sp_family, "round | eps:<e> | custom:<csv>");
  spectrum->add_option("--f", sp_f, "f spec");
  spectrum->add_option("--potential", sp_potential, "R | f");
  spectrum->add_option("--kernel-tol", sp_tol, "Kernel tolerance (default 50 h^2 (n-1))");

  // cubic
  auto* cubic = app.add_subcommand("cubic", "Cubic term F3 on the radial kernel direction");
  int cu_dim = 3, cu_cells = 2048;
  std::string cu_measure;
  double cu_eps = 0;
  cubic->add_option("--n", cu_dim, "Dimension")->required();
  cubic->add_option("--measure", cu_measure, "geometric | paper")
      ->required()
      ->check(CLI::IsMember({"geometric", "paper", "paper_radial"}));
  cubic->add_option("--eps", cu_eps, "Perturbation parameter of w = sin r + eps sin^3 r");
  cubic->add_option("--cells", cu_cells, "Number of radial cells");

  // ansatz
  auto* ansatz = app.add_subcommand("ansatz", "Slow-mode ansatz amplitude");
  int an_p = 3, an_dim = 3, an_samples = 100;
  double an_Fp = 1, an_T = 1, an_horizon = 1e6;
  std::string an_emit = "csv";
  ansatz->add_option("--p", an_p, "Order of integrability")->required();
  ansatz->add_option("--Fp", an_Fp, "F_p(v_hat)")->required();
  ansatz->add_option("--T", an_T, "Time offset")->required();
  ansatz->add_option("--n", an_dim, "Dimension");
  ansatz->add_option("--horizon", an_horizon, "Last sample time");
  ansatz->add_option("--samples", an_samples, "Number of log-spaced samples");
  ansatz->add_option("--emit", an_emit, "Output format")->check(CLI::IsMember({"csv"}));

  // as3
  auto* as3 = app.add_subcommand("as3", "AS3 check on the warped-product family (n = 3)");
  double as_eps = 0;
  int as_cells = 256;
  std::string as_measure = "paper";
  as3->add_option("--eps", as_eps, "Perturbation parameter")->required();
  as3->add_option("--cells", as_cells, "Number of radial cells");
  as3->add_option("--measure", as_measure, "Convention for the verdict")
      ->check(CLI::IsMember({"geometric", "paper", "paper_radial"}));

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a decay rate to a trace column");
  std::string fit_input, fit_column = "dist_l2", fit_model = "auto";
  double fit_t0 = NAN, fit_t1 = NAN;
  fit->add_option("--input", fit_input, "Trace CSV")->required();
  fit->add_option("--column", fit_column, "Column to fit");
  fit->add_option("--model", fit_model, "auto | exponential | polynomial")
      ->check(CLI::IsMember({"auto", "exponential", "polynomial"}));
  fit->add_option("--t-start", fit_t0, "Window start");
  fit->add_option("--t-end", fit_t1, "Window end");

  // lojasiewicz
  auto* loj = app.add_subcommand("lojasiewicz", "Estimate the Lojasiewicz exponent from a trace");
  std::string loj_input;
  double loj_einf = NAN, loj_floor = NAN;
  loj->add_option("--input", loj_input, "Trace CSV")->required();
  loj->add_option("--e-inf", loj_einf, "Limit energy (default: last row)");
  loj->add_option("--floor", loj_floor, "Drop pairs with |E - E_inf| below this");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run several configs concurrently");
  std::vector<std::string> sweep_configs;
  unsigned sweep_threads = std::max(1u, std::thread::hardware_concurrency());
  sweep->add_option("--config", sweep_configs, "Config files")->required();
  sweep->add_option("--threads", sweep_threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (e.get_exit_code() != 0) std::cerr << app.help();
    return 2;
  }

  std::cout << std::setprecision(17);
  try {
    if (*flow_run) {
      psc::RunConfig config = psc::load_config(config_path);
      if (!out_dir.empty()) config.dir = out_dir;
      const psc::RunResult result = psc::run_experiment(config);
      psc::write_outputs(config, result);
      print({{"termination", result.trace.termination},
             {"failed", result.trace.failed},
             {"dir", config.dir},
             {"final", result.record["final"]}});
      return result.trace.failed ? 1 : 0;
    }
    if (*spectrum) {
      psc::RadialGrid grid;
      psc::WarpedMetric m;
      if (!sp_config.empty()) {
        const psc::RunConfig c = psc::load_config(sp_config);
        grid = psc::make_grid(c.dim, c.n_cells);
        m = psc::build_metric(grid, psc::parse_metric_family(c.family), psc::parse_f_spec(c.f));
        sp_potential = c.potential;
      } else {
        grid = psc::make_grid(sp_dim, sp_cells);
        m = psc::build_metric(grid, psc::parse_metric_family(sp_family), psc::parse_f_spec(sp_f));
      }
      const auto op = psc::assemble(m, psc::parse_potential(sp_potential));
      const auto d = sp_tol >= 0 ? psc::eigendecompose(op, m, sp_tol) : psc::eigendecompose(op, m);
      std::cout << "index,eigenvalue,classification\n";
      for (int i = 0; i < d.size(); ++i) {
        const double l = d.eigenvalues[i];
        const char* cls = std::abs(l) < d.kernel_tol ? "kernel" : l > 0 ? "up" : "down";
        std::cout << i << ',' << l << ',' << cls << '\n';
      }
      return 0;
    }
    if (*cubic) {
      const auto grid = psc::make_grid(cu_dim, cu_cells);
      const auto family = cu_eps == 0 ? psc::MetricFamily::round() : psc::MetricFamily::eps(cu_eps);
      const auto m = psc::sample_metric(grid, family, psc::FSpec::critical());
      const psc::Field v = cu_eps == 0 ? psc::Field(grid.nodes.array().cos().matrix()) : psc::warped_kernel_solve(m).psi;
      json j = cubic_json(psc::cubic_term_report(m, v, psc::parse_measure(cu_measure)));
      j["n"] = cu_dim;
      j["n_cells"] = cu_cells;
      j["eps"] = cu_eps;
      j["field"] = cu_eps == 0 ? "cos r" : "psi_eps";
      print(j);
      return 0;
    }
    if (*ansatz) {
      const psc::AnsatzSpec spec{an_p, an_Fp, an_T, an_dim, {}};
      spec.validate();
      std::cout << "t,phi,dphi,gradient,residual\n";
      for (double t : psc::log_times(an_T, an_horizon, an_samples)) {
        const double s = psc::ansatz_amplitude(spec, t);
        const double ds = psc::ansatz_amplitude_derivative(spec, t);
        const double g = psc::ansatz_gradient(spec, t);
        std::cout << t << ',' << s << ',' << ds << ',' << g << ',' << 8 / (an_dim - 2.0) * ds + g << '\n';
      }
      return 0;
    }
    if (*as3) {
      const auto grid = psc::make_grid(3, as_cells);
      const auto r = psc::as3_check(grid, as_eps, psc::FSpec::critical(), psc::parse_measure(as_measure));
      print({{"n", r.dim},
             {"n_cells", r.n_cells},
             {"eps", r.epsilon},
             {"lambda_nearest_zero", r.lambda_nearest_zero},
             {"kernel_tol", r.kernel_tol},
             {"kernel_residual", r.kernel_residual},
             {"psi_deviation_from_cos", r.psi_deviation},
             {"curvature_spread", r.curvature_spread},
             {"F3_geometric", cubic_json(r.geometric)},
             {"F3_paper_radial", cubic_json(r.paper_radial)},
             {"convention", psc::to_string(r.convention)},
             {"as3", r.as3},
             {"verdict", r.verdict}});
      return 0;
    }
    if (*fit) {
      const auto cols = psc::read_csv_columns(fit_input);
      if (!cols.count("t") || !cols.count(fit_column)) throw psc::ConfigError("missing column in " + fit_input);
      const auto& t = cols.at("t");
      const auto& y = cols.at(fit_column);
      std::optional<psc::Window> w;
      if (!std::isnan(fit_t0) || !std::isnan(fit_t1))
        w = psc::Window{std::isnan(fit_t0) ? t.front() : fit_t0, std::isnan(fit_t1) ? t.back() : fit_t1};
      if (fit_model == "exponential")
        print(psc::to_json(psc::fit_exponential(t, y, w)));
      else if (fit_model == "polynomial")
        print(psc::to_json(psc::fit_polynomial(t, y, w)));
      else
        print(psc::to_json(psc::classify_rate(t, y, w)));
      return 0;
    }
    if (*loj) {
      const auto cols = psc::read_csv_columns(loj_input);
      if (!cols.count("E") || !cols.count("grad_l2")) throw psc::ConfigError("trace needs E and grad_l2 columns");
      const auto& E = cols.at("E");
      const double einf = std::isnan(loj_einf) ? E.back() : loj_einf;
      std::optional<double> floor;
      if (!std::isnan(loj_floor)) floor = loj_floor;
      json j = psc::to_json(psc::lojasiewicz_estimate(E, cols.at("grad_l2"), einf, floor));
      j["E_inf"] = einf;
      print(j);
      return 0;
    }
    if (*sweep) {
      std::vector<psc::RunConfig> configs;
      for (const auto& p : sweep_configs) configs.push_back(psc::load_config(p));
      const auto records = psc::sweep(configs, sweep_threads);
      bool ok = true;
      for (const auto& r : records) {
        std::cout << r.dump() << '\n';
        ok = ok && !r.contains("error") && !r.value("failed", false);
      }
      return ok ? 0 : 1;
    }
  } catch (const psc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const psc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << app.help();
  return 2;
}
