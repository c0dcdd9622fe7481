// siv: command-line front end for the SI*V* toolkit.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "siv/commands.hpp"

namespace fs = std::filesystem;
using namespace siv;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit(const std::optional<fs::path>& out, const std::string& content) {
  if (out) {
    atomic_write(*out, content);
  } else {
    std::cout << content;
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

Json manifest(const std::string& command, std::uint64_t seed, Json config) {
  return Json{{"toolkit", "siv"},
              {"version", kVersion},
              {"command", command},
              {"seed", seed},
              {"config", std::move(config)}};
}

MeanFieldState initial_mean_field(const Model& model, const std::string& init_path,
                                  double infected) {
  if (!init_path.empty()) {
    return mean_field_state_from_json(parse_json(read_text(init_path), init_path), model);
  }
  if (infected < 0.0 || infected > 1.0) throw UsageError("--infected must lie in [0, 1]");
  auto st = MeanFieldState::susceptible(model.node_count(), model.m(), model.n());
  for (int i = 0; i < model.node_count(); ++i) {
    st.I(i, 0) = infected;
    st.S(i) = 1.0 - infected;
  }
  return st;
}

NetworkState initial_network(const Model& model, const std::string& labels,
                             const std::string& infected_nodes) {
  NetworkState x(model.node_count(), 0);
  if (!labels.empty()) {
    const auto parts = split(labels, ',');
    if (static_cast<int>(parts.size()) != model.node_count()) {
      throw InputError("--labels needs one label per node");
    }
    for (int i = 0; i < model.node_count(); ++i) {
      x[i] = parse_state_label(parts[i], model.m(), model.n());
    }
    return x;
  }
  for (const auto& p : split(infected_nodes, ',')) {
    int i = 0;
    try {
      i = std::stoi(p);
    } catch (const std::exception&) {
      throw UsageError("--infected-nodes: '" + p + "' is not a node index");
    }
    if (i < 0 || i >= model.node_count()) throw InputError("--infected-nodes: node out of range");
    x[i] = 1;
  }
  return x;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SI*V* spreading models: mean-field, stability, phase-type and stochastic tools",
               "siv"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::function<void()> action;

  // generate-graph
  int g_nodes = 20;
  double g_prob = 0.15;
  std::uint64_t g_seed = 0;
  bool g_strong = false;
  std::string g_out;
  auto* gen = app.add_subcommand("generate-graph", "Erdos-Renyi directed graph as an edge list");
  gen->add_option("--nodes", g_nodes, "Node count")->check(CLI::PositiveNumber);
  gen->add_option("--prob", g_prob, "Edge probability")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", g_seed, "Seed");
  gen->add_flag("--require-strong", g_strong, "Retry seeds until strongly connected");
  gen->add_option("--out", g_out, "Output edge-list file (stdout if omitted)");
  gen->callback([&] {
    action = [&] {
      const Graph g = generate_graph({g_nodes, g_prob, g_seed, g_strong, 1000});
      std::ostringstream ss;
      write_edge_list(ss, g);
      emit(g_out.empty() ? std::nullopt : std::optional<fs::path>(g_out), ss.str());
    };
  });

  // simulate-ode
  std::string o_model, o_init, o_out;
  double o_infected = 0.1, o_horizon = 100.0, o_step = 0.01;
  int o_stride = 0;
  std::uint64_t o_seed = 0;
  auto* ode = app.add_subcommand("simulate-ode", "Integrate the mean-field equations");
  ode->add_option("--model", o_model, "Model JSON")->required()->check(CLI::ExistingFile);
  ode->add_option("--init", o_init, "Initial state JSON")->check(CLI::ExistingFile);
  ode->add_option("--infected", o_infected, "Initial I1 probability at every node");
  ode->add_option("--horizon", o_horizon, "Days")->check(CLI::PositiveNumber);
  ode->add_option("--step", o_step, "RK4 step")->check(CLI::PositiveNumber);
  ode->add_option("--stride", o_stride, "Record every k-th step (0 = automatic)");
  ode->add_option("--seed", o_seed, "Seed (only used for sampled models)");
  ode->add_option("--out", o_out, "Output directory")->required();
  ode->callback([&] {
    action = [&] {
      const Model model = read_model_file(o_model);
      require_valid(model);
      const auto init = initial_mean_field(model, o_init, o_infected);
      IntegrationOptions opt;
      opt.step = o_step;
      opt.stride = o_stride;
      const auto traj = integrate(model, init, o_horizon, opt);
      const fs::path dir = o_out;
      atomic_write(dir / "trajectory.csv", trajectory_csv(traj));
      atomic_write(dir / "summary.csv", summary_csv(traj));
      atomic_write(dir / "manifest.json",
                   manifest("simulate-ode", o_seed,
                            {{"model", o_model},
                             {"init", o_init},
                             {"infected", o_infected},
                             {"horizon", o_horizon},
                             {"step", o_step},
                             {"stride", o_stride}})
                           .dump(2) +
                       "\n");
    };
  });

  // simulate-ctmc
  std::string c_model, c_labels, c_infected = "0", c_out;
  double c_horizon = 100.0, c_grid = 0.5;
  std::size_t c_runs = 1;
  std::uint64_t c_seed = 0;
  unsigned c_jobs = 1;
  auto* ctmc = app.add_subcommand("simulate-ctmc", "Exact stochastic simulation");
  ctmc->add_option("--model", c_model, "Model JSON")->required()->check(CLI::ExistingFile);
  ctmc->add_option("--labels", c_labels, "Initial labels, comma separated (S,I1,V1,...)");
  ctmc->add_option("--infected-nodes", c_infected, "Nodes starting in I1 (default 0)");
  ctmc->add_option("--horizon", c_horizon, "Days")->check(CLI::PositiveNumber);
  ctmc->add_option("--runs", c_runs, "Runs; above 1 an occupancy ensemble is written")
      ->check(CLI::PositiveNumber);
  ctmc->add_option("--grid-step", c_grid, "Ensemble grid spacing")->check(CLI::PositiveNumber);
  ctmc->add_option("--seed", c_seed, "Seed");
  ctmc->add_option("--jobs", c_jobs, "Worker threads")->check(CLI::PositiveNumber);
  ctmc->add_option("--step", c_grid, "Alias of --grid-step");
  ctmc->add_option("--out", c_out, "Output directory")->required();
  ctmc->callback([&] {
    action = [&] {
      const Model model = read_model_file(c_model);
      require_valid(model);
      const auto init = initial_network(model, c_labels, c_infected);
      const fs::path dir = c_out;
      if (c_runs == 1) {
        Rng rng = make_rng(c_seed, 0);
        const auto log = simulate_ctmc(model, init, c_horizon, rng);
        atomic_write(dir / "events.csv", event_log_csv(log, model.m()));
      } else {
        const auto occ =
            ensemble(model, init, c_horizon, c_runs, c_seed, uniform_grid(c_horizon, c_grid), c_jobs);
        atomic_write(dir / "ensemble.csv", occupancy_csv(occ, model.m()));
      }
      atomic_write(dir / "manifest.json",
                   manifest("simulate-ctmc", c_seed,
                            {{"model", c_model},
                             {"labels", c_labels},
                             {"infected_nodes", c_infected},
                             {"horizon", c_horizon},
                             {"runs", c_runs},
                             {"grid_step", c_grid}})
                           .dump(2) +
                       "\n");
    };
  });

  // stability
  std::string s_model, s_out, s_dump;
  auto* stab = app.add_subcommand("stability", "Disease-free equilibrium stability report");
  stab->add_option("--model", s_model, "Model JSON")->required()->check(CLI::ExistingFile);
  stab->add_option("--out", s_out, "Output JSON file (stdout if omitted)");
  stab->add_option("--dump-matrices", s_dump, "Directory for wxx.csv / qxx.csv");
  stab->callback([&] {
    action = [&] {
      const Model model = read_model_file(s_model);
      const auto report = stability_report(model);
      if (!s_dump.empty()) {
        atomic_write(fs::path(s_dump) / "wxx.csv", matrix_csv(report.wxx));
        if (report.qxx) atomic_write(fs::path(s_dump) / "qxx.csv", matrix_csv(*report.qxx));
      }
      emit(s_out.empty() ? std::nullopt : std::optional<fs::path>(s_out),
           stability_json(report).dump(2) + "\n");
    };
  });

  // fit-ph
  std::string f_target = "lognormal", f_input, f_out;
  double f_mean = 12.7, f_sd = 4.31;
  int f_phases = 10, f_iterations = 400;
  std::size_t f_samples = 10000;
  std::uint64_t f_seed = 0;
  unsigned f_jobs = 1;
  bool f_free_initial = false;
  auto* fit = app.add_subcommand("fit-ph", "Fit a phase-type law by EM");
  fit->add_option("--target", f_target, "lognormal or samples")
      ->check(CLI::IsMember({"lognormal", "samples"}));
  fit->add_option("--mean", f_mean, "Log-normal mean")->check(CLI::PositiveNumber);
  fit->add_option("--sd", f_sd, "Log-normal standard deviation")->check(CLI::PositiveNumber);
  fit->add_option("--samples", f_samples, "Number of target draws")->check(CLI::PositiveNumber);
  fit->add_option("--input", f_input, "Sample file, one value per line (--target samples)")
      ->check(CLI::ExistingFile);
  fit->add_option("--phases", f_phases, "Phases p")->check(CLI::PositiveNumber);
  fit->add_option("--max-iterations", f_iterations, "EM iterations")->check(CLI::PositiveNumber);
  fit->add_flag("--free-initial", f_free_initial, "Also fit the initial distribution");
  fit->add_option("--seed", f_seed, "Seed");
  fit->add_option("--jobs", f_jobs, "Worker threads for restarts")->check(CLI::PositiveNumber);
  fit->add_option("--out", f_out, "Output PhaseType JSON (stdout if omitted)");
  fit->callback([&] {
    action = [&] {
      std::vector<double> samples;
      if (f_target == "samples") {
        if (f_input.empty()) throw UsageError("--target samples needs --input");
        std::istringstream in(read_text(f_input));
        double v = 0.0;
        while (in >> v) samples.push_back(v);
        if (!in.eof()) throw InputError("fit-ph: malformed sample file");
      } else {
        samples = lognormal_samples(f_mean, f_sd, f_samples, stream_seed(f_seed, Stream::kTargetSamples));
      }
      EmOptions opt;
      opt.max_iterations = f_iterations;
      opt.free_initial = f_free_initial;
      opt.jobs = f_jobs;
      const auto res = fit_ph_em(samples, f_phases, opt, stream_seed(f_seed, Stream::kEmFit));
      emit(f_out.empty() ? std::nullopt : std::optional<fs::path>(f_out),
           rounded_phase_type(res.fit).dump(2) + "\n");
    };
  });

  // expand
  std::string e_model, e_ph, e_out;
  double e_rate = 0.0;
  auto* exp = app.add_subcommand("expand", "Replace the exposed state by a phase-type chain");
  exp->add_option("--model", e_model, "Base SEIV model JSON (m = 2)")->required()->check(CLI::ExistingFile);
  exp->add_option("--ph", e_ph, "PhaseType JSON")->required()->check(CLI::ExistingFile);
  exp->add_option("--densify-rate", e_rate, "Rate r if the law does not start in phase 1 (0 = default)");
  exp->add_option("--out", e_out, "Output model JSON (stdout if omitted)");
  exp->callback([&] {
    action = [&] {
      const Model base = read_model_file(e_model);
      PhaseType ph = phase_type_from_json(parse_json(read_text(e_ph), e_ph));
      if (!has_unit_initial(ph)) ph = densify(ph, e_rate > 0.0 ? e_rate : default_densify_rate(ph));
      const Model out = expand_transition(base, ph);
      emit(e_out.empty() ? std::nullopt : std::optional<fs::path>(e_out),
           model_to_json(out).dump() + "\n");
    };
  });

  // sweep
  std::string w_model, w_init, w_axis = "beta", w_mult, w_out;
  double w_infected = 0.1, w_horizon = 2000.0, w_step = 0.01, w_tol = 1e-9;
  std::uint64_t w_seed = 0;
  unsigned w_jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Steady state versus lambda_max(Q_xx) over a multiplier grid");
  sweep->add_option("--model", w_model, "Model JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--init", w_init, "Initial state JSON")->check(CLI::ExistingFile);
  sweep->add_option("--infected", w_infected, "Initial I1 probability at every node");
  sweep->add_option("--axis", w_axis, "beta or delta")->check(CLI::IsMember({"beta", "delta"}));
  sweep->add_option("--multipliers", w_mult, "Comma separated increasing multipliers")->required();
  sweep->add_option("--horizon", w_horizon, "Maximum integration horizon")->check(CLI::PositiveNumber);
  sweep->add_option("--step", w_step, "RK4 step")->check(CLI::PositiveNumber);
  sweep->add_option("--tolerance", w_tol, "Steady-state derivative tolerance")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", w_seed, "Seed (only used for sampled models)");
  sweep->add_option("--jobs", w_jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--out", w_out, "Output CSV (stdout if omitted)");
  sweep->callback([&] {
    action = [&] {
      std::vector<double> mult;
      for (const auto& p : split(w_mult, ',')) {
        try {
          mult.push_back(std::stod(p));
        } catch (const std::exception&) {
          throw UsageError("--multipliers: '" + p + "' is not a number");
        }
      }
      const Model model = read_model_file(w_model);
      require_valid(model);
      const auto init = initial_mean_field(model, w_init, w_infected);
      const auto points =
          threshold_sweep(model, init, mult, w_axis == "beta" ? SweepAxis::kBeta : SweepAxis::kRecovery,
                          w_tol, w_horizon, w_step, w_jobs);
      emit(w_out.empty() ? std::nullopt : std::optional<fs::path>(w_out), sweep_csv(points));
    };
  });

  // reproduce-ebola
  EbolaConfig r_cfg;
  std::string r_out;
  unsigned r_jobs = 1;
  auto* ebola = app.add_subcommand("reproduce-ebola", "Phase-type Ebola incubation experiment");
  ebola->add_option("--seed", r_cfg.seed, "Seed");
  ebola->add_option("--horizon", r_cfg.horizon, "Days")->check(CLI::PositiveNumber);
  ebola->add_option("--step", r_cfg.step, "RK4 step")->check(CLI::PositiveNumber);
  ebola->add_option("--jobs", r_jobs, "Worker threads")->check(CLI::PositiveNumber);
  ebola->add_option("--out", r_out, "Output directory")->required();
  ebola->callback([&] {
    action = [&] {
      r_cfg.em.jobs = r_jobs;
      const auto res = reproduce_ebola(r_cfg, fs::path(r_out), r_jobs);
      std::cout << "lambda_max(Q_xx) = "
                << (res.stability.lambda_qxx ? format_number(*res.stability.lambda_qxx) : "undefined")
                << "\npeak day of final infectious state = " << format_number(res.peak_day)
                << "\nmax P_i(" << format_number(r_cfg.horizon) << ") = " << format_number(res.final_p_max)
                << "\n";
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    if (action) action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
