// twtoa: simulate two-way TOA scenes, solve them, and run the Monte-Carlo campaigns.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "twtoa/campaign.hpp"
#include "twtoa/config.hpp"
#include "twtoa/conic_program.hpp"
#include "twtoa/conic_solver.hpp"
#include "twtoa/crlb.hpp"
#include "twtoa/errors.hpp"
#include "twtoa/gauss_newton.hpp"
#include "twtoa/measurement.hpp"
#include "twtoa/random.hpp"
#include "twtoa/sdp_m.hpp"

using json = nlohmann::ordered_json;
using namespace twtoa;

namespace
{

json vec(const Eigen::VectorXd& v)
{
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd to_vec(const json& j)
{
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

json state_json(const StateVector& s)
{
  return {{"p", vec(s.p)}, {"v", vec(s.v)}, {"clock_offset", s.clock_offset}, {"clock_drift", s.clock_drift}};
}

StateVector state_from(const json& j)
{
  StateVector s;
  s.p = to_vec(j.at("p"));
  s.v = to_vec(j.at("v"));
  s.clock_offset = j.at("clock_offset").get<double>();
  s.clock_drift = j.at("clock_drift").get<double>();
  return s;
}

json scenario_json(const Scenario& s)
{
  json anchors = json::array();
  for (const Anchor& a : s.anchors)
  {
    anchors.push_back({{"id", a.id}, {"q", vec(a.q)}});
  }
  return {{"anchors", anchors}, {"ud", state_json(s.ud)},    {"delays", vec(s.schedule.delays)},
          {"sigma_an", vec(s.sigma_an)}, {"sigma_ud", s.sigma_ud}, {"c", s.c}};
}

Scenario scenario_from(const json& j)
{
  Scenario s;
  for (const auto& a : j.at("anchors"))
  {
    s.anchors.push_back({a.at("id").get<int>(), to_vec(a.at("q"))});
  }
  s.ud = state_from(j.at("ud"));
  s.schedule.delays = to_vec(j.at("delays"));
  s.sigma_an = to_vec(j.at("sigma_an"));
  s.sigma_ud = j.at("sigma_ud").get<double>();
  s.c = j.at("c").get<double>();
  return s;
}

json measurements_json(const TwoWayMeasurements& m)
{
  return {{"rho", vec(m.rho)},           {"tau", vec(m.tau)},           {"delays", vec(m.delays)},
          {"sigma_an", vec(m.sigma_an)}, {"sigma_ud", m.sigma_ud}};
}

TwoWayMeasurements measurements_from(const json& j)
{
  TwoWayMeasurements m;
  m.rho = to_vec(j.at("rho"));
  m.tau = to_vec(j.at("tau"));
  m.delays = to_vec(j.at("delays"));
  m.sigma_an = to_vec(j.at("sigma_an"));
  m.sigma_ud = j.at("sigma_ud").get<double>();
  return m;
}

json read_json(const std::string& path)
{
  std::ifstream f(path);
  if (!f)
  {
    throw Error("cannot open '" + path + "'");
  }
  try
  {
    return json::parse(f);
  }
  catch (const json::exception& e)
  {
    throw ParseError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text)
{
  if (path.empty() || path == "-")
  {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text))
  {
    throw Error("cannot write '" + path + "'");
  }
}

// options shared by campaign and speed-sweep
struct CampaignArgs
{
  std::string config_path;
  bool print_config = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::vector<double> noise;
  std::vector<double> speeds;
  std::vector<std::string> methods;
  std::optional<int> threads;
  bool timing = false;
  std::string out;
  std::string per_run_dump;
  bool verbose_solver = false;
};

void add_campaign_options(CLI::App* app, CampaignArgs& a, bool sweep)
{
  app->add_option("--config", a.config_path, "key = value config file (see --print-config)");
  app->add_flag("--print-config", a.print_config, "print the effective configuration and exit");
  app->add_option("--seed", a.seed, "master seed; run i uses seed + i");
  app->add_option("--runs", a.runs, "Monte-Carlo runs per cell");
  if (sweep)
  {
    app->add_option("--speeds", a.speeds, "UD speeds, m/s")->delimiter(',');
    app->add_option("--noise", a.noise, "noise std dev of the sweep, meters (one value)")->delimiter(',');
  }
  else
  {
    app->add_option("--noise", a.noise, "noise grid, meters")->delimiter(',');
  }
  app->add_option("--methods", a.methods, "sdp_m, gauss_newton, sdp_stationary")->delimiter(',');
  app->add_option("--threads", a.threads, "worker threads (0: all cores)");
  app->add_flag("--timing", a.timing, "report mean wall time per solve (makes the CSV nondeterministic)");
  app->add_option("--out", a.out, "CSV path (a .summary.txt sidecar is written next to it); stdout if empty");
  app->add_option("--per-run-dump", a.per_run_dump, "write every per-run record to this CSV");
  app->add_flag("--verbose-solver", a.verbose_solver, "print per-cell summaries to stderr while running");
}

CampaignConfig make_config(const CampaignArgs& a, bool sweep)
{
  CampaignConfig c;
  if (sweep)
  {
    c.methods = {Method::SdpM, Method::SdpStationary};
  }
  if (!a.config_path.empty())
  {
    c = load_config(a.config_path, c);
  }
  if (a.seed)
  {
    c.seed = *a.seed;
  }
  if (a.runs)
  {
    c.runs = *a.runs;
  }
  if (!a.noise.empty())
  {
    if (sweep)
    {
      if (a.noise.size() != 1)
      {
        throw ParseError("speed-sweep takes a single --noise value");
      }
      c.sweep_noise = a.noise.front();
    }
    else
    {
      c.noise_grid = a.noise;
    }
  }
  if (!a.speeds.empty())
  {
    c.speeds = a.speeds;
  }
  if (!a.methods.empty())
  {
    c.methods.clear();
    for (const std::string& m : a.methods)
    {
      c.methods.push_back(parse_method(m));
    }
  }
  if (a.threads)
  {
    c.threads = *a.threads;
  }
  c.timing = c.timing || a.timing;
  c.validate();
  return c;
}

int run_campaign_command(const CampaignArgs& a, bool sweep)
{
  const CampaignConfig config = make_config(a, sweep);
  if (a.print_config)
  {
    print_config(config, std::cout);
    return 0;
  }
  const std::vector<CellResult> results = sweep ? run_speed_sweep(config) : run_campaign(config);
  if (a.verbose_solver)
  {
    write_summary(results, std::cerr);
  }
  if (a.out.empty())
  {
    write_csv(results, std::cout);
  }
  else
  {
    emit_results(results, a.out);
  }
  if (!a.per_run_dump.empty())
  {
    std::ostringstream dump;
    write_run_dump(results, dump);
    write_text(a.per_run_dump, dump.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Two-way TOA localization: SDP relaxation, Gauss-Newton baseline, CRLB, Monte-Carlo harness"};
  app.require_subcommand(1);

  // simulate
  auto* simulate_cmd = app.add_subcommand("simulate", "sample one benchmark scene and write a measurement dump (JSON)");
  std::uint64_t sim_seed = 42;
  double sim_noise = 0.1;
  std::optional<double> sim_speed;
  std::string sim_config;
  std::string sim_out;
  simulate_cmd->add_option("--seed", sim_seed, "scene seed (same stream layout as campaign run seeds)");
  simulate_cmd->add_option("--noise", sim_noise, "noise std dev, meters");
  simulate_cmd->add_option("--speed", sim_speed, "fix the UD speed, m/s");
  simulate_cmd->add_option("--config", sim_config, "campaign config supplying the geometry and priors");
  simulate_cmd->add_option("--out", sim_out, "output path (stdout if empty)");

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "solve a measurement dump with one method");
  std::string solve_in;
  std::string solve_method = "sdp_m";
  std::uint64_t solve_init_seed = 0;
  bool solve_verbose = false;
  std::string solve_out;
  solve_cmd->add_option("--in", solve_in, "measurement dump from `simulate`")->required();
  solve_cmd->add_option("--method", solve_method, "sdp_m, gauss_newton or sdp_stationary");
  solve_cmd->add_option("--init-seed", solve_init_seed, "Gauss-Newton random-init seed (default: from the dump seed)");
  solve_cmd->add_flag("--verbose-solver", solve_verbose, "print the interior-point trace to stderr");
  solve_cmd->add_option("--out", solve_out, "output path (stdout if empty)");

  // campaign / speed-sweep
  CampaignArgs campaign_args;
  auto* campaign_cmd = app.add_subcommand("campaign", "success rate and RMSE per noise level");
  add_campaign_options(campaign_cmd, campaign_args, false);
  CampaignArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("speed-sweep", "RMSE against UD speed, moving vs. stationary model");
  add_campaign_options(sweep_cmd, sweep_args, true);

  // crlb
  auto* crlb_cmd = app.add_subcommand("crlb", "CRLB position bound and 3x success threshold of a scene");
  std::string crlb_in;
  crlb_cmd->add_option("--in", crlb_in, "measurement dump from `simulate`")->required();

  // conic-solve
  auto* conic_cmd = app.add_subcommand("conic-solve", "solve a conic program in the sparse text format");
  std::string conic_in;
  bool conic_verbose = false;
  conic_cmd->add_option("--in", conic_in, "program file")->required();
  conic_cmd->add_flag("--verbose-solver", conic_verbose, "print the interior-point trace to stderr");

  CLI11_PARSE(app, argc, argv);

  try
  {
    if (simulate_cmd->parsed())
    {
      CampaignConfig config;
      if (!sim_config.empty())
      {
        config = load_config(sim_config, config);
      }
      config.validate();
      const Scenario scenario = sample_scenario(config, sim_noise, sim_seed, sim_speed);
      const TwoWayMeasurements meas =
          simulate(scenario, derive_seed(sim_seed, static_cast<std::uint64_t>(Stream::Noise)));
      const json out = {
          {"seed", sim_seed}, {"scenario", scenario_json(scenario)}, {"measurements", measurements_json(meas)}};
      write_text(sim_out, out.dump(2) + "\n");
    }
    else if (solve_cmd->parsed())
    {
      const json dump = read_json(solve_in);
      const TwoWayMeasurements meas = measurements_from(dump.at("measurements"));
      const Scenario scenario = scenario_from(dump.at("scenario"));
      const WeightMatrix weights = build_weights(meas);
      const Method method = parse_method(solve_method);
      json out = {{"method", to_string(method)}};
      StateVector estimate;
      if (method == Method::GaussNewton)
      {
        const std::uint64_t seed = solve_cmd->count("--init-seed") > 0
                                       ? solve_init_seed
                                       : derive_seed(dump.value("seed", std::uint64_t{0}),
                                                     static_cast<std::uint64_t>(Stream::GaussNewtonInit));
        const CampaignConfig defaults;
        const GnReport gn =
            gauss_newton(meas, weights, scenario.anchors, random_init({defaults.center, defaults.ud_edge}, seed));
        estimate = gn.estimate;
        out["status"] = to_string(gn.status);
        out["converged"] = gn.converged;
        out["iterations"] = gn.iterations;
        out["final_cost"] = gn.final_cost;
      }
      else
      {
        SdpOptions opt;
        opt.motion = method == Method::SdpM ? MotionModel::Moving : MotionModel::Stationary;
        IpmSettings settings;
        if (solve_verbose)
        {
          settings.trace = &std::cerr;
        }
        const SolveReport rep = solve_sdp(meas, weights, scenario.anchors, opt, settings);
        estimate = rep.estimate;
        out["status"] = to_string(rep.status);
        out["iterations"] = rep.iterations;
        out["duality_gap"] = rep.duality_gap;
        out["rel_gap"] = rep.rel_gap;
        out["primal_infeas"] = rep.primal_infeas;
        out["dual_infeas"] = rep.dual_infeas;
        out["tightness"] = rep.tightness;
        out["wall_time"] = rep.wall_time;
      }
      out["estimate"] = state_json(estimate);
      out["position_error"] = (estimate.p - scenario.ud.p).norm();
      write_text(solve_out, out.dump(2) + "\n");
    }
    else if (campaign_cmd->parsed())
    {
      return run_campaign_command(campaign_args, false);
    }
    else if (sweep_cmd->parsed())
    {
      return run_campaign_command(sweep_args, true);
    }
    else if (crlb_cmd->parsed())
    {
      const Scenario scenario = scenario_from(read_json(crlb_in).at("scenario"));
      const CrlbReport rep = compute_crlb(scenario);
      json fim = json::array();
      for (Eigen::Index i = 0; i < rep.fim.rows(); ++i)
      {
        fim.push_back(vec(rep.fim.row(i).transpose()));
      }
      const json out = {{"pos_rmse_bound", rep.pos_rmse_bound}, {"threshold", rep.threshold}, {"fim", fim}};
      std::cout << out.dump(2) << "\n";
    }
    else if (conic_cmd->parsed())
    {
      std::ifstream f(conic_in);
      if (!f)
      {
        throw Error("cannot open '" + conic_in + "'");
      }
      const ConicProgram program = read_program(f);
      IpmSettings settings;
      if (conic_verbose)
      {
        settings.trace = &std::cerr;
      }
      const IpmResult res = solve(program, settings);
      const json out = {{"status", to_string(res.status)},
                        {"primal_objective", res.primal_objective},
                        {"dual_objective", res.dual_objective},
                        {"rel_gap", res.rel_gap},
                        {"primal_infeas", res.primal_infeas},
                        {"dual_infeas", res.dual_infeas},
                        {"iterations", res.iterations},
                        {"x", vec(res.x)}};
      std::cout << out.dump(2) << "\n";
    }
  }
  catch (const std::exception& e)
  {
    std::cerr << "twtoa: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
