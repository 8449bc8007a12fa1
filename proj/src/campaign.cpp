#include "twtoa/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "twtoa/crlb.hpp"
#include "twtoa/errors.hpp"
#include "twtoa/measurement.hpp"
#include "twtoa/random.hpp"
#include "twtoa/sdp_m.hpp"

namespace twtoa
{

const char* to_string(Method method)
{
  switch (method)
  {
    case Method::SdpM:
      return "sdp_m";
    case Method::GaussNewton:
      return "gauss_newton";
    case Method::SdpStationary:
      return "sdp_stationary";
  }
  return "unknown";
}

Method parse_method(const std::string& name)
{
  for (const Method m : {Method::SdpM, Method::GaussNewton, Method::SdpStationary})
  {
    if (name == to_string(m))
    {
      return m;
    }
  }
  throw ParseError("unknown method '" + name + "' (expected sdp_m, gauss_newton or sdp_stationary)");
}

void CampaignConfig::validate() const
{
  auto require = [](bool ok, const std::string& what) {
    if (!ok)
    {
      throw InvalidScenario("campaign config: " + what);
    }
  };
  auto finite_positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  require(finite_positive(an_edge) && finite_positive(ud_edge), "cube edges must be positive and finite");
  require(center.allFinite(), "center must be finite");
  require(finite_positive(delay_step), "delay_step must be positive");
  require(finite_positive(c), "c must be positive");
  require(std::isfinite(max_offset) && max_offset >= 0.0, "max_offset must be finite and >= 0");
  require(std::isfinite(max_drift) && max_drift >= 0.0, "max_drift must be finite and >= 0");
  require(std::isfinite(max_speed) && max_speed >= 0.0, "max_speed must be finite and >= 0");
  require(!noise_grid.empty(), "noise grid is empty");
  for (const double s : noise_grid)
  {
    require(finite_positive(s), "noise grid entries must be positive");
  }
  for (const double v : speeds)
  {
    require(std::isfinite(v) && v >= 0.0, "speeds must be finite and >= 0");
  }
  require(finite_positive(sweep_noise), "sweep_noise must be positive");
  require(runs >= 1, "runs must be >= 1");
  require(threads >= 0, "threads must be >= 0");
  require(!methods.empty(), "no methods selected");
  twtoa::validate(ipm);
}

Scenario sample_scenario(const CampaignConfig& config, double sigma, std::uint64_t run_seed,
                         std::optional<double> speed)
{
  Rng rng(derive_seed(run_seed, static_cast<std::uint64_t>(Stream::Scenario)));
  Scenario s;
  s.c = config.c;
  const double half = 0.5 * config.an_edge;
  for (int k = 0; k < 8; ++k)
  {
    Eigen::VectorXd q(3);
    q << ((k & 1) ? half : -half), ((k & 2) ? half : -half), ((k & 4) ? half : -half);
    s.anchors.push_back({k + 1, config.center + q});
  }
  s.ud.p.resize(3);
  for (int k = 0; k < 3; ++k)
  {
    s.ud.p(k) = config.center(k) + rng.uniform(-0.5, 0.5) * config.ud_edge;
  }
  const double norm = rng.uniform(0.0, config.max_speed);
  const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double elevation = rng.uniform(-0.5 * std::numbers::pi, 0.5 * std::numbers::pi);
  const double v = speed.value_or(norm);
  s.ud.v.resize(3);
  s.ud.v << v * std::cos(elevation) * std::cos(yaw), v * std::cos(elevation) * std::sin(yaw),
      v * std::sin(elevation);
  s.ud.clock_offset = rng.uniform(0.0, config.max_offset) * config.c;
  s.ud.clock_drift = rng.uniform(-config.max_drift, config.max_drift) * config.c;
  s.schedule.delays.resize(8);
  for (int i = 0; i < 8; ++i)
  {
    s.schedule.delays(i) = config.delay_step * (i + 1);
  }
  s.sigma_an = Eigen::VectorXd::Constant(8, sigma);
  s.sigma_ud = sigma;
  return s;
}

MethodStats aggregate(Method method, const std::vector<RunRecord>& records, bool timing)
{
  MethodStats st;
  st.method = method;
  double sum_sq = 0.0;
  double sum_sq_success = 0.0;
  double sum_ms = 0.0;
  for (const RunRecord& r : records)
  {
    if (r.method != method)
    {
      continue;
    }
    ++st.runs;
    sum_ms += r.wall_ms;
    if (r.converged)
    {
      ++st.converged;
    }
    if (std::isnan(r.error))
    {
      ++st.errors;
      continue;
    }
    sum_sq += r.error * r.error;
    if (r.success)
    {
      ++st.successes;
      sum_sq_success += r.error * r.error;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const int scored = st.runs - st.errors;
  st.success_rate = st.runs > 0 ? static_cast<double>(st.successes) / st.runs : nan;
  st.rmse_all = scored > 0 ? std::sqrt(sum_sq / scored) : nan;
  st.rmse_success = st.successes > 0 ? std::sqrt(sum_sq_success / st.successes) : nan;
  st.mean_ms = timing && st.runs > 0 ? sum_ms / st.runs : nan;
  return st;
}

namespace
{

RunRecord run_method(const CampaignConfig& config, Method method, const Scenario& scenario,
                     const TwoWayMeasurements& meas, const WeightMatrix& weights, std::uint64_t run_seed)
{
  RunRecord rec;
  rec.method = method;
  const auto start = std::chrono::steady_clock::now();
  try
  {
    Eigen::VectorXd p_hat;
    if (method == Method::GaussNewton)
    {
      const Cube cube{config.center, config.ud_edge};
      const StateVector init =
          random_init(cube, derive_seed(run_seed, static_cast<std::uint64_t>(Stream::GaussNewtonInit)));
      const GnReport gn = gauss_newton(meas, weights, scenario.anchors, init, config.gn);
      p_hat = gn.estimate.p;
      rec.converged = gn.converged;
      rec.status = to_string(gn.status);
    }
    else
    {
      SdpOptions opt;
      opt.motion = method == Method::SdpM ? MotionModel::Moving : MotionModel::Stationary;
      const SolveReport rep = solve_sdp(meas, weights, scenario.anchors, opt, config.ipm);
      p_hat = rep.estimate.p;
      rec.converged = rep.status == SolveStatus::Optimal;
      rec.status = to_string(rep.status);
    }
    rec.error = (p_hat - scenario.ud.p).norm();
    // a diverged iterate can carry non-finite entries; that is a plain failure
    if (!std::isfinite(rec.error))
    {
      rec.error = std::numeric_limits<double>::infinity();
    }
  }
  catch (const Error& e)
  {
    rec.error = std::numeric_limits<double>::quiet_NaN();
    rec.status = std::string("error: ") + e.what();
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<RunRecord> run_one(const CampaignConfig& config, double sigma, std::optional<double> speed, int run)
{
  const std::uint64_t run_seed = config.seed + static_cast<std::uint64_t>(run);
  const Scenario scenario = sample_scenario(config, sigma, run_seed, speed);
  const TwoWayMeasurements meas =
      simulate(scenario, derive_seed(run_seed, static_cast<std::uint64_t>(Stream::Noise)));
  const WeightMatrix weights = build_weights(meas);
  double bound = std::numeric_limits<double>::quiet_NaN();
  double threshold = std::numeric_limits<double>::quiet_NaN();
  try
  {
    const CrlbReport crlb = compute_crlb(scenario);
    bound = crlb.pos_rmse_bound;
    threshold = crlb.threshold;
  }
  catch (const UnobservableGeometry&)
  {
    // no threshold: every method scores as a failure in this run
  }

  std::vector<RunRecord> out;
  for (const Method method : config.methods)
  {
    RunRecord rec = run_method(config, method, scenario, meas, weights, run_seed);
    rec.run = run;
    rec.seed = run_seed;
    rec.crlb_bound = bound;
    rec.threshold = threshold;
    rec.success = !std::isnan(rec.error) && rec.error <= threshold;
    out.push_back(std::move(rec));
  }
  return out;
}

CellResult run_cell(const CampaignConfig& config, const std::string& label, double value, double sigma,
                    std::optional<double> speed)
{
  std::vector<std::vector<RunRecord>> per_run(config.runs);
  const int workers = std::max(
      1, std::min(config.runs, config.threads > 0 ? config.threads
                                                  : static_cast<int>(std::thread::hardware_concurrency())));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (int run = next++; run < config.runs; run = next++)
    {
      try
      {
        per_run[run] = run_one(config, sigma, speed, run);
      }
      catch (...)
      {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure)
        {
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t)
  {
    pool.emplace_back(work);
  }
  work();
  for (std::thread& t : pool)
  {
    t.join();
  }
  if (failure)
  {
    std::rethrow_exception(failure);
  }

  CellResult cell;
  cell.label = label;
  cell.value = value;
  cell.seed = config.seed;
  double sum_bound_sq = 0.0;
  for (const auto& recs : per_run)
  {
    for (const RunRecord& r : recs)
    {
      cell.records.push_back(r);
    }
    sum_bound_sq += recs.front().crlb_bound * recs.front().crlb_bound;
  }
  cell.crlb_rmse = std::sqrt(sum_bound_sq / config.runs);
  for (const Method method : config.methods)
  {
    cell.methods.push_back(aggregate(method, cell.records, config.timing));
  }
  return cell;
}

std::string format_double(double x)
{
  if (std::isnan(x))
  {
    return "NA";
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string cell_label(const char* key, double value)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s=%g", key, value);
  return buf;
}

}  // namespace

std::vector<CellResult> run_campaign(const CampaignConfig& config)
{
  config.validate();
  std::vector<CellResult> out;
  for (const double sigma : config.noise_grid)
  {
    out.push_back(run_cell(config, cell_label("sigma", sigma), sigma, sigma, std::nullopt));
  }
  return out;
}

std::vector<CellResult> run_speed_sweep(const CampaignConfig& config)
{
  config.validate();
  std::vector<CellResult> out;
  for (const double speed : config.speeds)
  {
    out.push_back(run_cell(config, cell_label("speed", speed), speed, config.sweep_noise, speed));
  }
  return out;
}

void write_csv(const std::vector<CellResult>& results, std::ostream& out)
{
  out << kCsvHeader << "\n";
  for (const CellResult& cell : results)
  {
    for (const MethodStats& m : cell.methods)
    {
      out << cell.label << "," << to_string(m.method) << "," << m.runs << "," << format_double(m.success_rate) << ","
          << format_double(m.rmse_all) << "," << format_double(m.rmse_success) << ","
          << format_double(cell.crlb_rmse) << "," << format_double(m.mean_ms) << "," << cell.seed << "\n";
    }
  }
}

void write_summary(const std::vector<CellResult>& results, std::ostream& out)
{
  if (results.empty())
  {
    out << "(no cells)\n";
    return;
  }
  // success = error within 3x the per-run CRLB position bound; "conv" counts solver-level
  // convergence separately (SDP status optimal, Gauss-Newton tolerance stop)
  out << std::left << std::setw(14) << "cell";
  for (const MethodStats& m : results.front().methods)
  {
    out << std::setw(22) << (std::string(to_string(m.method)) + " succ%") << std::setw(12) << "conv%";
  }
  out << std::setw(12) << "crlb_rmse" << "\n";
  for (const CellResult& cell : results)
  {
    out << std::setw(14) << cell.label;
    for (const MethodStats& m : cell.methods)
    {
      char succ[32];
      char conv[32];
      std::snprintf(succ, sizeof(succ), "%.2f", 100.0 * m.success_rate);
      std::snprintf(conv, sizeof(conv), "%.2f", m.runs > 0 ? 100.0 * m.converged / m.runs : 0.0);
      out << std::setw(22) << succ << std::setw(12) << conv;
    }
    char crlb[32];
    std::snprintf(crlb, sizeof(crlb), "%.4g", cell.crlb_rmse);
    out << std::setw(12) << crlb << "\n";
  }
  out << "runs per cell: " << results.front().methods.front().runs << ", seed: " << results.front().seed << "\n";
}

void write_run_dump(const std::vector<CellResult>& results, std::ostream& out)
{
  out << "cell,run,seed,method,error,threshold,crlb_bound,success,converged,status,wall_ms\n";
  for (const CellResult& cell : results)
  {
    for (const RunRecord& r : cell.records)
    {
      std::string status = r.status;
      std::replace(status.begin(), status.end(), ',', ';');
      out << cell.label << "," << r.run << "," << r.seed << "," << to_string(r.method) << ","
          << format_double(r.error) << "," << format_double(r.threshold) << "," << format_double(r.crlb_bound)
          << "," << (r.success ? 1 : 0) << "," << (r.converged ? 1 : 0) << "," << status << ","
          << format_double(r.wall_ms) << "\n";
    }
  }
}

void emit_results(const std::vector<CellResult>& results, const std::string& path)
{
  auto open = [](const std::string& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f)
    {
      throw Error("cannot open '" + p + "' for writing");
    }
    return f;
  };
  {
    std::ofstream f = open(path);
    write_csv(results, f);
    if (!f)
    {
      throw Error("write failed for '" + path + "'");
    }
  }
  const std::string sidecar = path + ".summary.txt";
  std::ofstream f = open(sidecar);
  write_summary(results, f);
  if (!f)
  {
    throw Error("write failed for '" + sidecar + "'");
  }
}

std::vector<CsvRow> parse_csv(std::istream& in)
{
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
  {
    throw ParseError("missing or unexpected CSV header");
  }
  auto number = [](const std::string& field, int line_no) {
    if (field == "NA")
    {
      return std::numeric_limits<double>::quiet_NaN();
    }
    try
    {
      std::size_t used = 0;
      const double v = std::stod(field, &used);
      if (used != field.size())
      {
        throw ParseError("");
      }
      return v;
    }
    catch (const std::exception&)
    {
      throw ParseError("line " + std::to_string(line_no) + ": bad number '" + field + "'");
    }
  };
  std::vector<CsvRow> rows;
  int line_no = 1;
  while (std::getline(in, line))
  {
    ++line_no;
    if (line.empty())
    {
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ','))
    {
      f.push_back(field);
    }
    if (f.size() != 9)
    {
      throw ParseError("line " + std::to_string(line_no) + ": expected 9 fields, got " + std::to_string(f.size()));
    }
    CsvRow row;
    row.cell = f[0];
    row.method = f[1];
    try
    {
      row.runs = std::stoi(f[2]);
      row.seed = std::stoull(f[8]);
    }
    catch (const std::exception&)
    {
      throw ParseError("line " + std::to_string(line_no) + ": bad integer field");
    }
    row.success_rate = number(f[3], line_no);
    row.rmse_all = number(f[4], line_no);
    row.rmse_success = number(f[5], line_no);
    row.crlb_rmse = number(f[6], line_no);
    row.mean_ms = number(f[7], line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace twtoa
