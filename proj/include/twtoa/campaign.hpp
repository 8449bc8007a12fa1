#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "twtoa/conic_solver.hpp"
#include "twtoa/gauss_newton.hpp"
#include "twtoa/model.hpp"

namespace twtoa
{

enum class Method
{
  SdpM,
  GaussNewton,
  SdpStationary,
};

const char* to_string(Method method);
/// Accepts "sdp_m", "gauss_newton", "sdp_stationary"; throws ParseError otherwise.
Method parse_method(const std::string& name);

struct CampaignConfig
{
  // geometry: anchors on the vertices of a cube, UD uniform in a concentric cube
  double an_edge = 600.0;  // meters
  double ud_edge = 700.0;  // meters, also the Gauss-Newton initialization cube
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double delay_step = 0.01;  // anchor i (1-based) replies at delay_step * i, seconds
  double c = kSpeedOfLight;
  // clock and motion priors
  double max_offset = 20e-6;  // b ~ U(0, max_offset) seconds
  double max_drift = 10e-6;   // w ~ U(-max_drift, max_drift)
  double max_speed = 60.0;    // ||v|| ~ U(0, max_speed) m/s
  // campaign
  std::vector<double> noise_grid{0.10, 0.46, 2.15, 10.00};  // meters
  std::vector<double> speeds{0.0, 15.0, 30.0, 45.0, 60.0};  // m/s, speed sweep only
  double sweep_noise = 0.1;                                  // meters, speed sweep only
  int runs = 500;
  std::uint64_t seed = 42;
  std::vector<Method> methods{Method::SdpM, Method::GaussNewton};
  int threads = 0;     // 0: hardware concurrency
  bool timing = false;  // wall times are nondeterministic, so they stay out of the CSV unless asked for
  IpmSettings ipm;
  GnSettings gn;

  /// Throws InvalidScenario on a violated invariant.
  void validate() const;
};

/// Sub-streams of a per-run seed.
enum class Stream : std::uint64_t
{
  Scenario = 1,
  Noise = 2,
  GaussNewtonInit = 3,
};

/// Benchmark scene for one run (8 cube-vertex anchors, UD in a concentric cube). With `speed` set, ||v|| is fixed and only the
/// direction is random.
Scenario sample_scenario(const CampaignConfig& config, double sigma, std::uint64_t run_seed,
                         std::optional<double> speed = std::nullopt);

struct RunRecord
{
  int run = 0;
  std::uint64_t seed = 0;
  Method method = Method::SdpM;
  double error = 0.0;          // ||p_hat - p||, meters; NaN when the method threw
  double threshold = 0.0;      // 3x CRLB position bound of this run
  double crlb_bound = 0.0;     // CRLB position RMSE bound of this run
  bool success = false;
  bool converged = false;      // solver-level: SDP status Optimal / GN tolerance stop
  std::string status;
  double wall_ms = 0.0;
};

struct MethodStats
{
  Method method = Method::SdpM;
  int runs = 0;
  int successes = 0;
  int converged = 0;
  int errors = 0;  // runs in which the method threw; failures, excluded from the RMSEs
  double success_rate = 0.0;
  double rmse_all = 0.0;
  double rmse_success = 0.0;  // NaN when there are no successes
  double mean_ms = 0.0;       // NaN unless timing was requested
};

struct CellResult
{
  std::string label;  // "sigma=0.1" or "speed=15"
  double value = 0.0;
  double crlb_rmse = 0.0;  // sqrt of the mean squared per-run CRLB bound
  std::uint64_t seed = 0;
  std::vector<MethodStats> methods;
  std::vector<RunRecord> records;  // ordered by run, then method
};

/// Exact reduction of the per-run records of one method.
MethodStats aggregate(Method method, const std::vector<RunRecord>& records, bool timing);

/// One cell per noise level.
std::vector<CellResult> run_campaign(const CampaignConfig& config);

/// One cell per speed at config.sweep_noise.
std::vector<CellResult> run_speed_sweep(const CampaignConfig& config);

inline constexpr const char* kCsvHeader = "cell,method,runs,success_rate,rmse_all,rmse_success,crlb_rmse,mean_ms,seed";

void write_csv(const std::vector<CellResult>& results, std::ostream& out);
/// Plain-text table: one row per cell, success rate and solver convergence per method.
void write_summary(const std::vector<CellResult>& results, std::ostream& out);
/// Per-run records, one CSV line each.
void write_run_dump(const std::vector<CellResult>& results, std::ostream& out);

/// CSV + `<path>.summary.txt` sidecar. Throws Error with the path on IO failure.
void emit_results(const std::vector<CellResult>& results, const std::string& path);

/// One data row of the CSV.
struct CsvRow
{
  std::string cell;
  std::string method;
  int runs = 0;
  double success_rate = 0.0;
  double rmse_all = 0.0;
  double rmse_success = 0.0;
  double crlb_rmse = 0.0;
  double mean_ms = 0.0;
  std::uint64_t seed = 0;
};

/// Parses what write_csv emits ("NA" reads back as NaN). Throws ParseError.
std::vector<CsvRow> parse_csv(std::istream& in);

}  // namespace twtoa
