#include "twtoa/sdp_m.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "twtoa/errors.hpp"

namespace twtoa
{

const char* to_string(SolveStatus status)
{
  switch (status)
  {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::MaxIter:
      return "max_iter";
    case SolveStatus::NumericalFailure:
      return "numerical_failure";
    case SolveStatus::Infeasible:
      return "infeasible";
  }
  return "unknown";
}

Eigen::MatrixXd build_A(const Eigen::VectorXd& delays)
{
  const Eigen::Index m = delays.size();
  if (m < 1)
  {
    throw DimensionMismatch("need at least one anchor");
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * m, 2 * m + 2);
  a.topLeftCorner(m, m).setIdentity();
  a.block(0, 2 * m, m, 1).setConstant(-1.0);
  a.block(m, m, m, m).setIdentity();
  a.block(m, 2 * m, m, 1).setConstant(1.0);
  a.block(m, 2 * m + 1, m, 1) = delays;
  return a;
}

std::pair<GLinearRow, GLinearRow> stationarity_constraints(const TwoWayMeasurements& measurements,
                                                           const WeightMatrix& weights, const Eigen::MatrixXd& a)
{
  const Eigen::Index m = measurements.size();
  if (a.rows() != 2 * m || a.cols() != 2 * m + 2 || weights.size() != 2 * m || measurements.tau.size() != m ||
      measurements.delays.size() != m)
  {
    throw DimensionMismatch("stationarity constraints: inconsistent dimensions");
  }
  const auto a_rho = a.topRows(m);
  const auto a_tau = a.bottomRows(m);
  const Eigen::VectorXd w_rho = weights.request();
  const Eigen::VectorXd w_tau = weights.response();

  GLinearRow offset_row;
  offset_row.coeffs = a_rho.transpose() * w_rho - a_tau.transpose() * w_tau;
  offset_row.rhs = measurements.rho.dot(w_rho) - measurements.tau.dot(w_tau);

  const Eigen::VectorXd w_lambda = w_tau.cwiseProduct(measurements.delays);
  GLinearRow drift_row;
  drift_row.coeffs = a_tau.transpose() * w_lambda;
  drift_row.rhs = measurements.tau.dot(w_lambda);
  return {offset_row, drift_row};
}

Eigen::MatrixXd SdpProblem::lifted_matrix(const Eigen::VectorXd& x) const
{
  return lifted_basis * program.psd_block(x, vars.lifted_block) * lifted_basis.transpose();
}

double SdpProblem::g_value(const Eigen::VectorXd& x, int k) const
{
  const int last = vars.lifted_order() - 1;
  return options.length_scale * lifted_basis.row(k).dot(program.psd_block(x, vars.lifted_block).col(last));
}

double SdpProblem::lifted_cost(const Eigen::VectorXd& x) const
{
  return weight_unit * program.objective().dot(x);
}

double SdpProblem::objective_value(const Eigen::VectorXd& x) const
{
  return lifted_cost(x) - gamma_weighted_norm;
}

namespace
{

ConeLayout make_layout(int n, int m, const SdpOptions& options, SdpVariables& vars)
{
  vars.dim = n;
  vars.num_anchors = m;
  int next = 0;
  for (int k = 0; k < n; ++k)
  {
    vars.p.push_back(next++);
  }
  for (int k = 0; k < n; ++k)
  {
    vars.v.push_back(next++);
  }
  vars.y = next++;
  vars.f = next++;
  vars.psi = next++;
  for (int i = 0; i < m; ++i)
  {
    vars.z.push_back(next++);
  }
  vars.clock_offset = next++;
  vars.clock_drift = next++;

  ConeLayout layout;
  layout.n_free = next;
  const int ranges = options.nonneg_all_ranges ? 2 * m : m;
  for (int k = 0; k < ranges; ++k)
  {
    vars.range_nonneg.push_back(layout.n_free + k);
  }
  layout.n_nonneg = ranges;
  if (options.bound_lifted)
  {
    vars.y_slack = layout.n_free + layout.n_nonneg++;
    if (options.motion == MotionModel::Moving)
    {
      vars.f_slack = layout.n_free + layout.n_nonneg++;
    }
  }
  layout.psd_orders = {2 * m + 3, n + 1};
  vars.lifted_block = 0;
  vars.position_block = 1;
  if (options.motion == MotionModel::Moving)
  {
    layout.psd_orders.push_back(n + 1);
    layout.psd_orders.push_back(n + 1);
    vars.velocity_block = 2;
    vars.cross_block = 3;
  }
  return layout;
}

// [I_N u; u^T w] with the vector column tied to `vec_terms` and the corner to `corner_terms`.
void add_identity_block(ConicProgram& program, int block, int n, const std::vector<std::vector<int>>& vec_terms,
                        const std::vector<int>& corner_terms, const std::string& name)
{
  for (int j = 0; j < n; ++j)
  {
    for (int i = j; i < n; ++i)
    {
      program.add_equality(
          {{program.psd_term(block, i, j, 1.0)}, i == j ? 1.0 : 0.0, name + " identity"});
    }
  }
  for (int k = 0; k < n; ++k)
  {
    LinearRow row{{program.psd_term(block, n, k, 1.0)}, 0.0, name + " vector"};
    for (int idx : vec_terms[k])
    {
      row.terms.push_back({idx, -1.0});
    }
    program.add_equality(std::move(row));
  }
  LinearRow corner{{program.psd_term(block, n, n, 1.0)}, 0.0, name + " corner"};
  for (int idx : corner_terms)
  {
    corner.terms.push_back({idx, -1.0});
  }
  program.add_equality(std::move(corner));
}

}  // namespace

SdpProblem build_sdp(const TwoWayMeasurements& measurements, const WeightMatrix& weights,
                     const std::vector<Anchor>& anchors, const SdpOptions& options)
{
  const int m = measurements.size();
  if (anchors.empty() || static_cast<int>(anchors.size()) != m || measurements.tau.size() != m ||
      measurements.delays.size() != m || weights.size() != 2 * m)
  {
    throw DimensionMismatch("SDP builder: anchors, measurements and weights disagree in size");
  }
  const int n = static_cast<int>(anchors.front().q.size());
  for (const auto& a : anchors)
  {
    if (a.q.size() != n)
    {
      throw DimensionMismatch("SDP builder: anchors of mixed dimension");
    }
  }
  if (2 * m < 2 * n + 2)
  {
    throw DimensionMismatch("SDP builder: need at least " + std::to_string(n + 1) + " anchors");
  }
  if (!(options.length_scale > 0.0))
  {
    throw DimensionMismatch("SDP builder: length scale must be positive");
  }

  SdpProblem problem;
  problem.options = options;
  problem.delays = measurements.delays;
  problem.program = ConicProgram(make_layout(n, m, options, problem.vars));
  auto& prog = problem.program;
  const auto& vars = problem.vars;

  const double scale = options.length_scale;
  problem.origin = Eigen::VectorXd::Zero(n);
  if (options.center_on_anchors)
  {
    problem.origin = anchor_matrix(anchors).rowwise().mean();
  }

  // scaled data; the weights absorb scale^2 so objective values are unchanged
  Eigen::MatrixXd q(n, m);
  for (int i = 0; i < m; ++i)
  {
    q.col(i) = (anchors[i].q - problem.origin) / scale;
  }
  TwoWayMeasurements scaled = measurements;
  scaled.rho /= scale;
  scaled.tau /= scale;
  WeightMatrix w = weights;
  problem.weight_unit = weights.diag.maxCoeff();
  w.diag *= scale * scale / problem.weight_unit;
  const Eigen::VectorXd& dt = measurements.delays;

  const Eigen::MatrixXd a = build_A(dt);
  const int order = vars.lifted_order();
  const int last = order - 1;
  const int r = vars.g_size();
  const int s1 = vars.lifted_block;
  const Eigen::VectorXd gamma = scaled.stacked();
  problem.gamma = gamma;
  problem.scaled_weights = w.diag;
  problem.gamma_weighted_norm = problem.weight_unit * gamma.dot(w.diag.cwiseProduct(gamma));

  // S1 = [G g; g^T 1] is stored as T S T^T with
  //   T = [A^+ W^{-1/2}, offset, drift, A^+ gamma; 0, 0, 0, 1],
  // so the first 2M coordinates of S are the whitened residuals W^{1/2} (A g - gamma),
  // the next two span null(A) and the last is the pinned one. The cost is then the
  // trace of the residual block instead of a near-cancelling quadratic form, and every
  // residual coordinate lives on the same scale. Congruence preserves semidefiniteness:
  // same relaxation.
  Eigen::MatrixXd& t = problem.lifted_basis;
  t = Eigen::MatrixXd::Zero(order, order);
  const Eigen::MatrixXd pinv = a.transpose() * (a * a.transpose()).llt().solve(Eigen::MatrixXd::Identity(2 * m, 2 * m));
  const Eigen::VectorXd col_scale = w.diag.cwiseSqrt().cwiseInverse();
  t.topLeftCorner(r, 2 * m) = pinv * col_scale.asDiagonal();
  t.block(0, 2 * m, m, 1).setOnes();
  t.block(m, 2 * m, m, 1).setConstant(-1.0);
  t(2 * m, 2 * m) = 1.0;
  t.block(m, 2 * m + 1, m, 1) = -dt;
  t(2 * m + 1, 2 * m + 1) = 1.0;
  t.block(0, last, r, 1) = pinv * gamma;
  t(last, last) = 1.0;

  // coeff * (T S T^T)_jk as terms over S
  auto entry_terms = [&](int j, int k, double coeff, std::vector<Term>& terms) {
    for (int b = 0; b < order; ++b)
    {
      for (int aa = b; aa < order; ++aa)
      {
        const double v = aa == b ? t(j, aa) * t(k, aa) : t(j, aa) * t(k, b) + t(j, b) * t(k, aa);
        if (v != 0.0)
        {
          terms.push_back(prog.psd_term(s1, aa, b, coeff * v));
        }
      }
    }
  };
  // g_k = (T S T^T)_{k,last} = sum_j T_kj S_{j,last}, since row `last` of T is e_last
  auto g_terms = [&](int k, std::vector<Term>& terms) {
    for (int j = 0; j < order; ++j)
    {
      if (t(k, j) != 0.0)
      {
        terms.push_back(prog.psd_term(s1, last, j, t(k, j)));
      }
    }
  };

  // objective: tr(W (A G A^T - 2 A g gamma^T)) + gamma^T W gamma = sum_i S_ii over the
  // residual coordinates (w_i col_scale_i^2 = 1, kept explicit for clarity)
  Eigen::VectorXd c = Eigen::VectorXd::Zero(prog.num_vars());
  for (int i = 0; i < 2 * m; ++i)
  {
    c(prog.psd_index(s1, i, i)) = w.diag(i) * col_scale(i) * col_scale(i);
  }
  prog.set_objective(c);

  // stationarity in clock offset and drift. With A g - gamma = W^{-1/2} S(0:2M, last)
  // both rows reduce to weighted sums of residuals:
  //   w_rho . r_rho - w_tau . r_tau = 0,   (w_tau o delays) . r_tau = 0
  {
    LinearRow offset{{}, 0.0, "stationarity offset"};
    LinearRow drift{{}, 0.0, "stationarity drift"};
    for (int i = 0; i < m; ++i)
    {
      offset.terms.push_back(prog.psd_term(s1, last, i, w.diag(i) * col_scale(i)));
      offset.terms.push_back(prog.psd_term(s1, last, m + i, -w.diag(m + i) * col_scale(m + i)));
      drift.terms.push_back(prog.psd_term(s1, last, m + i, w.diag(m + i) * dt(i) * col_scale(m + i)));
    }
    prog.add_equality(std::move(offset));
    prog.add_equality(std::move(drift));
  }

  // diagonal of G: squared ranges, linear in the lifted variables
  for (int i = 0; i < m; ++i)
  {
    LinearRow row{{}, q.col(i).squaredNorm(), "G diag request"};
    entry_terms(i, i, 1.0, row.terms);
    for (int k = 0; k < n; ++k)
    {
      row.terms.push_back({vars.p[k], 2.0 * q(k, i)});
    }
    row.terms.push_back({vars.y, -1.0});
    prog.add_equality(std::move(row));
  }
  for (int i = 0; i < m; ++i)
  {
    LinearRow row{{}, q.col(i).squaredNorm(), "G diag response"};
    entry_terms(m + i, m + i, 1.0, row.terms);
    for (int k = 0; k < n; ++k)
    {
      row.terms.push_back({vars.p[k], 2.0 * q(k, i)});
      row.terms.push_back({vars.v[k], 2.0 * q(k, i) * dt(i)});
    }
    row.terms.push_back({vars.z[i], -1.0});
    prog.add_equality(std::move(row));
  }

  // z_i = y + psi dt_i + f dt_i^2
  for (int i = 0; i < m; ++i)
  {
    prog.add_equality(
        {{{vars.z[i], 1.0}, {vars.y, -1.0}, {vars.psi, -dt(i)}, {vars.f, -dt(i) * dt(i)}}, 0.0, "z linkage"});
  }

  {
    prog.add_equality({{prog.psd_term(s1, last, last, 1.0)}, 1.0, "lifted corner"});
  }
  auto g_link = [&](int k, int free_index, const char* label) {
    LinearRow row{{}, 0.0, label};
    g_terms(k, row.terms);
    row.terms.push_back({free_index, -1.0});
    prog.add_equality(std::move(row));
  };
  for (std::size_t k = 0; k < vars.range_nonneg.size(); ++k)
  {
    g_link(static_cast<int>(k), vars.range_nonneg[k], "range sign");
  }
  g_link(2 * m, vars.clock_offset, "clock offset link");
  g_link(2 * m + 1, vars.clock_drift, "clock drift link");

  if (options.bound_lifted)
  {
    // y <= y_max, f <= f_max: hold for every state in range of the anchors and under
    // the speed limit, so the optimal positions are untouched
    double reach = 0.0;
    for (int i = 0; i < m; ++i)
    {
      reach = std::max(reach, q.col(i).norm() + std::max(scaled.rho(i), 0.0));
    }
    problem.y_max = std::pow(options.bound_factor * reach, 2);
    prog.add_equality({{{vars.y, 1.0}, {vars.y_slack, 1.0}}, problem.y_max, "y bound"});
    if (vars.f_slack >= 0)
    {
      problem.f_max = std::pow(options.bound_factor * options.max_speed / scale, 2);
      prog.add_equality({{{vars.f, 1.0}, {vars.f_slack, 1.0}}, problem.f_max, "f bound"});
    }
  }

  std::vector<std::vector<int>> p_terms;
  std::vector<std::vector<int>> v_terms;
  std::vector<std::vector<int>> pv_terms;
  for (int k = 0; k < n; ++k)
  {
    p_terms.push_back({vars.p[k]});
    v_terms.push_back({vars.v[k]});
    pv_terms.push_back({vars.p[k], vars.v[k]});
  }
  add_identity_block(prog, vars.position_block, n, p_terms, {vars.y}, "position block");
  if (options.motion == MotionModel::Moving)
  {
    add_identity_block(prog, vars.velocity_block, n, v_terms, {vars.f}, "velocity block");
    add_identity_block(prog, vars.cross_block, n, pv_terms, {vars.y, vars.f, vars.psi}, "cross block");
  }
  else
  {
    for (int k = 0; k < n; ++k)
    {
      prog.add_equality({{{vars.v[k], 1.0}}, 0.0, "stationary velocity"});
    }
    prog.add_equality({{{vars.f, 1.0}}, 0.0, "stationary f"});
    prog.add_equality({{{vars.psi, 1.0}}, 0.0, "stationary psi"});
  }
  return problem;
}

Eigen::VectorXd lifted_assignment(const SdpProblem& problem, const StateVector& state,
                                  const std::vector<Anchor>& anchors)
{
  const auto& vars = problem.vars;
  const auto& prog = problem.program;
  const int n = vars.dim;
  const int m = vars.num_anchors;
  if (state.dim() != n || static_cast<int>(anchors.size()) != m)
  {
    throw DimensionMismatch("lifted assignment: state or anchors do not match the program");
  }
  const double scale = problem.options.length_scale;
  const Eigen::VectorXd p = (state.p - problem.origin) / scale;
  const Eigen::VectorXd v = state.v / scale;
  const Eigen::VectorXd& dt = problem.delays;

  Eigen::VectorXd g(vars.g_size());
  for (int i = 0; i < m; ++i)
  {
    const Eigen::VectorXd q = (anchors[i].q - problem.origin) / scale;
    g(i) = (q - p).norm();
    g(m + i) = (q - p - v * dt(i)).norm();
  }
  g(2 * m) = state.clock_offset / scale;
  g(2 * m + 1) = state.clock_drift / scale;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(prog.num_vars());
  for (int k = 0; k < n; ++k)
  {
    x(vars.p[k]) = p(k);
    x(vars.v[k]) = v(k);
  }
  x(vars.y) = p.squaredNorm();
  x(vars.f) = v.squaredNorm();
  x(vars.psi) = 2.0 * p.dot(v);
  for (int i = 0; i < m; ++i)
  {
    x(vars.z[i]) = (p + v * dt(i)).squaredNorm();
  }
  x(vars.clock_offset) = g(2 * m);
  x(vars.clock_drift) = g(2 * m + 1);
  for (std::size_t k = 0; k < vars.range_nonneg.size(); ++k)
  {
    x(vars.range_nonneg[k]) = g(static_cast<Eigen::Index>(k));
  }
  if (vars.y_slack >= 0)
  {
    x(vars.y_slack) = problem.y_max - x(vars.y);
  }
  if (vars.f_slack >= 0)
  {
    x(vars.f_slack) = problem.f_max - x(vars.f);
  }

  auto put_block = [&](int block, const Eigen::MatrixXd& mat) {
    x.segment(prog.layout().psd_offset(block), svec_size(static_cast<int>(mat.rows()))) = svec(mat);
  };
  Eigen::VectorXd g1(vars.lifted_order());
  g1 << g, 1.0;
  const Eigen::VectorXd coords = problem.lifted_basis.partialPivLu().solve(g1);
  put_block(vars.lifted_block, coords * coords.transpose());

  auto identity_block = [&](const Eigen::VectorXd& u, double corner) {
    Eigen::MatrixXd blk = Eigen::MatrixXd::Identity(n + 1, n + 1);
    blk.block(n, 0, 1, n) = u.transpose();
    blk.block(0, n, n, 1) = u;
    blk(n, n) = corner;
    return blk;
  };
  put_block(vars.position_block, identity_block(p, x(vars.y)));
  if (vars.velocity_block >= 0)
  {
    put_block(vars.velocity_block, identity_block(v, x(vars.f)));
    put_block(vars.cross_block, identity_block(p + v, x(vars.y) + x(vars.f) + x(vars.psi)));
  }
  return x;
}

SolveReport extract_solution(const SdpProblem& problem, const IpmResult& result)
{
  const auto& vars = problem.vars;
  const int n = vars.dim;
  const int m = vars.num_anchors;
  const double scale = problem.options.length_scale;
  if (result.x.size() != problem.program.num_vars())
  {
    throw DimensionMismatch("solver output does not match the program");
  }

  SolveReport report;
  report.estimate.p.resize(n);
  report.estimate.v.resize(n);
  for (int k = 0; k < n; ++k)
  {
    report.estimate.p(k) = problem.origin(k) + scale * result.x(vars.p[k]);
    report.estimate.v(k) = scale * result.x(vars.v[k]);
  }
  report.estimate.clock_offset = problem.g_value(result.x, 2 * m);
  report.estimate.clock_drift = problem.g_value(result.x, 2 * m + 1);

  switch (result.status)
  {
    case IpmStatus::Optimal:
      report.status = SolveStatus::Optimal;
      break;
    case IpmStatus::MaxIter:
      report.status = SolveStatus::MaxIter;
      break;
    case IpmStatus::NumericalFailure:
      report.status = SolveStatus::NumericalFailure;
      break;
    case IpmStatus::Infeasible:
      report.status = SolveStatus::Infeasible;
      break;
  }
  report.duality_gap = result.primal_objective - result.dual_objective;
  report.rel_gap = result.rel_gap;
  report.primal_infeas = result.primal_infeas;
  report.dual_infeas = result.dual_infeas;
  report.iterations = result.iterations;
  report.wall_time = result.wall_time;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(problem.lifted_matrix(result.x), Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();  // ascending
  const double top = ev(ev.size() - 1);
  report.tightness = top > 0.0 ? std::clamp(ev(ev.size() - 2) / top, 0.0, 1.0) : 1.0;
  return report;
}

SolveReport solve_sdp(const TwoWayMeasurements& measurements, const WeightMatrix& weights,
                      const std::vector<Anchor>& anchors, const SdpOptions& options, const IpmSettings& settings)
{
  const SdpProblem problem = build_sdp(measurements, weights, anchors, options);
  return extract_solution(problem, solve(problem.program, settings));
}

}  // namespace twtoa
