#include "twtoa/conic_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>

#include "twtoa/errors.hpp"

namespace twtoa
{

void validate(const IpmSettings& settings)
{
  if (settings.max_iter < 1)
  {
    throw std::invalid_argument("max_iter must be positive");
  }
  if (!(settings.tol_gap > 0.0 && settings.tol_gap <= 1e-2) || !(settings.tol_feas > 0.0 && settings.tol_feas <= 1e-2))
  {
    throw std::invalid_argument("tolerances must lie in (0, 1e-2]");
  }
  if (!(settings.step_fraction > 0.0 && settings.step_fraction < 1.0))
  {
    throw std::invalid_argument("step_fraction must lie in (0, 1)");
  }
}

const char* to_string(IpmStatus status)
{
  switch (status)
  {
    case IpmStatus::Optimal:
      return "optimal";
    case IpmStatus::MaxIter:
      return "max_iter";
    case IpmStatus::NumericalFailure:
      return "numerical_failure";
    case IpmStatus::Infeasible:
      return "infeasible";
  }
  return "unknown";
}

KktResiduals residuals(const ConicProgram& program, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& s)
{
  const int n = program.num_vars();
  const int m = program.num_equalities();
  if (x.size() != n || s.size() != n || y.size() != m)
  {
    throw DimensionMismatch("point dimensions do not match the program");
  }
  const Eigen::VectorXd& c = program.objective();
  const Eigen::VectorXd b = program.equality_rhs();

  // A^T y accumulated row by row from the sparse form
  Eigen::VectorXd aty = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < m; ++r)
  {
    for (const auto& t : program.equalities()[r].terms)
    {
      aty(t.index) += t.coeff * y(r);
    }
  }
  Eigen::VectorXd slack = s;
  slack.head(program.layout().n_free).setZero();

  const double bnorm = b.norm();
  const double cnorm = c.norm();
  KktResiduals out;
  out.primal = program.equality_residuals(x).norm() / (1.0 + bnorm);
  out.dual = (c - aty - slack).norm() / (1.0 + cnorm);
  out.gap = (c.dot(x) - b.dot(y)) / (1.0 + bnorm + cnorm);
  return out;
}

namespace
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Smallest alpha > 0 at which lambda + alpha * d leaves the PSD cone
/// (lambda diagonal, positive); +inf when it never does.
double max_step_psd(const VectorXd& lambda, const MatrixXd& d)
{
  const VectorXd inv_sqrt = lambda.cwiseSqrt().cwiseInverse();
  const MatrixXd scaled = inv_sqrt.asDiagonal() * d * inv_sqrt.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (scaled + scaled.transpose()), Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

double max_step_lp(const VectorXd& x, const VectorXd& dx)
{
  double alpha = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i)
  {
    if (dx(i) < 0.0)
    {
      alpha = std::min(alpha, -x(i) / dx(i));
    }
  }
  return alpha;
}

double min_eig(const MatrixXd& m)
{
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

/// Nesterov-Todd scaling point of one PSD block: R^{-1} X R^{-T} = R^T S R = diag(lambda).
struct PsdScaling
{
  MatrixXd r;
  MatrixXd r_inv;
  MatrixXd w;  // R R^T, the scaling operator is dS -> W dS W
  VectorXd lambda;
};

std::optional<PsdScaling> nt_scaling(const MatrixXd& x, const MatrixXd& s)
{
  const Eigen::LLT<MatrixXd> lx(x);
  const Eigen::LLT<MatrixXd> ls(s);
  if (lx.info() != Eigen::Success || ls.info() != Eigen::Success)
  {
    return std::nullopt;
  }
  const MatrixXd l = lx.matrixL();
  const MatrixXd q = ls.matrixL();
  const Eigen::JacobiSVD<MatrixXd> svd(q.transpose() * l, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd sv = svd.singularValues();
  if (!(sv.minCoeff() > 0.0) || !sv.allFinite())
  {
    return std::nullopt;
  }
  PsdScaling out;
  out.lambda = sv;
  const VectorXd inv_sqrt = sv.cwiseSqrt().cwiseInverse();
  out.r = l * svd.matrixV() * inv_sqrt.asDiagonal();
  out.r_inv = inv_sqrt.asDiagonal() * svd.matrixU().transpose() * q.transpose();
  out.w = out.r * out.r.transpose();
  return out;
}

/// Dense copy of the program after row reduction and row equilibration.
struct Reduced
{
  MatrixXd a;
  VectorXd b;
  VectorXd c;
  VectorXd row_scale;     // a = diag(row_scale) * a_original(kept, :)
  double obj_scale = 1.0;  // c = c_original / obj_scale
  std::vector<int> kept;  // original row indices
  bool inconsistent = false;
};

Reduced presolve(const ConicProgram& program, std::ostream* trace)
{
  Reduced out;
  const MatrixXd a = program.equality_matrix();
  const VectorXd b = program.equality_rhs();
  out.c = program.objective();
  // the path is invariant under positive scaling of c; keep it O(1) internally
  const double cmax = out.c.cwiseAbs().maxCoeff();
  if (cmax > 0.0)
  {
    out.obj_scale = cmax;
    out.c /= cmax;
  }
  const int m = static_cast<int>(a.rows());
  if (m == 0)
  {
    out.a = a;
    out.b = b;
    out.row_scale = VectorXd();
    return out;
  }

  Eigen::ColPivHouseholderQR<MatrixXd> qr(a.transpose());
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  std::vector<int> kept;
  for (int k = 0; k < rank; ++k)
  {
    kept.push_back(static_cast<int>(qr.colsPermutation().indices()(k)));
  }
  std::sort(kept.begin(), kept.end());

  if (rank < m)
  {
    MatrixXd ak(rank, a.cols());
    VectorXd bk(rank);
    for (int k = 0; k < rank; ++k)
    {
      ak.row(k) = a.row(kept[k]);
      bk(k) = b(kept[k]);
    }
    // minimum-norm point on the kept rows, then check the dropped ones
    const VectorXd x_ls = ak.transpose() * (ak * ak.transpose()).ldlt().solve(bk);
    const double resid = (a * x_ls - b).norm();
    out.inconsistent = resid > 1e-8 * (1.0 + b.norm());
    std::ostream& warn = trace ? *trace : std::clog;
    warn << "conic solver: removed " << (m - rank) << " linearly dependent equality row(s)"
         << (out.inconsistent ? " (inconsistent)" : "") << "\n";
  }

  out.kept = kept;
  out.a.resize(rank, a.cols());
  out.b.resize(rank);
  out.row_scale.resize(rank);
  for (int k = 0; k < rank; ++k)
  {
    const double norm = a.row(kept[k]).norm();
    const double scale = norm > 0.0 ? 1.0 / norm : 1.0;
    out.row_scale(k) = scale;
    out.a.row(k) = scale * a.row(kept[k]);
    out.b(k) = scale * b(kept[k]);
  }
  return out;
}

// iterations without a better KKT merit before giving up
constexpr int kStallLimit = 5;

class InteriorPoint
{
public:
  InteriorPoint(const ConicProgram& program, const IpmSettings& settings)
    : program_(program), layout_(program.layout()), settings_(settings)
  {
  }

  IpmResult run();

private:
  struct Point
  {
    VectorXd x;  // full
    VectorXd y;  // reduced rows
    VectorXd s;  // full, zero on free
  };

  struct Scaling
  {
    VectorXd lp_w;  // sqrt(x / s)
    VectorXd lp_lambda;
    std::vector<PsdScaling> psd;
  };

  struct Direction
  {
    VectorXd dx;
    VectorXd dy;
    VectorXd ds;
  };

  // Complementarity right-hand side in scaled coordinates.
  struct ScaledRhs
  {
    VectorXd lp;
    std::vector<MatrixXd> psd;
  };

  int num_blocks() const { return static_cast<int>(layout_.psd_orders.size()); }
  int lp_offset() const { return layout_.n_free; }

  Point initial_point() const;
  bool compute_scaling(const Point& pt, Scaling& sc) const;
  bool factor(const Scaling& sc);
  bool solve_direction(const Scaling& sc, const ScaledRhs& rhs, const VectorXd& rp, const VectorXd& rd,
                       Direction& dir) const;
  // one reduced-KKT solve for complementarity target e (unscaled primal direction form)
  bool newton_step(const Scaling& sc, const VectorXd& e, const VectorXd& rp, const VectorXd& rd,
                   Direction& dir) const;
  VectorXd apply_h(const Scaling& sc, const VectorXd& v) const;
  void scaled_parts(const Scaling& sc, const Direction& dir, ScaledRhs& dx_s, ScaledRhs& ds_s) const;
  std::pair<double, double> max_steps(const Scaling& sc, const Direction& dir) const;
  double cone_dot(const VectorXd& x, const VectorXd& s) const
  {
    return x.tail(x.size() - layout_.n_free).dot(s.tail(s.size() - layout_.n_free));
  }
  double min_cone_eig(const VectorXd& v) const;
  void record(IpmResult& result, const Point& pt, int iter) const;

  const ConicProgram& program_;
  const ConeLayout& layout_;
  IpmSettings settings_;
  Reduced data_;
  MatrixXd a_free_;
  MatrixXd a_cone_;
  // Free variables are eliminated through a QR of a_free_ = [Q1 Q2] [R; 0]: the
  // multiplier splits as dy = Q1 a + Q2 b with R^T a fixed by the free rows, and b
  // solves the projected Schur system Q2^T M Q2, which stays positive definite and
  // avoids the scale clash of the saddle-point form.
  MatrixXd q1_;
  MatrixXd q2_;
  MatrixXd r_free_;
  MatrixXd scaled_a_;  // B with M = B B^T
  MatrixXd proj_r_;    // Q2^T M Q2 = proj_r_^T proj_r_
  bool prepare_free();
  VectorXd kkt_solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx_free) const;
};

InteriorPoint::Point InteriorPoint::initial_point() const
{
  const int n = layout_.total();
  const int m = static_cast<int>(data_.a.rows());
  Point pt;
  pt.x = VectorXd::Zero(n);
  pt.y = VectorXd::Zero(m);
  pt.s = VectorXd::Zero(n);

  // identity-scaled interior point, magnitude matched to the data of each block
  auto magnitudes = [&](int offset, int size, int order, double& xi_p, double& xi_d) {
    const MatrixXd blk = data_.a.middleCols(offset, size);
    double ratio = 0.0;
    double max_row = 0.0;
    for (int i = 0; i < m; ++i)
    {
      const double norm = blk.row(i).norm();
      if (norm > 0.0)
      {
        ratio = std::max(ratio, (1.0 + std::abs(data_.b(i))) / (1.0 + norm));
        max_row = std::max(max_row, norm);
      }
    }
    const double root = std::sqrt(static_cast<double>(order));
    xi_p = std::max({10.0, root, order * ratio});
    xi_d = std::max({10.0, root, max_row, data_.c.segment(offset, size).norm()});
  };

  if (layout_.n_nonneg > 0)
  {
    double xi_p = 0.0;
    double xi_d = 0.0;
    magnitudes(lp_offset(), layout_.n_nonneg, layout_.n_nonneg, xi_p, xi_d);
    pt.x.segment(lp_offset(), layout_.n_nonneg).setConstant(xi_p);
    pt.s.segment(lp_offset(), layout_.n_nonneg).setConstant(xi_d);
  }
  for (int k = 0; k < num_blocks(); ++k)
  {
    const int order = layout_.psd_orders[k];
    const int off = layout_.psd_offset(k);
    double xi_p = 0.0;
    double xi_d = 0.0;
    magnitudes(off, svec_size(order), order, xi_p, xi_d);
    const VectorXd eye = svec(MatrixXd::Identity(order, order));
    pt.x.segment(off, eye.size()) = xi_p * eye;
    pt.s.segment(off, eye.size()) = xi_d * eye;
  }
  return pt;
}

bool InteriorPoint::compute_scaling(const Point& pt, Scaling& sc) const
{
  if (layout_.n_nonneg > 0)
  {
    const VectorXd x = pt.x.segment(lp_offset(), layout_.n_nonneg);
    const VectorXd s = pt.s.segment(lp_offset(), layout_.n_nonneg);
    if (!((x.array() > 0.0).all() && (s.array() > 0.0).all()))
    {
      return false;
    }
    sc.lp_w = (x.array() / s.array()).sqrt();
    sc.lp_lambda = (x.array() * s.array()).sqrt();
  }
  sc.psd.clear();
  for (int k = 0; k < num_blocks(); ++k)
  {
    const auto nt = nt_scaling(program_.psd_block(pt.x, k), program_.psd_block(pt.s, k));
    if (!nt)
    {
      return false;
    }
    sc.psd.push_back(*nt);
  }
  return true;
}

VectorXd InteriorPoint::apply_h(const Scaling& sc, const VectorXd& v) const
{
  // v and the result are full-length; free entries map to zero
  VectorXd out = VectorXd::Zero(v.size());
  if (layout_.n_nonneg > 0)
  {
    out.segment(lp_offset(), layout_.n_nonneg) =
        sc.lp_w.array().square() * v.segment(lp_offset(), layout_.n_nonneg).array();
  }
  for (int k = 0; k < num_blocks(); ++k)
  {
    const int order = layout_.psd_orders[k];
    const int off = layout_.psd_offset(k);
    const MatrixXd& w = sc.psd[k].w;
    out.segment(off, svec_size(order)) = svec(w * smat(v.segment(off, svec_size(order)), order) * w);
  }
  return out;
}

bool InteriorPoint::factor(const Scaling& sc)
{
  // M = A H A^T = B B^T with B = A H^{1/2}: the nonneg part scales columns by sqrt(x/s),
  // a PSD block maps row A_i to svec(R^T A_i R) where W = R R^T. Factoring B by QR
  // instead of forming M keeps the conditioning at cond(B) rather than cond(B)^2.
  const int m = static_cast<int>(data_.a.rows());
  int cols = layout_.n_nonneg;
  for (int k = 0; k < num_blocks(); ++k)
  {
    cols += svec_size(layout_.psd_orders[k]);
  }
  MatrixXd& b = scaled_a_;
  b = MatrixXd::Zero(m, cols);
  if (layout_.n_nonneg > 0)
  {
    b.leftCols(layout_.n_nonneg) =
        data_.a.middleCols(lp_offset(), layout_.n_nonneg) * sc.lp_w.asDiagonal();
  }
  int col = layout_.n_nonneg;
  for (int k = 0; k < num_blocks(); ++k)
  {
    const int order = layout_.psd_orders[k];
    const int size = svec_size(order);
    const auto blk = data_.a.middleCols(layout_.psd_offset(k), size);
    const MatrixXd& r = sc.psd[k].r;
    for (int i = 0; i < m; ++i)
    {
      if (blk.row(i).squaredNorm() > 0.0)
      {
        b.block(i, col, 1, size) = svec(r.transpose() * smat(blk.row(i).transpose(), order) * r).transpose();
      }
    }
    col += size;
  }
  if (!b.allFinite())
  {
    return false;
  }
  const int mp = static_cast<int>(q2_.cols());
  if (mp == 0)
  {
    proj_r_.resize(0, 0);
    return true;
  }
  if (cols < mp)
  {
    return false;
  }
  const Eigen::HouseholderQR<MatrixXd> qr(b.transpose() * q2_);
  proj_r_ = qr.matrixQR().topRows(mp).triangularView<Eigen::Upper>();
  const VectorXd diag = proj_r_.diagonal().cwiseAbs();
  return diag.allFinite() && diag.minCoeff() > 0.0;
}

bool InteriorPoint::solve_direction(const Scaling& sc, const ScaledRhs& rhs, const VectorXd& rp, const VectorXd& rd,
                                    Direction& dir) const
{
  const int n = layout_.total();
  const int nf = layout_.n_free;

  // E: primal direction contributed by the complementarity target, unscaled
  VectorXd e = VectorXd::Zero(n);
  if (layout_.n_nonneg > 0)
  {
    e.segment(lp_offset(), layout_.n_nonneg) = sc.lp_w.array() * rhs.lp.array() / sc.lp_lambda.array();
  }
  for (int k = 0; k < num_blocks(); ++k)
  {
    const int order = layout_.psd_orders[k];
    const auto& nt = sc.psd[k];
    MatrixXd target(order, order);
    for (int i = 0; i < order; ++i)
    {
      for (int j = 0; j < order; ++j)
      {
        target(i, j) = 2.0 * rhs.psd[k](i, j) / (nt.lambda(i) + nt.lambda(j));
      }
    }
    e.segment(layout_.psd_offset(k), svec_size(order)) = svec(nt.r * target * nt.r.transpose());
  }

  if (!newton_step(sc, e, rp, rd, dir))
  {
    return false;
  }
  // refine against the residuals the reduced solve leaves: A dx = rp and the free rows
  // of A^T dy = rd (the cone rows and the complementarity line hold by construction)
  const VectorXd zero_e = VectorXd::Zero(n);
  for (int pass = 0; pass < 2; ++pass)
  {
    const VectorXd res_p = rp - data_.a * dir.dx;
    VectorXd res_d = VectorXd::Zero(n);
    res_d.head(nf) = rd.head(nf) - a_free_.transpose() * dir.dy;
    if (res_p.norm() + res_d.norm() <= 1e-15 * (1.0 + rp.norm() + rd.norm()))
    {
      break;
    }
    Direction corr;
    if (!newton_step(sc, zero_e, res_p, res_d, corr))
    {
      break;
    }
    dir.dx += corr.dx;
    dir.dy += corr.dy;
    dir.ds += corr.ds;
  }
  return dir.dx.allFinite() && dir.dy.allFinite() && dir.ds.allFinite();
}

bool InteriorPoint::newton_step(const Scaling& sc, const VectorXd& e, const VectorXd& rp, const VectorXd& rd,
                                Direction& dir) const
{
  const int n = layout_.total();
  const int m = static_cast<int>(data_.a.rows());
  const int nf = layout_.n_free;
  VectorXd rd_cone = rd;
  rd_cone.head(nf).setZero();
  const VectorXd t = e - apply_h(sc, rd_cone);

  VectorXd rhs_full(m + nf);
  rhs_full.head(m) = rp - a_cone_ * t.tail(n - nf);
  rhs_full.tail(nf) = rd.head(nf);

  VectorXd dx_free;
  dir.dy = kkt_solve(rhs_full.head(m), rhs_full.tail(nf), dx_free);
  if (!dir.dy.allFinite() || !dx_free.allFinite())
  {
    return false;
  }
  dir.dx = VectorXd::Zero(n);
  dir.dx.head(nf) = dx_free;
  dir.ds = VectorXd::Zero(n);
  dir.ds.tail(n - nf) = rd.tail(n - nf) - a_cone_.transpose() * dir.dy;
  dir.dx.tail(n - nf) = (e - apply_h(sc, dir.ds)).tail(n - nf);
  return dir.dx.allFinite() && dir.ds.allFinite();
}

bool InteriorPoint::prepare_free()
{
  const int m = static_cast<int>(a_free_.rows());
  const int nf = static_cast<int>(a_free_.cols());
  if (nf == 0)
  {
    q1_ = MatrixXd::Zero(m, 0);
    q2_ = MatrixXd::Identity(m, m);
    r_free_ = MatrixXd::Zero(0, 0);
    return true;
  }
  if (nf > m)
  {
    return false;
  }
  const Eigen::HouseholderQR<MatrixXd> qr(a_free_);
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(m, m);
  q1_ = q.leftCols(nf);
  q2_ = q.rightCols(m - nf);
  r_free_ = qr.matrixQR().topRows(nf).triangularView<Eigen::Upper>();
  // free columns must be independent, otherwise the free part is unbounded or undetermined
  const double rmax = r_free_.diagonal().cwiseAbs().maxCoeff();
  return r_free_.diagonal().cwiseAbs().minCoeff() > 1e-12 * std::max(1.0, rmax);
}

VectorXd InteriorPoint::kkt_solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx_free) const
{
  // [M A_f; A_f^T 0] [dy; dx_free] = [r1; r2]
  const VectorXd a = r_free_.transpose().triangularView<Eigen::Lower>().solve(r2);
  const VectorXd base = q1_ * a;
  VectorXd dy = base;
  if (q2_.cols() > 0)
  {
    const VectorXd rhs = q2_.transpose() * (r1 - scaled_a_ * (scaled_a_.transpose() * base));
    const VectorXd z = proj_r_.transpose().triangularView<Eigen::Lower>().solve(rhs);
    dy += q2_ * proj_r_.triangularView<Eigen::Upper>().solve(z);
  }
  dx_free = r_free_.triangularView<Eigen::Upper>().solve(q1_.transpose() * (r1 - scaled_a_ * (scaled_a_.transpose() * dy)));
  return dy;
}

void InteriorPoint::scaled_parts(const Scaling& sc, const Direction& dir, ScaledRhs& dx_s, ScaledRhs& ds_s) const
{
  if (layout_.n_nonneg > 0)
  {
    dx_s.lp = dir.dx.segment(lp_offset(), layout_.n_nonneg).array() / sc.lp_w.array();
    ds_s.lp = dir.ds.segment(lp_offset(), layout_.n_nonneg).array() * sc.lp_w.array();
  }
  dx_s.psd.clear();
  ds_s.psd.clear();
  for (int k = 0; k < num_blocks(); ++k)
  {
    const int order = layout_.psd_orders[k];
    const int off = layout_.psd_offset(k);
    const auto& nt = sc.psd[k];
    dx_s.psd.push_back(nt.r_inv * smat(dir.dx.segment(off, svec_size(order)), order) * nt.r_inv.transpose());
    ds_s.psd.push_back(nt.r.transpose() * smat(dir.ds.segment(off, svec_size(order)), order) * nt.r);
  }
}

std::pair<double, double> InteriorPoint::max_steps(const Scaling& sc, const Direction& dir) const
{
  ScaledRhs dx_s;
  ScaledRhs ds_s;
  scaled_parts(sc, dir, dx_s, ds_s);
  double ap = std::numeric_limits<double>::infinity();
  double ad = std::numeric_limits<double>::infinity();
  if (layout_.n_nonneg > 0)
  {
    ap = std::min(ap, max_step_lp(sc.lp_lambda, dx_s.lp));
    ad = std::min(ad, max_step_lp(sc.lp_lambda, ds_s.lp));
  }
  for (int k = 0; k < num_blocks(); ++k)
  {
    ap = std::min(ap, max_step_psd(sc.psd[k].lambda, dx_s.psd[k]));
    ad = std::min(ad, max_step_psd(sc.psd[k].lambda, ds_s.psd[k]));
  }
  return {ap, ad};
}

double InteriorPoint::min_cone_eig(const VectorXd& v) const
{
  double lo = std::numeric_limits<double>::infinity();
  if (layout_.n_nonneg > 0)
  {
    lo = std::min(lo, v.segment(lp_offset(), layout_.n_nonneg).minCoeff());
  }
  for (int k = 0; k < num_blocks(); ++k)
  {
    lo = std::min(lo, min_eig(program_.psd_block(v, k)));
  }
  return lo;
}

IpmResult InteriorPoint::run()
{
  const auto start = std::chrono::steady_clock::now();
  IpmResult result;
  const int n = layout_.total();
  const int nf = layout_.n_free;
  const double nu = std::max(1, layout_.degree());

  data_ = presolve(program_, settings_.trace);
  result.removed_rows = program_.num_equalities() - static_cast<int>(data_.kept.size());
  const int m = static_cast<int>(data_.a.rows());
  a_free_ = data_.a.leftCols(nf);
  a_cone_ = data_.a.rightCols(n - nf);

  const VectorXd b_orig = program_.equality_rhs();
  const double bnorm = b_orig.norm();
  const double cnorm = data_.c.norm();
  const VectorXd row_unscale = data_.row_scale.cwiseInverse();

  Point pt = initial_point();
  // Near the optimum the Newton systems lose accuracy before the tolerances are met on
  // hard instances; keep the iterate with the best KKT merit and report that one.
  Point best = pt;
  double best_merit = std::numeric_limits<double>::infinity();
  int since_best = 0;

  auto finish = [&](IpmStatus status, int iters) {
    if (status != IpmStatus::Optimal)
    {
      pt = best;
    }
    result.status = status;
    result.iterations = iters;
    result.x = pt.x;
    // project onto the cone (no-op for strictly interior iterates)
    if (layout_.n_nonneg > 0)
    {
      result.x.segment(lp_offset(), layout_.n_nonneg) =
          result.x.segment(lp_offset(), layout_.n_nonneg).cwiseMax(0.0);
    }
    for (int k = 0; k < num_blocks(); ++k)
    {
      const int order = layout_.psd_orders[k];
      const MatrixXd blk = program_.psd_block(result.x, k);
      const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(blk);
      if (eig.eigenvalues().minCoeff() < 0.0)
      {
        const MatrixXd proj = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
                              eig.eigenvectors().transpose();
        result.x.segment(layout_.psd_offset(k), svec_size(order)) = svec(proj);
      }
    }
    result.y = VectorXd::Zero(program_.num_equalities());
    for (int k = 0; k < m; ++k)
    {
      result.y(data_.kept[k]) = pt.y(k) * data_.row_scale(k) * data_.obj_scale;
    }
    result.s = data_.obj_scale * pt.s;
    result.primal_objective = program_.objective().dot(result.x);
    result.dual_objective = b_orig.dot(result.y);
    const KktResiduals kkt = residuals(program_, result.x, result.y, result.s);
    result.primal_infeas = kkt.primal;
    result.dual_infeas = kkt.dual;
    result.rel_gap = std::abs(result.primal_objective - result.dual_objective) /
                     (1.0 + std::abs(result.primal_objective) + std::abs(result.dual_objective));
    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  };

  if (data_.inconsistent)
  {
    return finish(IpmStatus::Infeasible, 0);
  }
  if (!prepare_free())
  {
    return finish(IpmStatus::NumericalFailure, 0);
  }

  if (settings_.trace)
  {
    *settings_.trace << " iter      pobj            dobj          gap      pinf     dinf     a_p    a_d   sigma\n";
  }

  Scaling sc;
  for (int iter = 0;; ++iter)
  {
    const VectorXd rp = data_.b - data_.a * pt.x;
    VectorXd rd = data_.c - data_.a.transpose() * pt.y - pt.s;
    const double comp = cone_dot(pt.x, pt.s);
    const double mu = comp / nu;

    IpmIterate it;
    it.iter = iter;
    it.primal_objective = data_.obj_scale * data_.c.dot(pt.x);
    it.dual_objective = data_.obj_scale * data_.b.dot(pt.y);
    it.complementarity = data_.obj_scale * comp;
    it.primal_infeas = row_unscale.cwiseProduct(rp).norm() / (1.0 + bnorm);
    it.dual_infeas = rd.norm() / (1.0 + cnorm);
    const double denom = 1.0 + std::abs(it.primal_objective) + std::abs(it.dual_objective);
    it.rel_gap = std::abs(it.primal_objective - it.dual_objective) / denom;
    it.min_primal_eig = min_cone_eig(pt.x);
    it.min_dual_eig = min_cone_eig(pt.s);
    result.trace.push_back(it);

    const bool converged = it.rel_gap <= settings_.tol_gap && it.complementarity / denom <= settings_.tol_gap &&
                           it.primal_infeas <= settings_.tol_feas && it.dual_infeas <= settings_.tol_feas;
    if (converged)
    {
      return finish(IpmStatus::Optimal, iter);
    }
    const double merit = std::max({it.rel_gap / settings_.tol_gap, it.complementarity / denom / settings_.tol_gap,
                                   it.primal_infeas / settings_.tol_feas, it.dual_infeas / settings_.tol_feas});
    if (merit < best_merit)
    {
      best = pt;
      best_merit = merit;
      since_best = 0;
    }
    else if (++since_best >= kStallLimit)
    {
      return finish(IpmStatus::NumericalFailure, iter);
    }

    // infeasibility certificates: an improving ray of the other problem
    const double by = data_.b.dot(pt.y);
    const double cx = data_.c.dot(pt.x);
    if (by > 1.0 && (data_.c - rd).norm() <= 1e-2 * settings_.tol_feas * by)
    {
      return finish(IpmStatus::Infeasible, iter);
    }
    if (cx < -1.0 && (data_.b - rp).norm() <= 1e-2 * settings_.tol_feas * -cx)
    {
      return finish(IpmStatus::Infeasible, iter);
    }
    if (iter >= settings_.max_iter)
    {
      return finish(IpmStatus::MaxIter, iter);
    }

    if (!compute_scaling(pt, sc) || !factor(sc))
    {
      return finish(IpmStatus::NumericalFailure, iter);
    }

    // predictor: scaled target -lambda o lambda
    ScaledRhs affine_rhs;
    if (layout_.n_nonneg > 0)
    {
      affine_rhs.lp = -sc.lp_lambda.array().square();
    }
    for (const auto& nt : sc.psd)
    {
      affine_rhs.psd.push_back(-MatrixXd(nt.lambda.array().square().matrix().asDiagonal()));
    }
    Direction affine;
    if (!solve_direction(sc, affine_rhs, rp, rd, affine))
    {
      return finish(IpmStatus::NumericalFailure, iter);
    }
    const auto [ap_aff_max, ad_aff_max] = max_steps(sc, affine);
    const double ap_aff = std::min(1.0, ap_aff_max);
    const double ad_aff = std::min(1.0, ad_aff_max);
    const double mu_aff = cone_dot(pt.x + ap_aff * affine.dx, pt.s + ad_aff * affine.ds) / nu;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // corrector: sigma*mu*e - lambda o lambda - dx_aff o ds_aff (scaled)
    ScaledRhs dx_s;
    ScaledRhs ds_s;
    scaled_parts(sc, affine, dx_s, ds_s);
    ScaledRhs corr_rhs;
    if (layout_.n_nonneg > 0)
    {
      corr_rhs.lp = sigma * mu - sc.lp_lambda.array().square() - dx_s.lp.array() * ds_s.lp.array();
    }
    for (int k = 0; k < num_blocks(); ++k)
    {
      const auto& nt = sc.psd[k];
      const int order = layout_.psd_orders[k];
      MatrixXd target = sigma * mu * MatrixXd::Identity(order, order);
      target.diagonal() -= nt.lambda.array().square().matrix();
      target -= 0.5 * (dx_s.psd[k] * ds_s.psd[k] + ds_s.psd[k] * dx_s.psd[k]);
      corr_rhs.psd.push_back(target);
    }
    Direction dir;
    if (!solve_direction(sc, corr_rhs, rp, rd, dir))
    {
      return finish(IpmStatus::NumericalFailure, iter);
    }
    const auto [ap_max, ad_max] = max_steps(sc, dir);
    const double ap = std::min(1.0, settings_.step_fraction * ap_max);
    const double ad = std::min(1.0, settings_.step_fraction * ad_max);

    result.trace.back().step_primal = ap;
    result.trace.back().step_dual = ad;
    result.trace.back().sigma = sigma;
    if (settings_.trace)
    {
      const auto& t = result.trace.back();
      *settings_.trace << std::setw(4) << iter << std::scientific << std::setprecision(6) << " " << std::setw(15)
                       << t.primal_objective << " " << std::setw(15) << t.dual_objective << std::setprecision(1)
                       << " " << t.rel_gap << " " << t.primal_infeas << " " << t.dual_infeas << std::fixed
                       << std::setprecision(3) << " " << ap << " " << ad << " " << sigma << std::defaultfloat
                       << "\n";
    }

    pt.x += ap * dir.dx;
    pt.y += ad * dir.dy;
    pt.s += ad * dir.ds;
    if (!pt.x.allFinite() || !pt.y.allFinite() || !pt.s.allFinite())
    {
      pt.x -= ap * dir.dx;
      pt.y -= ad * dir.dy;
      pt.s -= ad * dir.ds;
      return finish(IpmStatus::NumericalFailure, iter);
    }
  }
}

}  // namespace

IpmResult solve(const ConicProgram& program, const IpmSettings& settings)
{
  validate(settings);
  InteriorPoint ipm(program, settings);
  return ipm.run();
}

}  // namespace twtoa
