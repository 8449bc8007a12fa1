#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

namespace twtoa
{

/// Variable vector layout: [free | nonnegative | svec(S_1) | svec(S_2) | ...].
///
/// PSD blocks are stored as symmetric vectorizations: the lower triangle in
/// column-major order with off-diagonal entries scaled by sqrt(2), so that
/// <svec(A), svec(B)> = tr(AB).
struct ConeLayout
{
  int n_free = 0;
  int n_nonneg = 0;
  std::vector<int> psd_orders;

  int psd_offset(int block) const;
  int num_cone_vars() const;
  int total() const { return n_free + num_cone_vars(); }
  /// Barrier degree: n_nonneg + sum of PSD orders.
  int degree() const;
};

inline int svec_size(int order)
{
  return order * (order + 1) / 2;
}

/// Position of entry (i, j) of an order-n symmetric matrix inside its svec.
int svec_index(int order, int i, int j);

Eigen::VectorXd svec(const Eigen::MatrixXd& sym);
Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, int order);

struct Term
{
  int index = 0;
  double coeff = 0.0;
};

struct LinearRow
{
  std::vector<Term> terms;
  double rhs = 0.0;
  std::string label;
};

/// Standard-form conic program
///
///   minimize  c^T x   subject to  A x = b,  x in R^f x R^l_+ x S^k1_+ x ...
///
/// Rows are kept in sparse form; the solver densifies.
class ConicProgram
{
public:
  ConicProgram() = default;
  explicit ConicProgram(ConeLayout layout);

  const ConeLayout& layout() const { return layout_; }
  int num_vars() const { return layout_.total(); }
  int num_equalities() const { return static_cast<int>(rows_.size()); }

  int free_index(int k) const;
  int nonneg_index(int k) const;
  int psd_index(int block, int i, int j) const;

  /// Term for coeff * X(i, j) of a PSD block, with the svec scaling folded
  /// into the coefficient. For objectives, off-diagonal pairs are counted once.
  Term psd_term(int block, int i, int j, double coeff) const;

  void add_equality(LinearRow row);
  void add_objective(int index, double coeff);
  void set_objective(Eigen::VectorXd c);

  const Eigen::VectorXd& objective() const { return c_; }
  const std::vector<LinearRow>& equalities() const { return rows_; }

  Eigen::MatrixXd equality_matrix() const;
  Eigen::VectorXd equality_rhs() const;

  /// Value of each equality row at x minus its rhs.
  Eigen::VectorXd equality_residuals(const Eigen::VectorXd& x) const;

  /// Extracts PSD block `block` of a full variable vector as a symmetric matrix.
  Eigen::MatrixXd psd_block(const Eigen::VectorXd& x, int block) const;

private:
  ConeLayout layout_;
  Eigen::VectorXd c_;
  std::vector<LinearRow> rows_;
};

// Sparse text format, line oriented, '#' starts a comment:
//
//   twtoa-conic 1
//   vars <n>
//   free <n_free>
//   nonneg <n_nonneg>
//   psd <count> <order_1> ... <order_count>
//   objective <nnz>
//   <index> <value>                 (nnz lines)
//   equalities <m> <nnz>
//   <row> <index> <value>           (nnz triplet lines)
//   rhs
//   <row> <value>                   (m lines)
//   end
//
// Indices are zero-based into the variable vector; PSD entries are svec
// coordinates. Values are written with 17 significant digits.
void write_program(std::ostream& out, const ConicProgram& program);
ConicProgram read_program(std::istream& in);

}  // namespace twtoa
