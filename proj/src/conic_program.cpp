#include "twtoa/conic_program.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "twtoa/errors.hpp"

namespace twtoa
{

int ConeLayout::psd_offset(int block) const
{
  int offset = n_free + n_nonneg;
  for (int k = 0; k < block; ++k)
  {
    offset += svec_size(psd_orders[k]);
  }
  return offset;
}

int ConeLayout::num_cone_vars() const
{
  int count = n_nonneg;
  for (int order : psd_orders)
  {
    count += svec_size(order);
  }
  return count;
}

int ConeLayout::degree() const
{
  int deg = n_nonneg;
  for (int order : psd_orders)
  {
    deg += order;
  }
  return deg;
}

int svec_index(int order, int i, int j)
{
  if (i < j)
  {
    std::swap(i, j);
  }
  // columns 0..j-1 hold order, order-1, ..., order-j+1 entries
  return j * order - j * (j - 1) / 2 + (i - j);
}

Eigen::VectorXd svec(const Eigen::MatrixXd& sym)
{
  const int n = static_cast<int>(sym.rows());
  Eigen::VectorXd v(svec_size(n));
  int k = 0;
  for (int j = 0; j < n; ++j)
  {
    v(k++) = sym(j, j);
    for (int i = j + 1; i < n; ++i)
    {
      v(k++) = std::numbers::sqrt2 * 0.5 * (sym(i, j) + sym(j, i));
    }
  }
  return v;
}

Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, int order)
{
  Eigen::MatrixXd m(order, order);
  int k = 0;
  for (int j = 0; j < order; ++j)
  {
    m(j, j) = v(k++);
    for (int i = j + 1; i < order; ++i)
    {
      m(i, j) = m(j, i) = v(k++) / std::numbers::sqrt2;
    }
  }
  return m;
}

ConicProgram::ConicProgram(ConeLayout layout) : layout_(std::move(layout)), c_(Eigen::VectorXd::Zero(layout_.total()))
{
}

int ConicProgram::free_index(int k) const
{
  if (k < 0 || k >= layout_.n_free)
  {
    throw DimensionMismatch("free variable index out of range");
  }
  return k;
}

int ConicProgram::nonneg_index(int k) const
{
  if (k < 0 || k >= layout_.n_nonneg)
  {
    throw DimensionMismatch("nonnegative variable index out of range");
  }
  return layout_.n_free + k;
}

int ConicProgram::psd_index(int block, int i, int j) const
{
  if (block < 0 || block >= static_cast<int>(layout_.psd_orders.size()))
  {
    throw DimensionMismatch("PSD block index out of range");
  }
  const int order = layout_.psd_orders[block];
  if (i < 0 || j < 0 || i >= order || j >= order)
  {
    throw DimensionMismatch("PSD entry out of range");
  }
  return layout_.psd_offset(block) + svec_index(order, i, j);
}

Term ConicProgram::psd_term(int block, int i, int j, double coeff) const
{
  return {psd_index(block, i, j), i == j ? coeff : coeff / std::numbers::sqrt2};
}

void ConicProgram::add_equality(LinearRow row)
{
  for (const auto& t : row.terms)
  {
    if (t.index < 0 || t.index >= num_vars())
    {
      throw DimensionMismatch("equality term index out of range");
    }
  }
  rows_.push_back(std::move(row));
}

void ConicProgram::add_objective(int index, double coeff)
{
  if (index < 0 || index >= num_vars())
  {
    throw DimensionMismatch("objective index out of range");
  }
  c_(index) += coeff;
}

void ConicProgram::set_objective(Eigen::VectorXd c)
{
  if (c.size() != num_vars())
  {
    throw DimensionMismatch("objective length does not match variable count");
  }
  c_ = std::move(c);
}

Eigen::MatrixXd ConicProgram::equality_matrix() const
{
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(num_equalities(), num_vars());
  for (int r = 0; r < num_equalities(); ++r)
  {
    for (const auto& t : rows_[r].terms)
    {
      a(r, t.index) += t.coeff;
    }
  }
  return a;
}

Eigen::VectorXd ConicProgram::equality_rhs() const
{
  Eigen::VectorXd b(num_equalities());
  for (int r = 0; r < num_equalities(); ++r)
  {
    b(r) = rows_[r].rhs;
  }
  return b;
}

Eigen::VectorXd ConicProgram::equality_residuals(const Eigen::VectorXd& x) const
{
  Eigen::VectorXd res(num_equalities());
  for (int r = 0; r < num_equalities(); ++r)
  {
    double acc = 0.0;
    for (const auto& t : rows_[r].terms)
    {
      acc += t.coeff * x(t.index);
    }
    res(r) = acc - rows_[r].rhs;
  }
  return res;
}

Eigen::MatrixXd ConicProgram::psd_block(const Eigen::VectorXd& x, int block) const
{
  const int order = layout_.psd_orders.at(block);
  return smat(x.segment(layout_.psd_offset(block), svec_size(order)), order);
}

void write_program(std::ostream& out, const ConicProgram& program)
{
  const auto& layout = program.layout();
  out << "twtoa-conic 1\n";
  out << "vars " << program.num_vars() << "\n";
  out << "free " << layout.n_free << "\n";
  out << "nonneg " << layout.n_nonneg << "\n";
  out << "psd " << layout.psd_orders.size();
  for (int order : layout.psd_orders)
  {
    out << " " << order;
  }
  out << "\n";

  out << std::setprecision(17);
  const auto& c = program.objective();
  int nnz = 0;
  for (Eigen::Index i = 0; i < c.size(); ++i)
  {
    nnz += c(i) != 0.0;
  }
  out << "objective " << nnz << "\n";
  for (Eigen::Index i = 0; i < c.size(); ++i)
  {
    if (c(i) != 0.0)
    {
      out << i << " " << c(i) << "\n";
    }
  }

  int triplets = 0;
  for (const auto& row : program.equalities())
  {
    triplets += static_cast<int>(row.terms.size());
  }
  out << "equalities " << program.num_equalities() << " " << triplets << "\n";
  for (int r = 0; r < program.num_equalities(); ++r)
  {
    const auto& row = program.equalities()[r];
    if (!row.label.empty())
    {
      out << "# " << row.label << "\n";
    }
    for (const auto& t : row.terms)
    {
      out << r << " " << t.index << " " << t.coeff << "\n";
    }
  }
  out << "rhs\n";
  for (int r = 0; r < program.num_equalities(); ++r)
  {
    out << r << " " << program.equalities()[r].rhs << "\n";
  }
  out << "end\n";
}

namespace
{

class LineReader
{
public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next()
  {
    std::string line;
    while (std::getline(in_, line))
    {
      ++line_no_;
      const auto hash = line.find('#');
      if (hash != std::string::npos)
      {
        line.erase(hash);
      }
      if (line.find_first_not_of(" \t\r") != std::string::npos)
      {
        return std::istringstream(line);
      }
    }
    throw ParseError("conic program: unexpected end of input after line " + std::to_string(line_no_));
  }

  void expect(std::istringstream& ss, const std::string& keyword)
  {
    std::string word;
    ss >> word;
    if (word != keyword)
    {
      fail("expected '" + keyword + "', got '" + word + "'");
    }
  }

  template <typename T>
  T read(std::istringstream& ss)
  {
    T value{};
    if (!(ss >> value))
    {
      fail("malformed number");
    }
    return value;
  }

  [[noreturn]] void fail(const std::string& what) const
  {
    throw ParseError("conic program line " + std::to_string(line_no_) + ": " + what);
  }

private:
  std::istream& in_;
  int line_no_ = 0;
};

}  // namespace

ConicProgram read_program(std::istream& in)
{
  LineReader reader(in);
  auto line = reader.next();
  reader.expect(line, "twtoa-conic");
  if (reader.read<int>(line) != 1)
  {
    reader.fail("unsupported format version");
  }

  line = reader.next();
  reader.expect(line, "vars");
  const int n = reader.read<int>(line);

  ConeLayout layout;
  line = reader.next();
  reader.expect(line, "free");
  layout.n_free = reader.read<int>(line);
  line = reader.next();
  reader.expect(line, "nonneg");
  layout.n_nonneg = reader.read<int>(line);
  line = reader.next();
  reader.expect(line, "psd");
  const int blocks = reader.read<int>(line);
  for (int k = 0; k < blocks; ++k)
  {
    layout.psd_orders.push_back(reader.read<int>(line));
  }
  if (layout.total() != n)
  {
    reader.fail("cone layout does not add up to the variable count");
  }

  ConicProgram program(layout);
  line = reader.next();
  reader.expect(line, "objective");
  const int obj_nnz = reader.read<int>(line);
  for (int k = 0; k < obj_nnz; ++k)
  {
    line = reader.next();
    const int idx = reader.read<int>(line);
    const double val = reader.read<double>(line);
    if (idx < 0 || idx >= n)
    {
      reader.fail("objective index out of range");
    }
    program.add_objective(idx, val);
  }

  line = reader.next();
  reader.expect(line, "equalities");
  const int m = reader.read<int>(line);
  const int nnz = reader.read<int>(line);
  std::vector<LinearRow> rows(m);
  for (int k = 0; k < nnz; ++k)
  {
    line = reader.next();
    const int r = reader.read<int>(line);
    const int idx = reader.read<int>(line);
    const double val = reader.read<double>(line);
    if (r < 0 || r >= m || idx < 0 || idx >= n)
    {
      reader.fail("triplet out of range");
    }
    rows[r].terms.push_back({idx, val});
  }
  line = reader.next();
  reader.expect(line, "rhs");
  for (int k = 0; k < m; ++k)
  {
    line = reader.next();
    const int r = reader.read<int>(line);
    if (r < 0 || r >= m)
    {
      reader.fail("rhs row out of range");
    }
    rows[r].rhs = reader.read<double>(line);
  }
  line = reader.next();
  reader.expect(line, "end");
  for (auto& row : rows)
  {
    program.add_equality(std::move(row));
  }
  return program;
}

}  // namespace twtoa
