#include "shapeopt/sparse.hpp"

#include "shapeopt/errors.hpp"
#include "shapeopt/parallel.hpp"

#include <atomic>
#include <iomanip>
#include <ostream>

namespace shapeopt {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int n) { g_threads = std::max(1, n); }
int num_threads() { return g_threads; }

MatrixAssembler::MatrixAssembler(int rows, int cols, std::size_t reserve) : rows_(rows), cols_(cols) {
  triplets_.reserve(reserve);
}

void MatrixAssembler::add(std::span<const int> rows, std::span<const int> cols,
                          const Eigen::Ref<const Eigen::MatrixXd>& local) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      triplets_.emplace_back(rows[i], cols[j], local(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
}

SparseMatrix MatrixAssembler::finish() {
  SparseMatrix A(rows_, cols_);
  A.setFromTriplets(triplets_.begin(), triplets_.end());
  A.prune(0.0, 0.0);
  A.makeCompressed();
  triplets_.clear();
  return A;
}

void apply_dirichlet(SparseMatrix& A, Vector& b, const std::vector<std::uint8_t>& constrained, const Vector& values) {
  if (A.rows() != A.cols() || A.rows() != b.size() || b.size() != static_cast<Eigen::Index>(constrained.size()) ||
      values.size() != b.size()) {
    throw InputError("Dirichlet elimination: size mismatch");
  }
  for (int row = 0; row < A.outerSize(); ++row) {
    if (constrained[row]) continue;
    for (SparseMatrix::InnerIterator it(A, row); it; ++it) {
      if (constrained[it.col()]) {
        b[row] -= it.value() * values[it.col()];
        it.valueRef() = 0.0;
      }
    }
  }
  for (int row = 0; row < A.outerSize(); ++row) {
    if (!constrained[row]) continue;
    for (SparseMatrix::InnerIterator it(A, row); it; ++it) it.valueRef() = it.col() == row ? 1.0 : 0.0;
    b[row] = values[row];
  }
  A.prune(0.0, 0.0);
  // a constrained row whose diagonal was structurally absent
  for (int row = 0; row < A.outerSize(); ++row) {
    if (constrained[row] && A.coeff(row, row) != 1.0) A.coeffRef(row, row) = 1.0;
  }
  A.makeCompressed();
}

void apply_dirichlet(SparseMatrix& A, Vector& b, const std::vector<std::uint8_t>& constrained) {
  apply_dirichlet(A, b, constrained, Vector::Zero(b.size()));
}

void zero_constrained(Vector& v, const std::vector<std::uint8_t>& constrained) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (constrained[i]) v[i] = 0.0;
  }
}

SparseMatrix assemble(Kernel kernel, const TriMesh& mesh) {
  const bool vector = kernel == Kernel::P1VectorMass || kernel == Kernel::P1VectorLaplacian;
  const int comps = vector ? 2 : 1;
  const int nc = mesh.num_cells();
  const int nloc = 3 * comps;

  std::vector<Eigen::MatrixXd> locals(nc);
  parallel_for(nc, [&](int c) {
    const double area = mesh.cell_area(c);
    Eigen::Matrix3d scalar;
    if (kernel == Kernel::P1Mass || kernel == Kernel::P1VectorMass) {
      scalar.setConstant(area / 12.0);
      scalar.diagonal().setConstant(area / 6.0);
    } else {
      const auto g = mesh.barycentric_gradients(c);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) scalar(i, j) = area * g[i].dot(g[j]);
      }
    }
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(nloc, nloc);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < comps; ++k) local(comps * i + k, comps * j + k) = scalar(i, j);
      }
    }
    locals[c] = std::move(local);
  });

  MatrixAssembler assembler(comps * mesh.num_vertices(), comps * mesh.num_vertices(),
                            static_cast<std::size_t>(nc) * nloc * nloc);
  std::vector<int> dofs(nloc);
  for (int c = 0; c < nc; ++c) {
    const auto& cell = mesh.cells()[c];
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < comps; ++k) dofs[comps * i + k] = comps * cell[i] + k;
    }
    assembler.add(dofs, dofs, locals[c]);
  }
  return assembler.finish();
}

void write_matrix_market(std::ostream& os, const SparseMatrix& A) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
  os << std::setprecision(17);
  for (int row = 0; row < A.outerSize(); ++row) {
    for (SparseMatrix::InnerIterator it(A, row); it; ++it) os << row + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
  }
}

}  // namespace shapeopt
