#ifndef CRITSEL_GRAPH_HEAT_HPP
#define CRITSEL_GRAPH_HEAT_HPP

#include <Eigen/Dense>

namespace critsel {

template <class Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Combinatorial Laplacian L = Deg - W of a symmetric non-negative
// adjacency expression.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> combinatorial_laplacian(
    const Eigen::MatrixBase<Derived>& adjacency) {
  using Scalar = typename Derived::Scalar;
  DenseMatrix<Scalar> laplacian = -adjacency;
  laplacian.diagonal() += adjacency.rowwise().sum();
  return laplacian;
}

// Low-pass spectral filter exp(-time * lambda) applied in the eigenbasis of
// the Laplacian of `adjacency`, with eigenvalues scaled into [0, 1] by the
// largest one. A graph with a zero Laplacian (single node, or no edges)
// yields the identity. The result is symmetrized so downstream products are
// orientation-free.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> heat_kernel_matrix(
    const Eigen::MatrixBase<Derived>& adjacency, typename Derived::Scalar time) {
  using Scalar = typename Derived::Scalar;
  if (adjacency.rows() == 0) return DenseMatrix<Scalar>(0, 0);
  const DenseMatrix<Scalar> laplacian = combinatorial_laplacian(adjacency);

  Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> solver(laplacian);
  DenseVector<Scalar> eigenvalues = solver.eigenvalues();
  const Scalar max_eigenvalue = eigenvalues.maxCoeff();
  if (max_eigenvalue > Scalar(0)) {
    eigenvalues /= max_eigenvalue;
  } else {
    eigenvalues.setZero();
  }

  const DenseVector<Scalar> filtered = (-time * eigenvalues.array()).exp().matrix();
  DenseMatrix<Scalar> kernel = solver.eigenvectors() * filtered.asDiagonal() *
                               solver.eigenvectors().transpose();
  kernel = ((kernel + kernel.transpose()) / Scalar(2)).eval();
  return kernel;
}

}  // namespace critsel

#endif  // CRITSEL_GRAPH_HEAT_HPP
