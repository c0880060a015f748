#pragma once

// Dense linear algebra for small symmetric matrices and multivariate normal
// log-density evaluation. Everything is value-typed and immutable after
// construction, so instances can be shared freely across threads.

#include <cstddef>
#include <vector>

namespace redda {

// General small dense matrix, row-major.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }

  const double* row(std::size_t i) const { return v_.data() + i * cols_; }

  const std::vector<double>& data() const { return v_; }

  Matrix transposed() const;

private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> v_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

// y = A x
std::vector<double> matvec(const Matrix& a, const std::vector<double>& x);
// y = A' x
std::vector<double> matvec_t(const Matrix& a, const std::vector<double>& x);

double max_abs(const Matrix& a);
// max |(A'A - I)_ij|, used to verify orthonormality of column sets
double orthonormality_defect(const Matrix& q);

// Symmetric dense matrix. The constructor rejects inputs whose asymmetry
// exceeds 1e-12 relative to the largest entry, then symmetrizes exactly.
class SymMatrix {
public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t p) : p_(p), v_(p * p, 0.0) {}
  explicit SymMatrix(const Matrix& m);
  SymMatrix(std::size_t p, const std::vector<double>& row_major);

  static SymMatrix identity(std::size_t p);
  static SymMatrix diagonal(const std::vector<double>& d);

  std::size_t dim() const { return p_; }

  double& operator()(std::size_t i, std::size_t j) { return v_[i * p_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * p_ + j]; }

  void set(std::size_t i, std::size_t j, double value);  // keeps (j,i) in sync

  double trace() const;
  Matrix as_matrix() const;

  SymMatrix& operator+=(const SymMatrix& other);
  SymMatrix& operator*=(double s);

private:
  std::size_t p_ = 0;
  std::vector<double> v_;
};

SymMatrix operator+(const SymMatrix& a, const SymMatrix& b);
SymMatrix operator*(double s, const SymMatrix& a);

// Eigenvalues sorted descending, eigenvectors as columns of an orthonormal Q.
// Column signs follow the first-significant-component-positive convention so
// repeated runs give identical output.
struct EigenDecomposition {
  std::vector<double> values;
  Matrix vectors;
};

// Cyclic Jacobi eigendecomposition. Off-diagonal convergence threshold 1e-13
// relative to the matrix scale, hard cap 100 sweeps.
EigenDecomposition sym_eigen(const SymMatrix& m);

struct SvdResult {
  Matrix u;
  std::vector<double> s;  // descending, nonnegative
  Matrix v;
};

// One-sided Jacobi SVD for square matrices: m = U diag(S) V'.
SvdResult svd(const Matrix& m);

// log N(x; mu, Sigma) evaluated through the eigendecomposition of sigma.
// Rejects non-positive-definite sigma.
double mvn_logdensity(const std::vector<double>& x, const std::vector<double>& mu,
                      const SymMatrix& sigma);

// Cached evaluator for repeated density evaluations under one component.
// Built directly from the (lambda, D, A) covariance factors so constrained
// eigenvalues are used exactly as constrained.
class MvnEvaluator {
public:
  MvnEvaluator() = default;
  // eigenvalues d_l = lambda * a_l of Sigma, orientation q (columns).
  MvnEvaluator(std::vector<double> mu, const std::vector<double>& eigenvalues,
               const Matrix& q);

  double logdensity(const double* x) const;
  double logdensity(const std::vector<double>& x) const { return logdensity(x.data()); }

private:
  std::size_t p_ = 0;
  std::vector<double> mu_;
  std::vector<double> inv_eval_;
  Matrix q_;          // columns are eigenvectors
  double log_norm_ = 0.0;  // -(p/2) log(2 pi) - (1/2) log|Sigma|
};

}  // namespace redda
