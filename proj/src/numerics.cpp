#include "redda/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "redda/errors.hpp"

namespace redda {

namespace {

constexpr double kJacobiThreshold = 1e-13;
constexpr int kJacobiMaxSweeps = 100;

// Make the first component of each column whose magnitude is significant
// positive; flips are mirrored into `mirror` columns when provided.
void normalize_column_signs(Matrix& q, Matrix* mirror = nullptr) {
  const std::size_t n = q.rows();
  for (std::size_t j = 0; j < q.cols(); ++j) {
    double lead = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(q(i, j)) > 1e-12) {
        lead = q(i, j);
        break;
      }
    }
    if (lead < 0.0) {
      for (std::size_t i = 0; i < n; ++i) q(i, j) = -q(i, j);
      if (mirror) {
        for (std::size_t i = 0; i < mirror->rows(); ++i) (*mirror)(i, j) = -(*mirror)(i, j);
      }
    }
  }
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix product: dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("matrix sum: dimension mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) += b(i, j);
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("matrix difference: dimension mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) -= b(i, j);
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) *= s;
  return c;
}

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
  if (a.cols() != x.size()) throw std::invalid_argument("matvec: dimension mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

std::vector<double> matvec_t(const Matrix& a, const std::vector<double>& x) {
  if (a.rows() != x.size()) throw std::invalid_argument("matvec_t: dimension mismatch");
  std::vector<double> y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += a(i, j) * xi;
  }
  return y;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j)));
  return m;
}

double orthonormality_defect(const Matrix& q) {
  Matrix qtq = q.transposed() * q;
  double defect = 0.0;
  for (std::size_t i = 0; i < qtq.rows(); ++i)
    for (std::size_t j = 0; j < qtq.cols(); ++j) {
      const double target = (i == j) ? 1.0 : 0.0;
      defect = std::max(defect, std::abs(qtq(i, j) - target));
    }
  return defect;
}

SymMatrix::SymMatrix(const Matrix& m) : SymMatrix(m.rows(), m.data()) {
  if (m.rows() != m.cols()) throw std::invalid_argument("SymMatrix: input not square");
}

SymMatrix::SymMatrix(std::size_t p, const std::vector<double>& row_major) : p_(p), v_(row_major) {
  if (v_.size() != p * p) throw std::invalid_argument("SymMatrix: size mismatch");
  double scale = 1.0;
  for (double x : v_) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < p_; ++i)
    for (std::size_t j = i + 1; j < p_; ++j) {
      if (std::abs(v_[i * p_ + j] - v_[j * p_ + i]) > 1e-12 * scale)
        throw std::invalid_argument("SymMatrix: input is not symmetric");
      const double avg = 0.5 * (v_[i * p_ + j] + v_[j * p_ + i]);
      v_[i * p_ + j] = avg;
      v_[j * p_ + i] = avg;
    }
}

SymMatrix SymMatrix::identity(std::size_t p) {
  SymMatrix m(p);
  for (std::size_t i = 0; i < p; ++i) m(i, i) = 1.0;
  return m;
}

SymMatrix SymMatrix::diagonal(const std::vector<double>& d) {
  SymMatrix m(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

void SymMatrix::set(std::size_t i, std::size_t j, double value) {
  v_[i * p_ + j] = value;
  v_[j * p_ + i] = value;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < p_; ++i) t += v_[i * p_ + i];
  return t;
}

Matrix SymMatrix::as_matrix() const {
  Matrix m(p_, p_);
  for (std::size_t i = 0; i < p_; ++i)
    for (std::size_t j = 0; j < p_; ++j) m(i, j) = (*this)(i, j);
  return m;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
  if (other.dim() != p_) throw std::invalid_argument("SymMatrix sum: dimension mismatch");
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += other.v_[k];
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
  for (double& x : v_) x *= s;
  return *this;
}

SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
  SymMatrix c = a;
  c += b;
  return c;
}

SymMatrix operator*(double s, const SymMatrix& a) {
  SymMatrix c = a;
  c *= s;
  return c;
}

EigenDecomposition sym_eigen(const SymMatrix& m) {
  const std::size_t p = m.dim();
  Matrix a = m.as_matrix();
  Matrix q = Matrix::identity(p);

  double scale = 0.0;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) scale = std::max(scale, std::abs(a(i, j)));
  if (scale == 0.0) scale = 1.0;

  for (int sweep = 0; sweep < kJacobiMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i + 1 < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j) off = std::max(off, std::abs(a(i, j)));
    if (off <= kJacobiThreshold * scale) break;

    for (std::size_t i = 0; i + 1 < p; ++i) {
      for (std::size_t j = i + 1; j < p; ++j) {
        const double apq = a(i, j);
        if (std::abs(apq) <= 1e-300) continue;
        const double app = a(i, i);
        const double aqq = a(j, j);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < p; ++k) {
          const double aik = a(i, k);
          const double ajk = a(j, k);
          a(i, k) = c * aik - s * ajk;
          a(j, k) = s * aik + c * ajk;
        }
        for (std::size_t k = 0; k < p; ++k) {
          const double aki = a(k, i);
          const double akj = a(k, j);
          a(k, i) = c * aki - s * akj;
          a(k, j) = s * aki + c * akj;
        }
        for (std::size_t k = 0; k < p; ++k) {
          const double qki = q(k, i);
          const double qkj = q(k, j);
          q(k, i) = c * qki - s * qkj;
          q(k, j) = s * qki + c * qkj;
        }
      }
    }
  }

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenDecomposition dec;
  dec.values.resize(p);
  dec.vectors = Matrix(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    dec.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < p; ++i) dec.vectors(i, j) = q(i, order[j]);
  }
  normalize_column_signs(dec.vectors);
  return dec;
}

SvdResult svd(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("svd: only square matrices supported");
  const std::size_t p = m.rows();
  Matrix u = m;
  Matrix v = Matrix::identity(p);

  double scale = std::max(max_abs(m), 1e-300);

  // One-sided Jacobi: orthogonalize column pairs of U by right rotations.
  for (int sweep = 0; sweep < kJacobiMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < p; ++i) {
      for (std::size_t j = i + 1; j < p; ++j) {
        double aii = 0.0, ajj = 0.0, aij = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
          aii += u(k, i) * u(k, i);
          ajj += u(k, j) * u(k, j);
          aij += u(k, i) * u(k, j);
        }
        if (std::abs(aij) <= kJacobiThreshold * scale * scale) continue;
        rotated = true;
        const double theta = (ajj - aii) / (2.0 * aij);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < p; ++k) {
          const double uki = u(k, i);
          const double ukj = u(k, j);
          u(k, i) = c * uki - s * ukj;
          u(k, j) = s * uki + c * ukj;
        }
        for (std::size_t k = 0; k < p; ++k) {
          const double vki = v(k, i);
          const double vkj = v(k, j);
          v(k, i) = c * vki - s * vkj;
          v(k, j) = s * vki + c * vkj;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> norms(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double n2 = 0.0;
    for (std::size_t k = 0; k < p; ++k) n2 += u(k, j) * u(k, j);
    norms[j] = std::sqrt(n2);
  }

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  SvdResult out;
  out.s.resize(p);
  out.u = Matrix(p, p);
  out.v = Matrix(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    out.s[j] = norms[order[j]];
    for (std::size_t i = 0; i < p; ++i) {
      out.v(i, j) = v(i, order[j]);
      out.u(i, j) = u(i, order[j]);
    }
  }

  // Normalize U columns; complete any null columns to an orthonormal basis.
  // Columns below 1e-10 of the top singular value are dominated by
  // cancellation noise and must not be normalized into U.
  const double tiny = 1e-10 * std::max(out.s.empty() ? 0.0 : out.s[0], 1e-300);
  for (std::size_t j = 0; j < p; ++j) {
    if (out.s[j] > tiny) {
      for (std::size_t i = 0; i < p; ++i) out.u(i, j) /= out.s[j];
    } else {
      // Gram-Schmidt a unit vector against the existing columns.
      for (std::size_t e = 0; e < p; ++e) {
        std::vector<double> cand(p, 0.0);
        cand[e] = 1.0;
        for (std::size_t jj = 0; jj < p; ++jj) {
          if (jj == j || (out.s[jj] <= tiny && jj > j)) continue;
          double dot = 0.0;
          for (std::size_t i = 0; i < p; ++i) dot += cand[i] * out.u(i, jj);
          for (std::size_t i = 0; i < p; ++i) cand[i] -= dot * out.u(i, jj);
        }
        double n2 = 0.0;
        for (double x : cand) n2 += x * x;
        if (n2 > 1e-8) {
          const double inv = 1.0 / std::sqrt(n2);
          for (std::size_t i = 0; i < p; ++i) out.u(i, j) = cand[i] * inv;
          break;
        }
      }
      out.s[j] = 0.0;
    }
  }

  normalize_column_signs(out.u, &out.v);
  return out;
}

MvnEvaluator::MvnEvaluator(std::vector<double> mu, const std::vector<double>& eigenvalues,
                           const Matrix& q)
    : p_(mu.size()), mu_(std::move(mu)), q_(q) {
  if (eigenvalues.size() != p_ || q_.rows() != p_ || q_.cols() != p_)
    throw std::invalid_argument("MvnEvaluator: dimension mismatch");
  double logdet = 0.0;
  inv_eval_.resize(p_);
  for (std::size_t l = 0; l < p_; ++l) {
    if (!(eigenvalues[l] > 0.0))
      throw std::domain_error("MvnEvaluator: covariance is not positive definite");
    logdet += std::log(eigenvalues[l]);
    inv_eval_[l] = 1.0 / eigenvalues[l];
  }
  log_norm_ = -0.5 * (static_cast<double>(p_) * std::log(2.0 * std::numbers::pi) + logdet);
}

double MvnEvaluator::logdensity(const double* x) const {
  double maha = 0.0;
  for (std::size_t l = 0; l < p_; ++l) {
    double proj = 0.0;
    for (std::size_t i = 0; i < p_; ++i) proj += q_(i, l) * (x[i] - mu_[i]);
    maha += proj * proj * inv_eval_[l];
  }
  return log_norm_ - 0.5 * maha;
}

double mvn_logdensity(const std::vector<double>& x, const std::vector<double>& mu,
                      const SymMatrix& sigma) {
  if (x.size() != mu.size() || sigma.dim() != x.size())
    throw std::invalid_argument("mvn_logdensity: dimension mismatch");
  EigenDecomposition dec = sym_eigen(sigma);
  for (double d : dec.values)
    if (!(d > 0.0)) throw std::domain_error("mvn_logdensity: covariance is not positive definite");
  MvnEvaluator ev(mu, dec.values, dec.vectors);
  return ev.logdensity(x.data());
}

}  // namespace redda
