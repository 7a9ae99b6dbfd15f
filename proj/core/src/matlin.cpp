#include "adp/matlin.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <string>

#include "adp/errors.hpp"

namespace adp {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;

}  // namespace

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("SymMatrix: input is " + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()) + ", not square");
  }
  data_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::zero(Eigen::Index n) { return SymMatrix(Matrix::Zero(n, n)); }

SymMatrix SymMatrix::identity(Eigen::Index n) {
  return SymMatrix(Matrix::Identity(n, n));
}

SymMatrix SymMatrix::scaled_identity(Eigen::Index n, double s) {
  return SymMatrix(s * Matrix::Identity(n, n));
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  return SymMatrix(data_ + o.data_);
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  return SymMatrix(data_ - o.data_);
}

SymMatrix SymMatrix::operator*(double s) const { return SymMatrix(s * data_); }

Eigen::Index triangular_root(std::size_t len) {
  // Solve n(n+1)/2 = len.
  auto n = static_cast<std::size_t>(
      std::floor((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
  while (tri(n) < len) ++n;
  while (n > 0 && tri(n) > len) --n;
  if (tri(n) != len || len == 0) {
    throw DimensionError("length " + std::to_string(len) +
                         " is not of the form n(n+1)/2");
  }
  return static_cast<Eigen::Index>(n);
}

SvecVector svec(const SymMatrix& y) {
  const Eigen::Index n = y.dim();
  SvecVector out{Vector(static_cast<Eigen::Index>(tri(n))), n};
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.data(k++) = y(i, i);
    for (Eigen::Index j = i + 1; j < n; ++j) out.data(k++) = kSqrt2 * y(i, j);
  }
  return out;
}

SymMatrix smat(const SvecVector& v) {
  if (static_cast<std::size_t>(v.data.size()) != tri(v.n)) {
    throw DimensionError("smat: svec length " + std::to_string(v.data.size()) +
                         " does not match n = " + std::to_string(v.n));
  }
  return smat(v.data);
}

SymMatrix smat(const Vector& v) {
  const Eigen::Index n = triangular_root(static_cast<std::size_t>(v.size()));
  Matrix m(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = v(k++);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      m(i, j) = m(j, i) = v(k++) / kSqrt2;
    }
  }
  return SymMatrix(m);
}

Vector vec(const Matrix& x) { return x.reshaped(); }

Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (rows < 0 || cols < 0 || v.size() != rows * cols) {
    throw DimensionError("unvec: cannot reshape length " +
                         std::to_string(v.size()) + " into " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  return v.reshaped(rows, cols);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

SvecVector tilde(const Vector& v) {
  SvecVector out{Vector(static_cast<Eigen::Index>(tri(v.size()))), v.size()};
  tilde_into(v, out.data);
  return out;
}

void tilde_into(const Eigen::Ref<const Vector>& v, Eigen::Ref<Vector> out) {
  const Eigen::Index n = v.size();
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out(k++) = v(i) * v(i);
    const double vi = kSqrt2 * v(i);
    for (Eigen::Index j = i + 1; j < n; ++j) out(k++) = vi * v(j);
  }
}

Vector drop_last(const Vector& v) {
  if (v.size() == 0) throw DimensionError("drop_last: empty vector");
  return v.head(v.size() - 1);
}

SymMatrix schur_uu(const SymMatrix& q, Eigen::Index n, double max_condition) {
  const Eigen::Index l = q.dim();
  if (n < 0 || n >= l) {
    throw DimensionError("schur_uu: partition index " + std::to_string(n) +
                         " outside (0, " + std::to_string(l) + ")");
  }
  const Eigen::Index m = l - n;
  const Matrix& Q = q.matrix();
  const Matrix quu = Q.bottomRightCorner(m, m);
  const Matrix qux = Q.bottomLeftCorner(m, n);

  Eigen::SelfAdjointEigenSolver<Matrix> es(quu, Eigen::EigenvaluesOnly);
  const Vector ev = es.eigenvalues().cwiseAbs();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0) || hi / lo > max_condition) {
    throw SingularityError("schur_uu: uu block is singular (condition " +
                           std::to_string(lo > 0.0 ? hi / lo : INFINITY) + ")");
  }
  const Matrix sol = quu.ldlt().solve(qux);
  return SymMatrix(Q.topLeftCorner(n, n) - qux.transpose() * sol);
}

double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("spectral_radius: not square");
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double eig_min(const SymMatrix& y) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(y.matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double eig_max(const SymMatrix& y) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(y.matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(y.dim() - 1);
}

double norm2(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

Matrix pinv(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return Matrix(m.cols(), m.rows());
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = rel_tol * s(0);
  Vector inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    inv(i) = (s(i) > cutoff && s(i) > 0.0) ? 1.0 / s(i) : 0.0;
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::Index numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  const double cutoff = rel_tol * s(0);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) ++r;
  }
  return r;
}

Matrix chol_upper(const SymMatrix& y) {
  const Eigen::Index n = y.dim();
  const Matrix& Y = y.matrix();
  const double scale = std::max(1.0, Y.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;
  Matrix U = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = Y(j, j) - U.col(j).head(j).squaredNorm();
    if (d < -tol * static_cast<double>(n)) {
      throw NotPsdError("chol_upper: matrix is not positive semidefinite");
    }
    if (d <= tol) {
      // Semidefinite direction: the rest of row j must vanish.
      for (Eigen::Index k = j + 1; k < n; ++k) {
        const double r = Y(j, k) - U.col(j).head(j).dot(U.col(k).head(j));
        if (std::abs(r) > std::sqrt(tol) * std::sqrt(scale)) {
          throw NotPsdError("chol_upper: matrix is not positive semidefinite");
        }
      }
      continue;
    }
    const double ujj = std::sqrt(d);
    U(j, j) = ujj;
    for (Eigen::Index k = j + 1; k < n; ++k) {
      U(j, k) = (Y(j, k) - U.col(j).head(j).dot(U.col(k).head(j))) / ujj;
    }
  }
  return U;
}

bool is_psd(const SymMatrix& y, double tol) { return eig_min(y) >= -tol; }

SymMatrix project_psd(const SymMatrix& y) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(y.matrix());
  const Vector clipped = es.eigenvalues().cwiseMax(0.0);
  return SymMatrix(es.eigenvectors() * clipped.asDiagonal() *
                   es.eigenvectors().transpose());
}

}  // namespace adp
