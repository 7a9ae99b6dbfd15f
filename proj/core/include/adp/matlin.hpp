// Symmetric-matrix calculus used throughout the library: half-vectorization
// (svec / smat), column stacking (vec / unvec), the uu-Schur complement,
// spectral queries, Moore-Penrose pseudoinverse and an upper Cholesky factor.
//
// svec ordering is the row-major upper triangle with off-diagonal entries
// scaled by sqrt(2):
//   svec(Y) = [y11, √2 y12, ..., √2 y1n, y22, √2 y23, ..., ynn]
// which makes svec an isometry, svec(Y)ᵀ svec(Z) = tr(YZ).

#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace adp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Relative singular-value cutoff shared by every pseudoinverse in the library.
inline constexpr double kPinvRelativeCutoff = 1e-12;

/// Eigenvalue floor below which a symmetric matrix is not treated as PSD.
inline constexpr double kPsdTolerance = 1e-9;

/// Dense real symmetric matrix. Construction symmetrizes its input as
/// (M + Mᵀ)/2, so `matrix()` always equals its transpose exactly.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix zero(Eigen::Index n);
  static SymMatrix identity(Eigen::Index n);
  static SymMatrix scaled_identity(Eigen::Index n, double s);

  const Matrix& matrix() const noexcept { return data_; }
  Eigen::Index dim() const noexcept { return data_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return data_(i, j); }

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator*(double s) const;

 private:
  Matrix data_;
};

inline SymMatrix operator*(double s, const SymMatrix& m) { return m * s; }

/// Half-vectorization of a symmetric matrix (length n(n+1)/2).
struct SvecVector {
  Vector data;
  Eigen::Index n = 0;
};

/// n(n+1)/2.
constexpr std::size_t tri(std::size_t n) { return n * (n + 1) / 2; }

/// Inverse of `tri`; throws DimensionError when `len` is not triangular.
Eigen::Index triangular_root(std::size_t len);

SvecVector svec(const SymMatrix& y);
SymMatrix smat(const SvecVector& v);
/// smat on a raw vector whose length must be triangular.
SymMatrix smat(const Vector& v);

/// Column stacking.
Vector vec(const Matrix& x);
Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols);

Matrix kron(const Matrix& a, const Matrix& b);

/// svec(v vᵀ).
SvecVector tilde(const Vector& v);

/// Writes svec(v vᵀ) into `out` (length tri(v.size())) without allocating.
void tilde_into(const Eigen::Ref<const Vector>& v, Eigen::Ref<Vector> out);

/// Removes the last entry. Throws DimensionError on empty input.
Vector drop_last(const Vector& v);

/// Q[xx] − Q[ux]ᵀ Q[uu]⁻¹ Q[ux] for the partition at index `n`.
/// Throws SingularityError when the uu block has condition number above
/// `max_condition` (or is not invertible).
SymMatrix schur_uu(const SymMatrix& q, Eigen::Index n,
                   double max_condition = 1e12);

double spectral_radius(const Matrix& m);
double eig_min(const SymMatrix& y);
double eig_max(const SymMatrix& y);
/// Spectral norm ‖M‖₂.
double norm2(const Matrix& m);

/// SVD pseudoinverse with relative cutoff `rel_tol`·σ_max.
Matrix pinv(const Matrix& m, double rel_tol = kPinvRelativeCutoff);

/// Numerical rank with the same cutoff convention as `pinv`.
Eigen::Index numerical_rank(const Matrix& m, double rel_tol = kPinvRelativeCutoff);

/// Upper-triangular U with UᵀU = Y for PSD Y (zero rows where Y is
/// singular). Throws NotPsdError on indefinite input.
Matrix chol_upper(const SymMatrix& y);

/// eig_min(y) ≥ −tol.
bool is_psd(const SymMatrix& y, double tol = kPsdTolerance);

/// Projects onto the PSD cone by clipping negative eigenvalues.
SymMatrix project_psd(const SymMatrix& y);

}  // namespace adp
