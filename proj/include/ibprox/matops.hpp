#pragma once

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <string>

#include "ibprox/rng.hpp"

namespace ibprox {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Dense 3-way tensor with dimensions (I, J, K).
///
/// Entries are stored as the mode-1 unfolding: an I x (J*K) matrix whose
/// column k*J + j holds the fiber T(:, j, k). This is the Kolda-Bader
/// unfolding convention; it makes T_[1] available without a copy and matches
/// the Khatri-Rao chain ordering used by the CP kernels, so that
/// T_[i] == X_i * chain_i^T holds exactly for CP-built tensors.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(Index i, Index j, Index k) : i_(i), j_(j), k_(k), mode1_(Matrix::Zero(i, j * k)) {}

    /// Wraps an existing mode-1 unfolding. Throws DimensionError on mismatch.
    static Tensor3 from_mode1(Matrix mode1, Index i, Index j, Index k);

    Index dim(int axis) const { return axis == 0 ? i_ : (axis == 1 ? j_ : k_); }
    std::array<Index, 3> dims() const { return {i_, j_, k_}; }
    Index size() const { return i_ * j_ * k_; }

    double operator()(Index i, Index j, Index k) const { return mode1_(i, k * j_ + j); }
    double& operator()(Index i, Index j, Index k) { return mode1_(i, k * j_ + j); }

    const Matrix& mode1() const { return mode1_; }

private:
    Index i_ = 0, j_ = 0, k_ = 0;
    Matrix mode1_;
};

/// Column-wise Kronecker (Khatri-Rao) product of an m x r and an n x r
/// matrix. Row (i*n + j) of the result is A(i, :) .* B(j, :).
Matrix khatri_rao(const Matrix& a, const Matrix& b);

/// Mode-n matricization, mode in {1, 2, 3}. Column order pairs the two free
/// indices with the lower-numbered mode running fastest.
Matrix mode_unfold(const Tensor3& t, int mode);

/// Exact inverse of mode_unfold.
Tensor3 mode_fold(const Matrix& m, int mode, const std::array<Index, 3>& dims);

struct PowerIterResult {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
///
/// The start vector is the normalized all-ones vector, so the estimate is
/// deterministic. Convergence is declared when the Rayleigh quotient changes
/// by less than tol relatively; if max_iter is exhausted first, the best
/// estimate is returned with converged == false. A matrix whose row sums all
/// vanish is reported as 0 (the ones vector lies in its kernel).
PowerIterResult operator_norm_psd(const Matrix& m, double tol = 1e-9, int max_iter = 1000);

/// Entrywise max(0, .).
Matrix nonneg_project(Matrix m);

double frobenius_norm(const Matrix& m);
double frobenius_norm(const Tensor3& t);

/// Fills an rows x cols matrix with uniform(0,1) draws, column by column.
Matrix random_uniform_matrix(Index rows, Index cols, Rng& rng);

// Text formats. Matrices: a "rows cols" header line followed by one line per
// row of space-separated decimals. Tensors: an "I J K" header line followed
// by the mode-1 unfolding in the matrix format. All values are written with
// 17 significant digits so that write/read round-trips bit-exactly.
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);
void save_matrix(const std::string& path, const Matrix& m);
Matrix load_matrix(const std::string& path);

void write_tensor(std::ostream& out, const Tensor3& t);
Tensor3 read_tensor(std::istream& in);
void save_tensor(const std::string& path, const Tensor3& t);
Tensor3 load_tensor(const std::string& path);

/// printf "%.17g" into a std::string; shared by the text and CSV writers.
std::string format_g17(double value);

}  // namespace ibprox
