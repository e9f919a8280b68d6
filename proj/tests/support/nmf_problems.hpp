#pragma once

// Test-support adapters that present NMF to the generic block solvers through
// deliberately naive algebra (residuals recomputed from scratch, no Gram
// caches). They serve as independent cross-checks of the production nmf
// paths and are not part of the library.

#include "ibprox/block.hpp"
#include "ibprox/matops.hpp"

namespace ibprox::testsupport {

/// NMF over 2r blocks: columns of U (blocks 0..r-1) followed by rows of V
/// (blocks r..2r-1). Provides the exact block prox of the nonnegative
/// column/row subproblem, computed from a freshly assembled residual.
class NmfColumnProblem : public BlockProblem {
public:
    NmfColumnProblem(Matrix x, int rank) : x_(std::move(x)), rank_(rank) {}

    int block_count() const override { return 2 * rank_; }
    double eval_f(const BlockVector& x) const override;
    double eval_r(int i, const Vector& xi) const override;
    Vector prox_r(int i, const Vector& v, double step) const override;
    bool has_block_prox() const override { return true; }
    Vector block_prox(int i, const BlockVector& x, const Vector& anchor, double step) const override;
    double rel_error(const BlockVector& x) const override;

    BlockVector pack(const Matrix& u, const Matrix& v) const;
    void unpack(const BlockVector& x, Matrix& u, Matrix& v) const;

private:
    Matrix x_;
    int rank_;
};

/// NMF over two flattened blocks (all of U, then all of V) with gradients
/// and Lipschitz estimates, for driving the generic proximal-gradient loop.
class NmfTwoBlockProblem : public BlockProblem {
public:
    NmfTwoBlockProblem(Matrix x, int rank) : x_(std::move(x)), rank_(rank) {}

    int block_count() const override { return 2; }
    double eval_f(const BlockVector& x) const override;
    double eval_r(int i, const Vector& xi) const override;
    Vector partial_grad(int i, const BlockVector& x) const override;
    Vector prox_r(int i, const Vector& v, double step) const override;
    double lipschitz_est(int i, const BlockVector& x) const override;
    double rel_error(const BlockVector& x) const override;

    BlockVector pack(const Matrix& u, const Matrix& v) const;
    void unpack(const BlockVector& x, Matrix& u, Matrix& v) const;

private:
    Matrix x_;
    int rank_;
};

}  // namespace ibprox::testsupport
