#pragma once

#include <functional>
#include <vector>

#include "ibprox/matops.hpp"

namespace ibprox {

/// The iterate of a block problem: one dense vector per block.
struct BlockVector {
    std::vector<Vector> blocks;

    BlockVector() = default;
    explicit BlockVector(std::vector<Vector> b) : blocks(std::move(b)) {}

    int count() const { return static_cast<int>(blocks.size()); }
    Vector& operator[](int i) { return blocks[static_cast<std::size_t>(i)]; }
    const Vector& operator[](int i) const { return blocks[static_cast<std::size_t>(i)]; }

    bool same_shape(const BlockVector& other) const;
    /// Sum over blocks of the squared Euclidean distance.
    double squared_distance(const BlockVector& other) const;
};

/// Strongly convex generating function H for Bregman proximal maps, carried
/// as its gradient and conjugate gradient plus the (sigma, L_H) bounds.
/// Only the Euclidean generator is built in; other divergences plug in
/// through the same interface.
struct BregmanGenerator {
    double sigma = 1.0;
    double l_h = 1.0;
    bool is_euclidean = true;
    std::function<Vector(const Vector&)> grad_h;
    std::function<Vector(const Vector&)> grad_h_conjugate;

    static const BregmanGenerator& euclidean();
};

/// A function phi whose proximal map is available in closed form. `value`
/// may return +inf for indicator functions. `prox` solves
/// argmin phi(u) + ||u - v||^2 / (2 step). `bregman_prox`, when set, solves
/// the same problem with a non-Euclidean distance.
struct Proximable {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&, double)> prox;
    std::function<Vector(const Vector&, double, const BregmanGenerator&)> bregman_prox;
};

Proximable proximable_zero();
Proximable proximable_nonneg();
/// phi(u) = 0.5 * ||u - target||^2.
Proximable proximable_shifted_quadratic(Vector target);

/// value + coeff * (value - previous).
Vector extrapolate(const Vector& value, const Vector& previous, double coeff);

/// Bregman proximal map of phi at v with stepsize `step`: the minimizer of
/// phi(u) + D_H(u, v) / step. Throws UnsupportedError when phi cannot be
/// proxed under the supplied generator.
Vector bregman_prox(const Proximable& phi, const Vector& v, double step, const BregmanGenerator& gen);

/// Proximal gradient map with separate gradient and anchor points: applies
/// the prox of `reg` at grad_h_conjugate(grad_h(anchor) - step * grad), which
/// in the Euclidean case is prox(anchor - step * grad). `grad` is the
/// gradient of the smooth part evaluated at the caller's gradient point.
Vector bregman_gprox(const Vector& grad, const Vector& anchor, double step,
                     const std::function<Vector(const Vector&, double)>& reg_prox,
                     const BregmanGenerator& gen);
Vector bregman_gprox(const Vector& grad, const Vector& anchor, double step, const Proximable& reg,
                     const BregmanGenerator& gen);

/// A composite objective f(x) + sum_i r_i(x_i) over s blocks, presented to
/// the solvers through evaluations, per-block gradients, per-block proxes
/// and Lipschitz estimates. Defaults mark the optional pieces unavailable.
class BlockProblem {
public:
    virtual ~BlockProblem() = default;

    virtual int block_count() const = 0;
    virtual double eval_f(const BlockVector& x) const = 0;

    /// r_i at a point; 0 when the problem has no non-smooth part.
    virtual double eval_r(int i, const Vector& xi) const;

    /// Gradient of f in block i at x (other blocks fixed).
    virtual Vector partial_grad(int i, const BlockVector& x) const;

    /// Euclidean prox of r_i; identity when r_i == 0.
    virtual Vector prox_r(int i, const Vector& v, double step) const;

    /// Lipschitz constant of the block-i gradient at the current other blocks.
    virtual double lipschitz_est(int i, const BlockVector& x) const;

    /// Exact minimizer of f_i + r_i + ||x_i - anchor||^2 / (2 step), when the
    /// problem has one in closed form.
    virtual bool has_block_prox() const { return false; }
    virtual Vector block_prox(int i, const BlockVector& x, const Vector& anchor, double step) const;

    /// Problem-specific relative error for traces; NaN when undefined.
    virtual double rel_error(const BlockVector& x) const;

    /// f + sum of r_i.
    double eval_objective(const BlockVector& x) const;
};

}  // namespace ibprox
