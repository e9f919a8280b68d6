#include "ibprox/block.hpp"

#include <cmath>
#include <limits>

#include "ibprox/errors.hpp"

namespace ibprox {

bool BlockVector::same_shape(const BlockVector& other) const {
    if (blocks.size() != other.blocks.size()) return false;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].size() != other.blocks[i].size()) return false;
    }
    return true;
}

double BlockVector::squared_distance(const BlockVector& other) const {
    if (!same_shape(other)) throw DimensionError("BlockVector: shapes differ");
    double total = 0.0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        total += (blocks[i] - other.blocks[i]).squaredNorm();
    }
    return total;
}

const BregmanGenerator& BregmanGenerator::euclidean() {
    static const BregmanGenerator gen = [] {
        BregmanGenerator g;
        g.sigma = 1.0;
        g.l_h = 1.0;
        g.is_euclidean = true;
        g.grad_h = [](const Vector& u) { return u; };
        g.grad_h_conjugate = [](const Vector& u) { return u; };
        return g;
    }();
    return gen;
}

Proximable proximable_zero() {
    Proximable p;
    p.value = [](const Vector&) { return 0.0; };
    p.prox = [](const Vector& v, double) { return v; };
    return p;
}

Proximable proximable_nonneg() {
    Proximable p;
    p.value = [](const Vector& u) {
        return (u.array() < 0.0).any() ? std::numeric_limits<double>::infinity() : 0.0;
    };
    p.prox = [](const Vector& v, double) -> Vector { return v.cwiseMax(0.0); };
    return p;
}

Proximable proximable_shifted_quadratic(Vector target) {
    Proximable p;
    p.value = [target](const Vector& u) { return 0.5 * (u - target).squaredNorm(); };
    p.prox = [target](const Vector& v, double step) -> Vector {
        return (step * target + v) / (step + 1.0);
    };
    return p;
}

Vector extrapolate(const Vector& value, const Vector& previous, double coeff) {
    if (value.size() != previous.size()) {
        throw DimensionError("extrapolate: sizes differ (" + std::to_string(value.size()) + " vs " +
                             std::to_string(previous.size()) + ")");
    }
    return value + coeff * (value - previous);
}

Vector bregman_prox(const Proximable& phi, const Vector& v, double step,
                    const BregmanGenerator& gen) {
    if (step <= 0.0) throw Error("bregman_prox: step must be positive");
    if (gen.is_euclidean) {
        if (!phi.prox) throw UnsupportedError("bregman_prox: function has no Euclidean prox");
        return phi.prox(v, step);
    }
    if (!phi.bregman_prox) {
        throw UnsupportedError("bregman_prox: function has no prox under a non-Euclidean generator");
    }
    return phi.bregman_prox(v, step, gen);
}

Vector bregman_gprox(const Vector& grad, const Vector& anchor, double step,
                     const std::function<Vector(const Vector&, double)>& reg_prox,
                     const BregmanGenerator& gen) {
    if (step <= 0.0) throw Error("bregman_gprox: step must be positive");
    if (grad.size() != anchor.size()) throw DimensionError("bregman_gprox: sizes differ");
    if (gen.is_euclidean) {
        return reg_prox(anchor - step * grad, step);
    }
    const Vector point = gen.grad_h_conjugate(gen.grad_h(anchor) - step * grad);
    return reg_prox(point, step);
}

Vector bregman_gprox(const Vector& grad, const Vector& anchor, double step, const Proximable& reg,
                     const BregmanGenerator& gen) {
    if (!reg.prox) throw UnsupportedError("bregman_gprox: regularizer has no prox");
    return bregman_gprox(grad, anchor, step, reg.prox, gen);
}

double BlockProblem::eval_r(int, const Vector&) const {
    return 0.0;
}

Vector BlockProblem::partial_grad(int, const BlockVector&) const {
    throw UnsupportedError("problem does not provide block gradients");
}

Vector BlockProblem::prox_r(int, const Vector& v, double) const {
    return v;
}

double BlockProblem::lipschitz_est(int, const BlockVector&) const {
    throw UnsupportedError("problem does not provide Lipschitz estimates");
}

Vector BlockProblem::block_prox(int, const BlockVector&, const Vector&, double) const {
    throw UnsupportedError("problem does not provide an exact block prox");
}

double BlockProblem::rel_error(const BlockVector&) const {
    return std::numeric_limits<double>::quiet_NaN();
}

double BlockProblem::eval_objective(const BlockVector& x) const {
    double total = eval_f(x);
    for (int i = 0; i < x.count(); ++i) total += eval_r(i, x[i]);
    return total;
}

}  // namespace ibprox
