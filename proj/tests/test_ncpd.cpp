#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>

#include "ibprox/errors.hpp"
#include "ibprox/ncpd.hpp"

using namespace ibprox;

namespace {

NcpdFactors random_factors(Index i, Index j, Index k, int rank, std::uint64_t seed) {
    Rng rng(seed);
    return {random_uniform_matrix(i, rank, rng), random_uniform_matrix(j, rank, rng),
            random_uniform_matrix(k, rank, rng)};
}

Tensor3 triple_loop_reconstruct(const NcpdFactors& f) {
    Tensor3 t(f[0].rows(), f[1].rows(), f[2].rows());
    for (Index k = 0; k < f[2].rows(); ++k)
        for (Index j = 0; j < f[1].rows(); ++j)
            for (Index i = 0; i < f[0].rows(); ++i) {
                double sum = 0.0;
                for (Index q = 0; q < f[0].cols(); ++q)
                    sum += f[0](i, q) * f[1](j, q) * f[2](k, q);
                t(i, j, k) = sum;
            }
    return t;
}

double tensor_objective(const Tensor3& t, const NcpdFactors& f) {
    return 0.5 * (t.mode1() - cp_reconstruct(f).mode1()).squaredNorm();
}

}  // namespace

TEST_CASE("khatri chain skips the requested mode") {
    const NcpdFactors f = random_factors(3, 4, 5, 2, 1);
    CHECK((build_khatri_chain(f, 1) - khatri_rao(f[2], f[1])).norm() == 0.0);
    CHECK((build_khatri_chain(f, 2) - khatri_rao(f[2], f[0])).norm() == 0.0);
    CHECK((build_khatri_chain(f, 3) - khatri_rao(f[1], f[0])).norm() == 0.0);
    CHECK_THROWS_AS(build_khatri_chain(f, 0), DimensionError);
}

TEST_CASE("rank-1 chain is the Kronecker vector of the kept columns") {
    const NcpdFactors f = random_factors(3, 4, 5, 1, 2);
    const Matrix chain = build_khatri_chain(f, 1);
    REQUIRE(chain.rows() == 20);
    for (Index k = 0; k < 5; ++k)
        for (Index j = 0; j < 4; ++j) CHECK(chain(k * 4 + j, 0) == f[2](k, 0) * f[1](j, 0));
}

TEST_CASE("cp reconstruction matches the triple-loop oracle and the unfolding identity") {
    const NcpdFactors f = random_factors(4, 5, 3, 3, 3);
    const Tensor3 t = cp_reconstruct(f);
    const Tensor3 oracle = triple_loop_reconstruct(f);
    CHECK((t.mode1() - oracle.mode1()).norm() <= 1e-12 * oracle.mode1().norm());

    const double scale = frobenius_norm(t);
    for (int mode = 1; mode <= 3; ++mode) {
        const Matrix lhs = mode_unfold(t, mode);
        const Matrix rhs = f[static_cast<std::size_t>(mode - 1)] *
                           build_khatri_chain(f, mode).transpose();
        CHECK((lhs - rhs).norm() <= 1e-12 * scale);
    }
}

TEST_CASE("gradient vanishes at an exact fit") {
    const NcpdFactors f = random_factors(4, 3, 5, 2, 5);
    const Tensor3 t = cp_reconstruct(f);
    for (int mode = 1; mode <= 3; ++mode) {
        CHECK(ncpd_gradient(t, f, mode).norm() <= 1e-10);
    }
}

TEST_CASE("gradient matches central finite differences") {
    Rng rng(7);
    const NcpdFactors f = random_factors(4, 5, 6, 3, 11);
    Tensor3 t(4, 5, 6);
    for (Index k = 0; k < 6; ++k)
        for (Index j = 0; j < 5; ++j)
            for (Index i = 0; i < 4; ++i) t(i, j, k) = rng.uniform01();

    const double h = 1e-5;
    for (int mode = 1; mode <= 3; ++mode) {
        const Matrix grad = ncpd_gradient(t, f, mode);
        const std::size_t mi = static_cast<std::size_t>(mode - 1);
        for (Index r = 0; r < f[mi].rows(); ++r) {
            for (Index c = 0; c < f[mi].cols(); ++c) {
                NcpdFactors fp = f, fm = f;
                fp[mi](r, c) += h;
                fm[mi](r, c) -= h;
                const double fd = (tensor_objective(t, fp) - tensor_objective(t, fm)) / (2.0 * h);
                CHECK(std::abs(grad(r, c) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("gradient with one factor zeroed") {
    NcpdFactors f = random_factors(3, 4, 5, 2, 13);
    Rng rng(17);
    Tensor3 t(3, 4, 5);
    for (Index k = 0; k < 5; ++k)
        for (Index j = 0; j < 4; ++j)
            for (Index i = 0; i < 3; ++i) t(i, j, k) = rng.uniform01();
    f[0].setZero();
    const Matrix grad = ncpd_gradient(t, f, 1);
    const Matrix expected = -mode_unfold(t, 1) * build_khatri_chain(f, 1);
    CHECK((grad - expected).norm() <= 1e-12 * std::max(1.0, expected.norm()));
}

TEST_CASE("lipschitz constant closed forms") {
    // rank 1: ||B^T B|| = (||b|| ||c||)^2 for kept columns b, c
    const NcpdFactors f = random_factors(3, 4, 5, 1, 19);
    const double expected = f[1].col(0).squaredNorm() * f[2].col(0).squaredNorm();
    CHECK(ncpd_lipschitz(f, 1) == doctest::Approx(expected).epsilon(1e-10));

    // orthonormal kept factors give 1
    Rng rng(23);
    const Matrix a = random_uniform_matrix(6, 2, rng);
    const Matrix b = random_uniform_matrix(7, 2, rng);
    const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(6, 2);
    const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(7, 2);
    NcpdFactors ortho = {Matrix::Ones(4, 2), qa, qb};
    CHECK(ncpd_lipschitz(ortho, 1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("hadamard-of-grams lipschitz equals the explicit chain eigen-oracle") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const NcpdFactors f = random_factors(5, 4, 6, 3, 100 + seed);
        for (int mode = 1; mode <= 3; ++mode) {
            const Matrix chain = build_khatri_chain(f, mode);
            Eigen::SelfAdjointEigenSolver<Matrix> eig(chain.transpose() * chain);
            const double expected = eig.eigenvalues().maxCoeff();
            CHECK(std::abs(ncpd_lipschitz(f, mode) - expected) <=
                  1e-8 * std::max(1.0, expected));
        }
    }
}

TEST_CASE("exact rank-r init is a fixed point with zero relerror") {
    const NcpdFactors f = random_factors(5, 4, 6, 2, 31);
    NcpdInstance inst;
    inst.t = cp_reconstruct(f);
    inst.rank = 2;
    NcpdOptions opt;
    opt.budget = Budget{5, -1.0};
    for (NcpdAlgo algo : {NcpdAlgo::kIbpgA, NcpdAlgo::kApgc, NcpdAlgo::kAHals}) {
        const auto result = run_ncpd(inst, algo, f, opt, 1);
        CHECK(result.trace.front().relerror <= 1e-12);
        // later records go through the Gram-cached objective, whose
        // cancellation floor sits near sqrt(machine eps) in relative error
        CHECK(result.trace.back().relerror <= 1e-7);
        for (int m = 0; m < 3; ++m) {
            CHECK((result.state.x[static_cast<std::size_t>(m)] -
                   f[static_cast<std::size_t>(m)])
                      .norm() <= 1e-10);
        }
    }
}

TEST_CASE("momentum coefficient is zero on the first sweep") {
    // t_0 = 1 gives hat_w = (t_0 - 1)/t_1 = 0, so the first sweep of every
    // factor is un-extrapolated: one plain projected gradient sweep from the
    // init must match the solver's first sweep exactly.
    const NcpdFactors init = random_factors(4, 5, 3, 2, 37);
    Rng rng(41);
    Tensor3 noise(4, 5, 3);
    for (Index k = 0; k < 3; ++k)
        for (Index j = 0; j < 5; ++j)
            for (Index i = 0; i < 4; ++i) noise(i, j, k) = rng.uniform01();
    NcpdInstance inst;
    inst.t = noise;
    inst.rank = 2;

    NcpdOptions opt;
    opt.budget = Budget{1, -1.0};
    opt.repeat_cap = 1;
    const auto result = run_ncpd(inst, NcpdAlgo::kIbpgA, inst.rank == 2 ? init : init, opt, 1);

    NcpdFactors manual = init;
    for (int mode = 1; mode <= 3; ++mode) {
        const std::size_t mi = static_cast<std::size_t>(mode - 1);
        const Matrix grad = ncpd_gradient(noise, manual, mode);
        const double lips = ncpd_lipschitz(manual, mode);
        manual[mi] = (manual[mi] - grad / lips).cwiseMax(0.0);
    }
    for (int m = 0; m < 3; ++m) {
        const std::size_t mi = static_cast<std::size_t>(m);
        CHECK((result.state.x[mi] - manual[mi]).norm() <=
              1e-12 * std::max(1.0, manual[mi].norm()));
    }
}

TEST_CASE("zero inertia cap degenerates to monotone projected block descent") {
    const NcpdFactors truth = random_factors(6, 5, 4, 3, 43);
    NcpdInstance inst;
    inst.t = cp_reconstruct(truth);
    inst.rank = 3;
    const NcpdFactors init = random_factors(6, 5, 4, 3, 47);

    NcpdOptions opt;
    opt.budget = Budget{25, -1.0};
    opt.gamma_tilde = 0.0;  // w = min(hat_w, 0) = 0 throughout
    opt.repeat_cap = 1;
    const auto result = run_ncpd(inst, NcpdAlgo::kIbpgA, init, opt, 1);
    for (std::size_t i = 1; i < result.trace.size(); ++i) {
        CHECK(result.trace[i].objective <=
              result.trace[i - 1].objective * (1.0 + 1e-12) + 1e-15);
    }
}

TEST_CASE("factors stay nonnegative and the solver is seed-deterministic") {
    const NcpdFactors truth = random_factors(5, 6, 4, 2, 53);
    NcpdInstance inst;
    inst.t = cp_reconstruct(truth);
    inst.rank = 2;
    const NcpdFactors init = random_factors(5, 6, 4, 2, 59);
    NcpdOptions opt;
    opt.budget = Budget{20, -1.0};
    opt.order = OrderPolicy::kRandomPermutation;

    for (NcpdAlgo algo : {NcpdAlgo::kIbpgA, NcpdAlgo::kApgc, NcpdAlgo::kAHals}) {
        const auto a = run_ncpd(inst, algo, init, opt, 5);
        const auto b = run_ncpd(inst, algo, init, opt, 5);
        for (int m = 0; m < 3; ++m) {
            const std::size_t mi = static_cast<std::size_t>(m);
            CHECK(a.state.x[mi].minCoeff() >= 0.0);
            CHECK(a.state.x[mi] == b.state.x[mi]);
        }
    }
}

TEST_CASE("per-factor momentum advance is available behind the option") {
    const NcpdFactors truth = random_factors(5, 5, 5, 2, 61);
    NcpdInstance inst;
    inst.t = cp_reconstruct(truth);
    inst.rank = 2;
    const NcpdFactors init = random_factors(5, 5, 5, 2, 67);
    NcpdOptions per_sweep;
    per_sweep.budget = Budget{10, -1.0};
    NcpdOptions per_factor = per_sweep;
    per_factor.advance_t_per_factor = true;

    const auto a = run_ncpd(inst, NcpdAlgo::kIbpgA, init, per_sweep, 1);
    const auto b = run_ncpd(inst, NcpdAlgo::kIbpgA, init, per_factor, 1);
    // the two readings advance the momentum sequence at different speeds
    CHECK(a.state.t != b.state.t);
    CHECK(std::isfinite(b.trace.back().objective));
}

TEST_CASE("invalid inputs are rejected") {
    CHECK_THROWS_AS(parse_ncpd_algo("IBP"), Error);

    const NcpdFactors f = random_factors(4, 4, 4, 2, 71);
    NcpdInstance inst;
    inst.t = cp_reconstruct(f);
    inst.rank = 2;
    NcpdOptions opt;
    opt.budget = Budget{1, -1.0};
    const NcpdFactors wrong = random_factors(4, 4, 3, 2, 73);
    CHECK_THROWS_AS(run_ncpd(inst, NcpdAlgo::kIbpgA, wrong, opt, 1), DimensionError);

    NcpdInstance neg;
    neg.t = cp_reconstruct(f);
    neg.t(0, 0, 0) = -1.0;
    neg.rank = 2;
    CHECK_THROWS_AS(run_ncpd(neg, NcpdAlgo::kIbpgA, f, opt, 1), Error);
}
