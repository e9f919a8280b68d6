#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "ibprox/errors.hpp"
#include "ibprox/matops.hpp"
#include "ibprox/schedule.hpp"
#include "ibprox/trace.hpp"

namespace ibprox {

/// min 0.5 ||T - sum_j X1(:,j) o X2(:,j) o X3(:,j)||_F^2 over nonnegative
/// factors X1 (I x r), X2 (J x r), X3 (K x r).
struct NcpdInstance {
    Tensor3 t;
    int rank = 0;

    void validate() const;
};

using NcpdFactors = std::array<Matrix, 3>;

enum class NcpdAlgo { kIbpgA, kApgc, kAHals };

NcpdAlgo parse_ncpd_algo(const std::string& name);
std::string ncpd_algo_name(NcpdAlgo algo);

struct NcpdOptions {
    Budget budget;
    OrderPolicy order = OrderPolicy::kCyclic;

    double gamma_tilde = 0.99;  ///< cap multiplier on the Lipschitz-ratio branch
    double alpha_breve = 1.01;  ///< anchor inertia as a multiple of the gradient one

    // inner-repeat rule, as in the matrix solver
    double repeat_rho = 0.5;
    int repeat_cap = 10;
    double repeat_tol = 1e-2;

    /// Advance the momentum sequence inside the factor loop instead of once
    /// per sweep (the alternative reading of the update schedule).
    bool advance_t_per_factor = false;

    double stop_relerror = 0.0;
};

struct NcpdState {
    NcpdFactors x;
    NcpdFactors x_prev;
    std::array<double, 3> lip_cur{};   ///< Lipschitz constants of the last visit
    std::array<double, 3> lip_prev{};  ///< previous sweep's values
    double t = 1.0;                    ///< momentum sequence value
};

struct NcpdRunResult {
    NcpdState state;
    Trace trace;
};

class NcpdDivergenceError : public DivergenceError {
public:
    NcpdDivergenceError(const std::string& what, double last_objective, NcpdState state,
                        Trace trace)
        : DivergenceError(what, last_objective), state(std::move(state)), trace(std::move(trace)) {}
    NcpdState state;
    Trace trace;
};

/// Khatri-Rao chain over the factors with one mode skipped (1-based), highest
/// mode leftmost, matching mode_unfold so that T_[i] == X_i * chain^T for CP
/// tensors.
Matrix build_khatri_chain(const NcpdFactors& factors, int skip);

/// CP reconstruction of the factor triple.
Tensor3 cp_reconstruct(const NcpdFactors& factors);

/// Gradient of the fit in factor `mode` (1-based):
/// (X_i * B^T - T_[i]) * B with B the skipped Khatri-Rao chain.
Matrix ncpd_gradient(const Tensor3& t, const NcpdFactors& factors, int mode);

/// Lipschitz constant ||B^T B|| of the block gradient, computed from the
/// entrywise product of the kept factors' r x r Grams; B itself is never
/// formed. Agrees with the explicit chain Gram to rounding.
double ncpd_lipschitz(const NcpdFactors& factors, int mode);

NcpdRunResult run_ncpd(const NcpdInstance& instance, NcpdAlgo algo, const NcpdFactors& init,
                       const NcpdOptions& options, std::uint64_t seed);

}  // namespace ibprox
