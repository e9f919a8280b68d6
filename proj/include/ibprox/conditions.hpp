#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ibprox {

/// Feasibility of one per-update inequality: lhs >= rhs with
/// margin = lhs - rhs. Indices are 1-based to match the report schema.
struct ConditionEntry {
    int block = 1;
    int k = 1;
    int update = 1;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    bool feasible = false;
};

struct ConditionReport {
    std::string variant;
    std::vector<ConditionEntry> entries;
    bool feasible = false;

    /// CSV schema: variant,i,k,m,lhs,rhs,margin,feasible
    void write_csv(std::ostream& out) const;
};

/// Proximal-only (IBP) parameter sequences of one block over one outer loop,
/// plus the generator constants. The next-loop carry wraps to update 1, so a
/// constant schedule is checked at its stationary point.
struct IbpParams {
    std::vector<double> inertia;  ///< per update m = 1..d
    std::vector<double> step;
    double sigma = 1.0;
    double l_h = 1.0;
};

enum class IbpVariant { kBase, kBlockConvex };

/// Sufficient-decrease condition for the IBP parameters. Base variant:
/// (1-nu) sigma / (2 step_m) >= delta * carry_{m+1}; the block-convex
/// relaxation doubles the left side (equivalently allows carries twice as
/// large). carry_m = (l_h * inertia_m)^2 / (2 nu sigma step_m).
ConditionReport check_ibp_condition(const std::vector<IbpParams>& blocks, double nu, double delta,
                                    IbpVariant variant);

/// Proximal-gradient (IBPG) parameter sequences of one block. The stepsize
/// is implied by the variant (sigma/(kappa L), sigma/L or 1/L) and is not an
/// input.
struct IbpgParams {
    std::vector<double> inertia;       ///< anchor extrapolation, per update
    std::vector<double> grad_inertia;  ///< gradient extrapolation, per update
    std::vector<double> lipschitz;     ///< block gradient Lipschitz, per update
    double sigma = 1.0;
    double l_h = 1.0;
};

enum class IbpgVariant { kBase, kConvexReg, kBlockConvex };

/// Sufficient-decrease condition for the IBPG parameters in its three
/// variants. The block-convex variant assumes the Euclidean generator and
/// rejects any block whose (sigma, l_h) differ from (1, 1).
ConditionReport check_ibpg_condition(const std::vector<IbpgParams>& blocks, double nu, double delta,
                                     double kappa, IbpgVariant variant);

/// Largest constant inertia feasible for a constant-step IBP schedule at the
/// given (nu, delta). The stepsize cancels, leaving
/// sigma/l_h * sqrt(nu (1-nu) / delta), doubled for the block-convex variant.
double max_feasible_ibp_inertia(double nu, double delta, IbpVariant variant, double sigma = 1.0,
                                double l_h = 1.0);

/// Largest delta for which a constant IBPG schedule (inertia, grad_inertia,
/// constant Lipschitz) stays feasible; feasibility means the result exceeds
/// 1. Covers all three variants.
double max_feasible_ibpg_delta(double inertia, double grad_inertia, double nu, double kappa,
                               IbpgVariant variant, double sigma = 1.0, double l_h = 1.0);

}  // namespace ibprox
