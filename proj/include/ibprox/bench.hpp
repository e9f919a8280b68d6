#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ibprox/ncpd.hpp"
#include "ibprox/nmf.hpp"
#include "ibprox/trace.hpp"

namespace ibprox {

enum class SyntheticKind { kLowRank, kFullRank };

/// Low-rank: X = U V with uniform(0,1) factors, so an exact rank-r
/// nonnegative factorization exists. Full-rank: X uniform(0,1) entrywise.
NmfInstance gen_synthetic_nmf(SyntheticKind kind, Index m, Index n, int rank, std::uint64_t seed);

/// CP reconstruction of uniform(0,1) factors; exactly rank-r decomposable.
NcpdInstance gen_synthetic_ncpd(Index i, Index j, Index k, int rank, std::uint64_t seed);

enum class EminPolicy { kZero, kBestObserved };

/// A run's relative-error curve shifted by the floor e_min.
struct ECurve {
    std::string run_id;
    std::string algo;
    std::vector<double> time;
    std::vector<double> value;
};

/// E(k) = relerror_k - e_min per run. Under the best-observed policy e_min is
/// the smallest final relative error among the supplied runs; under the zero
/// policy (exactly factorizable data) it is 0.
std::vector<ECurve> compute_e_curves(const std::vector<RunTraceRecord>& traces, EminPolicy policy);

struct RankingRow {
    std::string algo;
    double mean_final_e = 0.0;
    double std_final_e = 0.0;
    std::vector<int> rank_counts;  ///< entry i: times this algo placed (i+1)-th
};

struct RankingTable {
    std::vector<RankingRow> rows;
    void write_csv(std::ostream& out) const;
};

/// Final-E ranking across runs grouped by seed. Errors within 1e-12 relative
/// share the better rank.
RankingTable build_ranking(const std::vector<RunTraceRecord>& traces, EminPolicy policy);

/// Per-algo average of E over a shared 200-point log-spaced time grid.
/// Each run contributes its initial E before its first record and nothing
/// beyond its last one (no extrapolation).
struct CurvePoint {
    std::string algo;
    double time = 0.0;
    double mean_e = 0.0;
    int runs = 0;
};
std::vector<CurvePoint> average_e_on_grid(const std::vector<ECurve>& curves, int grid_points = 200);
void write_curves_csv(std::ostream& out, const std::vector<CurvePoint>& points);

struct ScheduleOverrides {
    std::optional<double> gamma_tilde;
    std::optional<double> alpha_breve;
    std::optional<int> repeat_cap;
    std::optional<double> ibp_inv_step;
};

struct RunConfig {
    enum class Problem { kNmf, kNcpd } problem = Problem::kNmf;
    SyntheticKind kind = SyntheticKind::kLowRank;  // nmf only
    Index m = 0, n = 0;                            // nmf dims
    Index dim_i = 0, dim_j = 0, dim_k = 0;         // ncpd dims
    int rank = 0;
    std::vector<std::string> algos;
    std::vector<std::uint64_t> seeds;
    double time_budget = -1.0;
    int max_outer = -1;
    OrderPolicy order = OrderPolicy::kCyclic;
    std::string out_dir;
    std::uint64_t data_seed = 0;
    std::string data_file;  ///< overrides the synthetic generator when set
    std::optional<EminPolicy> emin;  ///< default: zero for exactly factorizable data
    ScheduleOverrides overrides;

    void validate() const;
    EminPolicy emin_policy() const;
};

struct BenchResult {
    std::vector<RunTraceRecord> traces;
    RankingTable ranking;
    std::vector<CurvePoint> curves;
};

/// Runs every (algo, seed) pair on one shared instance with bit-identical
/// per-seed initializations, then writes traces.csv, ranking.csv and
/// curves.csv under config.out_dir (when set). Records are ordered by run_id
/// then k.
BenchResult run_benchmark(const RunConfig& config);

/// Ranking recomputed from an emitted traces.csv; reproduces build_ranking.
RankingTable ranking_from_trace_csv(const std::string& path, EminPolicy policy);

/// Shared per-seed initial factors.
NmfFactors nmf_init_for_seed(const NmfInstance& inst, std::uint64_t seed);
NcpdFactors ncpd_init_for_seed(const NcpdInstance& inst, std::uint64_t seed);

std::string run_id_for(const std::string& algo, std::uint64_t seed);

}  // namespace ibprox
