#pragma once

#include <chrono>
#include <iosfwd>
#include <string>
#include <vector>

namespace ibprox {

/// One sampled point of a solver run.
struct TraceRecord {
    int k = 0;            ///< outer iteration
    double elapsed_s = 0; ///< wall-clock seconds, or k in deterministic mode
    double objective = 0;
    double relerror = 0;
};

using Trace = std::vector<TraceRecord>;

/// Stop after max_outer iterations, after `seconds` of wall time, or on
/// whichever fires first when both are set. At least one must be set.
struct Budget {
    int max_outer = -1;
    double seconds = -1.0;

    bool valid() const { return max_outer >= 0 || seconds > 0.0; }
    /// Without a wall-clock component the run is reproducible and traces use
    /// the outer index as the time axis.
    bool deterministic() const { return seconds <= 0.0; }
};

/// Time source for a single run; deterministic mode reports the iteration
/// index instead of wall time so repeated runs emit identical traces.
class RunClock {
public:
    explicit RunClock(bool deterministic)
        : deterministic_(deterministic), start_(std::chrono::steady_clock::now()) {}

    double elapsed(int k) const {
        if (deterministic_) return static_cast<double>(k);
        return wall_seconds();
    }

    double wall_seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    bool deterministic_;
    std::chrono::steady_clock::time_point start_;
};

struct RunTraceRecord {
    std::string run_id;
    std::string algo;
    TraceRecord point;
};

/// CSV schema: run_id,algo,k,elapsed_s,objective,relerror (header included).
void write_trace_csv(std::ostream& out, const std::vector<RunTraceRecord>& records);
std::vector<RunTraceRecord> read_trace_csv(std::istream& in);

}  // namespace ibprox
