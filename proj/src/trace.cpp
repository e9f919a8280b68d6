#include "ibprox/trace.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "ibprox/errors.hpp"
#include "ibprox/matops.hpp"

namespace ibprox {

void write_trace_csv(std::ostream& out, const std::vector<RunTraceRecord>& records) {
    out << "run_id,algo,k,elapsed_s,objective,relerror\n";
    for (const auto& r : records) {
        out << r.run_id << ',' << r.algo << ',' << r.point.k << ',' << format_g17(r.point.elapsed_s)
            << ',' << format_g17(r.point.objective) << ',' << format_g17(r.point.relerror) << '\n';
    }
}

std::vector<RunTraceRecord> read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("trace csv: empty file");
    std::vector<RunTraceRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        RunTraceRecord r;
        std::string field;
        if (!std::getline(ss, r.run_id, ',')) throw IoError("trace csv: bad line: " + line);
        if (!std::getline(ss, r.algo, ',')) throw IoError("trace csv: bad line: " + line);
        try {
            std::getline(ss, field, ',');
            r.point.k = std::stoi(field);
            std::getline(ss, field, ',');
            r.point.elapsed_s = std::stod(field);
            std::getline(ss, field, ',');
            r.point.objective = std::stod(field);
            std::getline(ss, field, ',');
            r.point.relerror = std::stod(field);
        } catch (const std::exception&) {
            throw IoError("trace csv: bad numeric field in line: " + line);
        }
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace ibprox
