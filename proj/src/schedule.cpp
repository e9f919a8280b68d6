#include "ibprox/schedule.hpp"

#include <numeric>

#include "ibprox/errors.hpp"

namespace ibprox {

std::vector<int> select_blocks(OrderPolicy policy, int s, int t_k, Rng& rng) {
    if (s < 1) throw DimensionError("select_blocks: need at least one block");
    if (t_k < s) {
        throw Error("select_blocks: inner length " + std::to_string(t_k) + " < block count " +
                    std::to_string(s) + "; every block must be visited");
    }
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(t_k));
    switch (policy) {
        case OrderPolicy::kCyclic: {
            if (t_k % s != 0) {
                throw Error("select_blocks: cyclic order needs T_k to be a multiple of the block count");
            }
            for (int j = 0; j < t_k; ++j) order.push_back(j % s);
            break;
        }
        case OrderPolicy::kRandomPermutation: {
            std::vector<int> perm(static_cast<std::size_t>(s));
            while (static_cast<int>(order.size()) < t_k) {
                std::iota(perm.begin(), perm.end(), 0);
                rng.shuffle(perm);
                for (int b : perm) {
                    if (static_cast<int>(order.size()) == t_k) break;
                    order.push_back(b);
                }
            }
            break;
        }
    }
    return order;
}

}  // namespace ibprox
