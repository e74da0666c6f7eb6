#ifndef PHI2_PARALLEL_HPP
#define PHI2_PARALLEL_HPP

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace phi2 {

inline unsigned worker_count() {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("PHI_LDP_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && static_cast<unsigned>(cap) < n) n = static_cast<unsigned>(cap);
    }
    return n;
}

// Run fn(replica) for replica in [0, reps).  Results must be written into
// replica-indexed slots so parallel and serial execution agree exactly.
template <typename Fn>
void parallel_for_replicas(std::size_t reps, Fn&& fn, unsigned workers = 0) {
    if (workers == 0) workers = worker_count();
    if (workers <= 1 || reps <= 1) {
        for (std::size_t r = 0; r < reps; ++r) fn(r);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t r = t; r < reps; r += workers) fn(r);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace phi2

#endif
