#include "dpslm/parallel.hpp"

namespace dpslm {

namespace {
std::atomic<unsigned> g_worker_threads{0};
}

void set_worker_threads(unsigned n) { g_worker_threads.store(n); }

unsigned worker_threads() { return g_worker_threads.load(); }

}  // namespace dpslm
