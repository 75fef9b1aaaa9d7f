#include "tps/execution.hpp"

#include <omp.h>

namespace tps {

namespace {
const int kDefaultWorkers = omp_get_max_threads();
}

void set_workers(int n) { omp_set_num_threads(n > 0 ? n : kDefaultWorkers); }

int max_workers() { return omp_get_num_procs(); }

}  // namespace tps
