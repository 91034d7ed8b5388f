#include "xrfm/threads.hpp"

#include <algorithm>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

#ifdef XRFM_HAVE_OPENBLAS
extern "C" void openblas_set_num_threads(int);
#endif

namespace xrfm {

void set_max_threads(int n) {
    n = std::max(1, n);
#ifdef _OPENMP
    omp_set_num_threads(n);
#endif
    // BLAS stays single-threaded: its threaded factorizations change their
    // reduction order with the thread count, and results here must not
    // depend on it. The OpenMP kernels above parallelize per output entry
    // and stay bit-stable at any width.
#ifdef XRFM_HAVE_OPENBLAS
    openblas_set_num_threads(1);
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void init_threads_from_env() {
#ifdef XRFM_HAVE_OPENBLAS
    openblas_set_num_threads(1);
#endif
    const char* env = std::getenv("XRFM_THREADS");
    if (env == nullptr) return;
    const int n = std::atoi(env);
    if (n > 0) set_max_threads(n);
}

} // namespace xrfm
