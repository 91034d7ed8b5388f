#pragma once

namespace xrfm {

/// Caps OpenMP and BLAS worker threads. Values below 1 are clamped to 1.
void set_max_threads(int n);

int max_threads();

/// Applies the XRFM_THREADS environment variable when set.
void init_threads_from_env();

} // namespace xrfm
