// Compares the OpenMP kernels against the serial reference loops and the
// LAPACK-backed solver against the textbook one.

#include <chrono>
#include <cstdio>
#include <functional>

#include "xrfm/kernels.hpp"
#include "xrfm/leaf_rfm.hpp"
#include "xrfm/reference.hpp"
#include "xrfm/rng.hpp"
#include "xrfm/threads.hpp"

using namespace xrfm;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

double time_of(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial_s, double parallel_s) {
    std::printf("%-24s serial %8.3fs   parallel %8.3fs   speedup %5.2fx\n", name, serial_s,
                parallel_s, serial_s / parallel_s);
}

} // namespace

int main() {
    init_threads_from_env();
    std::printf("threads: %d\n", max_threads());

    Rng rng(7);
    const std::size_t n = 1500, m = 1500, d = 32;
    Matrix x = random_matrix(n, d, rng);
    Matrix z = random_matrix(m, d, rng);

    KernelSpec laplace;
    laplace.p = 1.0;
    laplace.q_mode = QMode::euclidean;
    laplace.bandwidth = 8.0;

    KernelSpec product;
    product.p = 1.3;
    product.q_mode = QMode::product;
    product.bandwidth = 8.0;

    report("pairwise_norms q=2",
           time_of([&] { (void)ref::pairwise_norms(x, z, 2.0); }),
           time_of([&] { (void)pairwise_norms(x, z, 2.0); }));

    report("kernel_matrix K_{1,2}",
           time_of([&] { (void)ref::kernel_matrix(laplace, x, z); }),
           time_of([&] { (void)kernel_matrix(laplace, x, z); }));

    report("kernel_matrix K_{p,p}",
           time_of([&] { (void)ref::kernel_matrix(product, x, z); }),
           time_of([&] { (void)kernel_matrix(product, x, z); }));

    Matrix weights = random_matrix(m, 4, rng);
    report("gradient batch",
           time_of([&] {
               for (std::size_t i = 0; i < n; ++i)
                   (void)ref::kernel_gradient(laplace, x.row(i), z, weights);
           }),
           time_of([&] {
               (void)detail::predictor_gradients(laplace, x, z, weights, false, nullptr, nullptr);
           }));

    const std::size_t ns = 900;
    Matrix g = random_matrix(ns, 64, rng);
    Matrix spd = ref::matmul(g, transpose(g));
    add_diagonal(spd, 1.0);
    Matrix b = random_matrix(ns, 4, rng);
    report("cholesky_solve",
           time_of([&] { (void)ref::cholesky_solve(spd, b); }),
           time_of([&] { (void)cholesky_solve(spd, b); }));

    return 0;
}
