#include "doctest.h"

#include "test_support.hpp"
#include "xrfm/linalg.hpp"
#include "xrfm/reference.hpp"

using namespace xrfm;
using test::max_diff;
using test::random_matrix;
using test::random_psd;
using test::random_spd;
using test::random_symmetric;

TEST_CASE("cholesky_solve identity returns the right-hand side") {
    Rng rng(1);
    Matrix b = random_matrix(3, 2, rng);
    Matrix x = cholesky_solve(Matrix::identity(3), b);
    CHECK(max_diff(x, b) < 1e-14);
}

TEST_CASE("cholesky_solve diagonal scaling") {
    Matrix a(2, 2);
    a(0, 0) = 2.0;
    a(1, 1) = 2.0;
    Matrix b(2, 1, 1.0);
    Matrix x = cholesky_solve(a, b);
    CHECK(x(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(x(1, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("cholesky_solve residual on a random SPD system") {
    Rng rng(2);
    Matrix a = random_spd(20, rng);
    Matrix b = random_matrix(20, 3, rng);
    Matrix x = cholesky_solve(a, b);
    Matrix ax = matmul(a, x);
    CHECK(max_diff(ax, b) < 1e-8 * std::max(1.0, max_abs(b)));
}

TEST_CASE("cholesky_solve recovers a known solution") {
    Rng rng(3);
    Matrix a = random_spd(15, rng);
    Matrix x0 = random_matrix(15, 2, rng);
    Matrix b = matmul(a, x0);
    Matrix x = cholesky_solve(a, b);
    CHECK(test::relative_gap(x, x0) < 1e-7);
}

TEST_CASE("cholesky_solve rejects indefinite and asymmetric input") {
    Matrix bad(2, 2);
    bad(0, 0) = 1.0;
    bad(1, 1) = -1.0;
    Matrix b(2, 1, 1.0);
    CHECK_THROWS_AS(cholesky_solve(bad, b), NotPositiveDefinite);

    Matrix asym(2, 2);
    asym(0, 0) = 2.0;
    asym(0, 1) = 1.0;
    asym(1, 0) = 0.0;
    asym(1, 1) = 2.0;
    CHECK_THROWS_AS(cholesky_solve(asym, b), DimensionMismatch);
}

TEST_CASE("production solver agrees with the textbook reference") {
    Rng rng(4);
    Matrix a = random_spd(12, rng);
    Matrix b = random_matrix(12, 2, rng);
    CHECK(max_diff(cholesky_solve(a, b), ref::cholesky_solve(a, b)) < 1e-10);
}

TEST_CASE("sym_eigh on identity and diagonal input") {
    EigDecomposition eye = sym_eigh(Matrix::identity(2));
    CHECK(eye.eigenvalues[0] == doctest::Approx(1.0));
    CHECK(eye.eigenvalues[1] == doctest::Approx(1.0));

    Matrix d(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    EigDecomposition eig = sym_eigh(d);
    CHECK(eig.eigenvalues[0] == doctest::Approx(3.0));
    CHECK(eig.eigenvalues[1] == doctest::Approx(1.0));
    CHECK(std::fabs(eig.eigenvectors(0, 0)) == doctest::Approx(1.0));
    CHECK(std::fabs(eig.eigenvectors(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("sym_eigh reconstruction, orthonormality, trace") {
    Rng rng(5);
    Matrix m = random_symmetric(10, rng);
    EigDecomposition eig = sym_eigh(m);

    // descending eigenvalues
    for (std::size_t k = 1; k < 10; ++k) CHECK(eig.eigenvalues[k - 1] >= eig.eigenvalues[k]);

    // V^T V = I
    Matrix vtv = matmul(transpose(eig.eigenvectors), eig.eigenvectors);
    CHECK(max_diff(vtv, Matrix::identity(10)) < 1e-10);

    // V diag(lambda) V^T = M
    Matrix lam(10, 10);
    for (std::size_t k = 0; k < 10; ++k) lam(k, k) = eig.eigenvalues[k];
    Matrix recon = matmul(matmul(eig.eigenvectors, lam), transpose(eig.eigenvectors));
    CHECK(max_diff(recon, m) < 1e-9);

    double sum = 0.0;
    for (double v : eig.eigenvalues) sum += v;
    CHECK(std::fabs(sum - trace(m)) <= 1e-9 * std::max(1.0, std::fabs(trace(m))));
}

TEST_CASE("sym_eigh rejects asymmetric input") {
    Matrix m(2, 2);
    m(0, 1) = 1.0;
    CHECK_THROWS_AS(sym_eigh(m), DimensionMismatch);
}

TEST_CASE("top_eigenvector picks the dominant axis with a positive sign") {
    Matrix d(2, 2);
    d(0, 0) = 4.0;
    d(1, 1) = 1.0;
    std::vector<double> v = top_eigenvector(d);
    CHECK(v[0] == doctest::Approx(1.0));
    CHECK(std::fabs(v[1]) < 1e-12);
}

TEST_CASE("top_eigenvector recovers the direction of a rank-1 matrix") {
    // w with a positive largest-magnitude entry
    std::vector<double> w = {0.6, -0.8};
    if (std::fabs(w[1]) > std::fabs(w[0]) && w[1] < 0)
        for (auto& v : w) v = -v;
    Matrix m(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) m(i, j) = w[i] * w[j];
    std::vector<double> v = top_eigenvector(m);
    CHECK(v[0] == doctest::Approx(w[0]).epsilon(1e-10));
    CHECK(v[1] == doctest::Approx(w[1]).epsilon(1e-10));
}

TEST_CASE("top_eigenvector matches the full decomposition on random PSD input") {
    Rng rng(6);
    Matrix m = random_psd(8, rng);
    std::vector<double> v = top_eigenvector(m);
    EigDecomposition eig = sym_eigh(m);
    for (std::size_t k = 0; k < 8; ++k) CHECK(v[k] == doctest::Approx(eig.eigenvectors(k, 0)));
    // unit norm, maximizes the quadratic form against random probes
    double norm = 0.0, vmv = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
        norm += v[i] * v[i];
        for (std::size_t j = 0; j < 8; ++j) vmv += v[i] * m(i, j) * v[j];
    }
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(vmv == doctest::Approx(eig.eigenvalues[0]).epsilon(1e-9));
}

TEST_CASE("psd_power identity and diagonal cases") {
    CHECK(max_diff(psd_power(Matrix::identity(3), 0.5), Matrix::identity(3)) < 1e-12);

    Matrix d(2, 2);
    d(0, 0) = 4.0;
    d(1, 1) = 9.0;
    Matrix root = psd_power(d, 0.5);
    CHECK(root(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(root(1, 1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(std::fabs(root(0, 1)) < 1e-12);
}

TEST_CASE("psd_power square root squares back and power 1 is identity-like") {
    Rng rng(7);
    Matrix m = random_psd(9, rng);
    Matrix root = psd_power(m, 0.5);
    CHECK(max_diff(matmul(root, root), m) < 1e-8);
    CHECK(max_diff(psd_power(m, 1.0), m) < 1e-10);
}

TEST_CASE("psd_power clips negative eigenvalues") {
    Matrix m(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = -4.0;
    Matrix p = psd_power(m, 0.5);
    CHECK(p(0, 0) == doctest::Approx(1.0));
    CHECK(p(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("pairwise_norms arithmetic") {
    Matrix x(1, 2), z(1, 2);
    x(0, 0) = 1.0;
    x(0, 1) = 2.0;
    CHECK(pairwise_norms(x, z, 1.0)(0, 0) == doctest::Approx(3.0));
    CHECK(pairwise_norms(x, z, 2.0)(0, 0) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("pairwise_norms matches the scalar reference loop") {
    Rng rng(8);
    Matrix x = random_matrix(5, 3, rng);
    Matrix z = random_matrix(4, 3, rng);
    for (double q : {0.5, 1.0, 1.7, 2.0})
        CHECK(max_diff(pairwise_norms(x, z, q), ref::pairwise_norms(x, z, q)) < 1e-12);
}

TEST_CASE("pairwise_norms rejects out-of-range orders, self-distances vanish") {
    Rng rng(9);
    Matrix x = random_matrix(6, 4, rng);
    CHECK_THROWS_AS(pairwise_norms(x, x, 0.0), InvalidNorm);
    CHECK_THROWS_AS(pairwise_norms(x, x, 2.5), InvalidNorm);
    CHECK_THROWS_AS(pairwise_norms(x, x, -1.0), InvalidNorm);

    Matrix d = pairwise_norms(x, x, 1.3);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(d(i, i) == 0.0);
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(d(i, j) >= 0.0);
            CHECK(d(i, j) == d(j, i));
        }
    }
}
