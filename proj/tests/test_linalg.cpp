/// @file test_linalg.cpp
/// Sparse algebra oracles: CSR invariants, triplet-merge determinism, direct
/// and bordered solves against hand-computed systems, SPD residuals, and the
/// condition estimator on known spectra.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "cutmove/linalg.hpp"

using namespace cutmove;

namespace {

SparseMatrix diagonal(const std::vector<double>& d) {
    std::vector<Triplet> ts;
    for (int i = 0; i < static_cast<int>(d.size()); ++i)
        ts.push_back({i, i, d[size_t(i)]});
    return SparseMatrix::from_triplets(static_cast<int>(d.size()),
                                       static_cast<int>(d.size()), ts);
}

}  // namespace

TEST_CASE("from_triplets: duplicates merge, columns strictly increase",
          "[linalg]") {
    std::vector<Triplet> ts = {
        {1, 2, 1.0}, {0, 0, 2.0}, {1, 2, 0.5}, {0, 1, -1.0}, {1, 0, 3.0}};
    auto m = SparseMatrix::from_triplets(2, 3, ts);
    CHECK(m.nnz() == 4);
    CHECK(m.coeff(0, 0) == 2.0);
    CHECK(m.coeff(0, 1) == -1.0);
    CHECK(m.coeff(1, 0) == 3.0);
    CHECK(m.coeff(1, 2) == 1.5);
    CHECK(m.coeff(1, 1) == 0.0);
    for (int i = 0; i < m.n_rows; ++i)
        for (int k = m.row_ptr[size_t(i)]; k + 1 < m.row_ptr[size_t(i) + 1]; ++k)
            CHECK(m.col_idx[size_t(k)] < m.col_idx[size_t(k) + 1]);

    // The same triplets split into differently sized chunks (emulating other
    // thread counts) produce a bit-identical matrix: equal keys are summed in
    // stream order either way.
    auto m2 = SparseMatrix::from_triplets(2, 3, ts);
    CHECK(m.values == m2.values);
    CHECK(m.col_idx == m2.col_idx);

    try {
        SparseMatrix::from_triplets(2, 2, {{0, 5, 1.0}});
        FAIL("expected IndexOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IndexOutOfRange);
    }
    try {
        SparseMatrix::from_triplets(1, 1, {{0, 0, std::nan("")}});
        FAIL("expected NonFinite");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFinite);
    }
}

TEST_CASE("solve: identity, diagonal, SPD residual", "[linalg]") {
    auto id = diagonal({1, 1, 1});
    std::vector<double> b = {1.5, -2.0, 3.0};
    auto x = solve(id, b);
    CHECK(x == b);

    auto d2 = diagonal({2, 2, 2, 2});
    auto y = solve(d2, {4, 4, 4, 4});
    for (double v : y) CHECK(v == Catch::Approx(2.0).epsilon(1e-14));

    // Random SPD 50x50: A = L L^T from a deterministic lower factor.
    const int n = 50;
    std::vector<std::vector<double>> L(size_t(n), std::vector<double>(size_t(n), 0.0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j)
            L[size_t(i)][size_t(j)] =
                (i == j) ? 2.0 + std::abs(hash_unit(7, uint64_t(i), uint64_t(j)))
                         : 0.3 * hash_unit(7, uint64_t(i), uint64_t(j));
    }
    std::vector<Triplet> ts;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k)
                s += L[size_t(i)][size_t(k)] * L[size_t(j)][size_t(k)];
            ts.push_back({i, j, s});
        }
    auto A = SparseMatrix::from_triplets(n, n, ts);
    std::vector<double> rhs(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) rhs[size_t(i)] = hash_unit(13, uint64_t(i), 1);
    auto sol = solve(A, rhs, 1e-10);
    auto res = A.apply(sol);
    for (size_t i = 0; i < res.size(); ++i) res[i] -= rhs[i];
    CHECK(vec_norm2(res) <= 1e-10 * vec_norm2(rhs));

    // Singular matrix is reported as such.
    try {
        solve(diagonal({1, 0, 1}), {1, 1, 1});
        FAIL("expected Singular");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Singular);
    }
}

TEST_CASE("solve_bordered: hand-solved 2x2 and constraint enforcement",
          "[linalg]") {
    // [[I, c],[c^T, 0]] with c = (1,0), b = 0, g = 5: x = (5,0), lambda = -5.
    auto id = diagonal({1, 1});
    auto [x, lambda] = solve_bordered(id, {1, 0}, {0, 0}, 5.0);
    CHECK(x[0] == Catch::Approx(5.0).epsilon(1e-12));
    CHECK(x[1] == Catch::Approx(0.0).margin(1e-12));
    CHECK(lambda == Catch::Approx(-5.0).epsilon(1e-12));

    // g = c^T A^{-1} b: multiplier vanishes and x = A^{-1} b.
    auto d = diagonal({2, 4});
    std::vector<double> b = {2, 8};          // A^{-1} b = (1, 2)
    std::vector<double> c = {1, 1};          // c^T A^{-1} b = 3
    auto [x2, l2] = solve_bordered(d, c, b, 3.0);
    CHECK(x2[0] == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(x2[1] == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(l2 == Catch::Approx(0.0).margin(1e-11));
    CHECK(std::abs(vec_dot(c, x2) - 3.0) <= 1e-10 * (1.0 + 3.0));

    try {
        solve_bordered(id, {0, 0}, {0, 0}, 1.0);
        FAIL("expected DegenerateConstraint");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateConstraint);
    }
}

TEST_CASE("estimate_condition: known spectra within factor 2", "[linalg]") {
    CHECK(estimate_condition(diagonal({1, 1, 1, 1})) ==
          Catch::Approx(1.0).epsilon(0.01));

    const double c2 = estimate_condition(diagonal({1, 100}));
    CHECK(c2 >= 50.0);
    CHECK(c2 <= 200.0);

    const double c3 = estimate_condition(diagonal({1, 10, 100}));
    CHECK(c3 >= 50.0);
    CHECK(c3 <= 200.0);

    try {
        estimate_condition(diagonal({1, 0, 1}));
        FAIL("expected Singular");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Singular);
    }
}

TEST_CASE("MatrixMarket export", "[linalg]") {
    auto m = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.5}, {1, 0, -2.0}});
    std::stringstream ss;
    save_matrix_market(m, ss);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "%%MatrixMarket matrix coordinate real general");
    std::getline(ss, line);
    CHECK(line == "2 2 2");
    std::getline(ss, line);
    CHECK(line == "1 1 1.5");
    std::getline(ss, line);
    CHECK(line == "2 1 -2");
}
