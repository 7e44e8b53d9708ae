#include <doctest.h>

#include <cmath>

#include "itin/numkit.hpp"

using namespace itin;

namespace {

Matrix column(std::initializer_list<double> vals) {
    Matrix m(static_cast<Eigen::Index>(vals.size()), 1);
    Eigen::Index i = 0;
    for (double v : vals) m(i++, 0) = v;
    return m;
}

}  // namespace

TEST_CASE("affine_least_squares matches hand-solved normal equations") {
    // theta = sum (u - ubar)(v - vbar) / sum (u - ubar)^2 = 1/2, b = -1/2
    const AffineFit fit = affine_least_squares(column({1, 3}), column({0, 1}), 0.0);
    CHECK(fit.theta(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.bias(0) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("affine_least_squares identity and constant fits") {
    const AffineFit ident = affine_least_squares(column({0, 1}), column({0, 1}), 0.0);
    CHECK(ident.theta(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ident.bias(0) == doctest::Approx(0.0).epsilon(1e-12));

    const AffineFit constant = affine_least_squares(column({0, 2}), column({2, 2}), 0.0);
    CHECK(constant.theta(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(constant.bias(0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("affine_least_squares reproduces exact affine relations") {
    RngStream rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index d_in = 1 + static_cast<Eigen::Index>(rng.next_u64() % 4);
        const Eigen::Index d_out = 1 + static_cast<Eigen::Index>(rng.next_u64() % 3);
        const Eigen::Index m = d_in + 3 + static_cast<Eigen::Index>(rng.next_u64() % 5);

        Matrix theta(d_in, d_out);
        for (Eigen::Index i = 0; i < d_in; ++i)
            theta.row(i) = gaussian_vector(rng, d_out, 1.0).transpose();
        const Vector bias = gaussian_vector(rng, d_out, 1.0);

        Matrix x(m, d_in);
        for (Eigen::Index i = 0; i < m; ++i)
            x.row(i) = gaussian_vector(rng, d_in, 2.0).transpose();
        const Matrix t = (x * theta).rowwise() + bias.transpose();

        const AffineFit fit = affine_least_squares(x, t, 0.0);
        CHECK((fit.theta - theta).norm() <= 1e-10 * std::max(1.0, theta.norm()));
        CHECK((fit.bias - bias).norm() <= 1e-10 * std::max(1.0, bias.norm()));
        CHECK(fit.residual_rms <= 1e-10);
    }
}

TEST_CASE("fit residual beats random parameter perturbations") {
    RngStream rng(11);
    Matrix x(12, 3), t(12, 2);
    for (Eigen::Index i = 0; i < 12; ++i) {
        x.row(i) = gaussian_vector(rng, 3, 1.0).transpose();
        t.row(i) = gaussian_vector(rng, 2, 1.0).transpose();
    }
    const AffineFit fit = affine_least_squares(x, t, 0.0);
    const double base_sse = (fit.apply_rows(x) - t).squaredNorm();

    for (int p = 0; p < 1000; ++p) {
        Matrix theta_p = fit.theta;
        Vector bias_p = fit.bias;
        for (Eigen::Index i = 0; i < theta_p.rows(); ++i)
            theta_p.row(i) += 1e-3 * gaussian_vector(rng, theta_p.cols(), 1.0).transpose();
        bias_p += 1e-3 * gaussian_vector(rng, bias_p.size(), 1.0);
        const Matrix res = ((x * theta_p).rowwise() + bias_p.transpose()) - t;
        CHECK(res.squaredNorm() >= base_sse - 1e-12);
    }
}

TEST_CASE("affine_least_squares ridge solution matches closed form") {
    RngStream rng(3);
    Matrix x(10, 4), t(10, 2);
    for (Eigen::Index i = 0; i < 10; ++i) {
        x.row(i) = gaussian_vector(rng, 4, 1.0).transpose();
        t.row(i) = gaussian_vector(rng, 2, 1.0).transpose();
    }
    const double ridge = 1e-3;
    const AffineFit fit = affine_least_squares(x, t, ridge);

    // Centered normal equations: (Xc^T Xc + ridge I) theta = Xc^T Tc.
    const Matrix xc = x.rowwise() - x.colwise().mean();
    const Matrix tc = t.rowwise() - t.colwise().mean();
    const Matrix lhs = xc.transpose() * xc + ridge * Matrix::Identity(4, 4);
    const Matrix expected = lhs.fullPivLu().solve(xc.transpose() * tc);
    CHECK((fit.theta - expected).norm() <= 1e-10);
}

TEST_CASE("affine_least_squares rejects bad input") {
    CHECK_THROWS_AS(affine_least_squares(Matrix(0, 1), Matrix(0, 1), 0.0), EmptyData);
    Matrix bad = column({1, std::nan("")});
    CHECK_THROWS_AS(affine_least_squares(bad, column({0, 1}), 0.0), InvalidInput);
    CHECK_THROWS_AS(affine_least_squares(column({0, 1}), column({0, 1}), -1.0), InvalidInput);
}

TEST_CASE("pseudo_inverse on identity and diagonal matrices") {
    const Matrix eye = Matrix::Identity(2, 2);
    CHECK((pseudo_inverse(eye, 1e-10) - eye).norm() <= 1e-12);

    Matrix diag = Matrix::Zero(2, 2);
    diag(0, 0) = 2.0;
    diag(1, 1) = 4.0;
    const Matrix pinv = pseudo_inverse(diag, 1e-10);
    // Diagonal oracle: elementwise reciprocal.
    CHECK(pinv(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pinv(1, 1) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::abs(pinv(0, 1)) <= 1e-14);
}

TEST_CASE("pseudo_inverse of a full-column-rank matrix") {
    Matrix col(2, 1);
    col << 1, 1;
    const Matrix pinv = pseudo_inverse(col, 1e-10);  // (A^T A)^{-1} A^T = (0.5, 0.5)
    REQUIRE(pinv.rows() == 1);
    REQUIRE(pinv.cols() == 2);
    CHECK(pinv(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pinv(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pseudo_inverse of the zero matrix is zero") {
    const Matrix z = Matrix::Zero(3, 2);
    const Matrix pinv = pseudo_inverse(z, 1e-10);
    CHECK(pinv.rows() == 2);
    CHECK(pinv.cols() == 3);
    CHECK(pinv.norm() == 0.0);
}

TEST_CASE("pseudo_inverse satisfies the Penrose conditions on random matrices") {
    RngStream rng(42);
    for (int trial = 0; trial < 25; ++trial) {
        const Eigen::Index rows = 1 + static_cast<Eigen::Index>(rng.next_u64() % 20);
        const Eigen::Index cols = 1 + static_cast<Eigen::Index>(rng.next_u64() % 20);
        Matrix a(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            a.row(i) = gaussian_vector(rng, cols, 1.0).transpose();
        if (trial % 3 == 0 && rows > 1) a.row(rows - 1) = a.row(0);  // rank-deficient case

        const Matrix p = pseudo_inverse(a, 1e-10);
        CHECK((a * p * a - a).norm() <= 1e-9 * std::max(1.0, a.norm()));
        CHECK((p * a * p - p).norm() <= 1e-9 * std::max(1.0, p.norm()));
        CHECK(((a * p) - (a * p).transpose()).norm() <= 1e-9);
        CHECK(((p * a) - (p * a).transpose()).norm() <= 1e-9);
    }
}

TEST_CASE("gaussian_vector degenerate and statistical behaviour") {
    RngStream rng(123);
    const Vector zeros = gaussian_vector(rng, 3, 0.0);
    CHECK(zeros.isZero(0.0));

    RngStream rng2(99);
    const Vector big = gaussian_vector(rng2, 100000, 4.0);
    const double mean = big.mean();
    const double sd = std::sqrt((big.array() - mean).square().sum() / (big.size() - 1));
    CHECK(sd == doctest::Approx(4.0).epsilon(0.02));

    CHECK_THROWS_AS(gaussian_vector(rng, 3, -1.0), InvalidInput);
}

TEST_CASE("RngStream is deterministic and substreams are independent") {
    RngStream a(555), b(555);
    const Vector va = gaussian_vector(a, 64, 1.5);
    const Vector vb = gaussian_vector(b, 64, 1.5);
    CHECK(va == vb);  // bit-identical

    RngStream parent(555);
    RngStream s0 = parent.substream(0);
    RngStream s0_again = parent.substream(0);
    RngStream s1 = parent.substream(1);
    CHECK(s0.next_u64() == s0_again.next_u64());
    RngStream s0_fresh = parent.substream(0);
    CHECK(s0_fresh.next_u64() != s1.next_u64());
}
