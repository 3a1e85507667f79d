#include "qstir/errors.hpp"
#include "qstir/linalg.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

using namespace qstir;

namespace {

CMat random_hermitian(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g;
    CMat A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = cplx{g(rng), g(rng)};
    return (0.5 * (A + A.adjoint())).eval();
}

// Roots of det(λ − A) for a real symmetric 3×3 via the trigonometric form of
// the depressed cubic.
std::array<double, 3> cubic_roots(const Eigen::Matrix3d& A) {
    const double a = -A.trace();
    const double b = A(0, 0) * A(1, 1) + A(0, 0) * A(2, 2) + A(1, 1) * A(2, 2) - A(0, 1) * A(1, 0) -
                     A(0, 2) * A(2, 0) - A(1, 2) * A(2, 1);
    const double det = A(0, 0) * (A(1, 1) * A(2, 2) - A(1, 2) * A(2, 1)) -
                       A(0, 1) * (A(1, 0) * A(2, 2) - A(1, 2) * A(2, 0)) +
                       A(0, 2) * (A(1, 0) * A(2, 1) - A(1, 1) * A(2, 0));
    const double c = -det;
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double theta = std::acos(3.0 * q / (p * m)) / 3.0;
    std::array<double, 3> r;
    for (int k = 0; k < 3; ++k) r[k] = m * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0) - a / 3.0;
    std::sort(r.begin(), r.end());
    return r;
}

}  // namespace

TEST_SUITE("linalg") {
    TEST_CASE("diagonal input returns the standard basis") {
        CMat A = CMat::Zero(2, 2);
        A(1, 1) = 1.5;
        const EigenSystem es = eig_hermitian(A);
        CHECK(es.values(0) == 0.0);
        CHECK(es.values(1) == 1.5);
        CHECK((es.vectors - identity(2)).norm() == 0.0);

        CMat B = CMat::Zero(2, 2);
        B(0, 0) = 2.0;
        const EigenSystem eb = eig_hermitian(B);
        CHECK(eb.values(0) == 0.0);
        CHECK(std::abs(eb.vectors(1, 0)) == 1.0);
    }

    TEST_CASE("sigma_x has levels -1 and +1 with symmetric and antisymmetric vectors") {
        CMat A(2, 2);
        A << 0.0, 1.0, 1.0, 0.0;
        const EigenSystem es = eig_hermitian(A);
        CHECK(es.values(0) == doctest::Approx(-1.0).epsilon(1e-15));
        CHECK(es.values(1) == doctest::Approx(1.0).epsilon(1e-15));
        const double h = 1.0 / std::numbers::sqrt2;
        for (int k = 0; k < 2; ++k) {
            CHECK(std::abs(es.vectors(0, k)) == doctest::Approx(h).epsilon(1e-15));
            CHECK(std::abs(es.vectors(1, k)) == doctest::Approx(h).epsilon(1e-15));
        }
        // lower: (|1> - |2>)/sqrt2, upper: (|1> + |2>)/sqrt2
        CHECK(std::abs(es.vectors(0, 0) + es.vectors(1, 0)) < 1e-15);
        CHECK(std::abs(es.vectors(0, 1) - es.vectors(1, 1)) < 1e-15);
    }

    TEST_CASE("three-site Hamiltonian matches characteristic-polynomial roots") {
        Eigen::Matrix3d H;
        H << 0.7, 0.05, 0.03, 0.05, 0.0, 1.0, 0.03, 1.0, 0.0;
        const auto roots = cubic_roots(H);
        const EigenSystem es = eig_hermitian(H.cast<cplx>());
        for (int k = 0; k < 3; ++k) CHECK(std::abs(es.values(k) - roots[k]) < 1e-10);
    }

    TEST_CASE("cubic oracle agrees on random real symmetric matrices") {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> g;
        for (int trial = 0; trial < 200; ++trial) {
            Eigen::Matrix3d A;
            for (int i = 0; i < 3; ++i)
                for (int j = i; j < 3; ++j) A(i, j) = A(j, i) = g(rng);
            const auto roots = cubic_roots(A);
            const EigenSystem es = eig_hermitian(A.cast<cplx>());
            for (int k = 0; k < 3; ++k) CHECK(std::abs(es.values(k) - roots[k]) < 1e-10 * (1.0 + A.norm()));
        }
    }

    TEST_CASE("random Hermitian round trip, 10^4 matrices per dimension") {
        std::mt19937_64 rng(20261016);
        double worst_rec = 0.0;
        double worst_orth = 0.0;
        bool ascending = true;
        bool phase_ok = true;
        for (int n : {2, 3}) {
            for (int trial = 0; trial < 10000; ++trial) {
                const CMat A = random_hermitian(rng, n);
                const EigenSystem es = eig_hermitian(A);
                worst_rec = std::max(worst_rec, (A - es.reconstruct()).norm() / A.norm());
                worst_orth = std::max(worst_orth, (es.vectors.adjoint() * es.vectors - identity(n)).norm());
                for (int k = 1; k < n; ++k) ascending = ascending && es.values(k - 1) <= es.values(k);
                for (int k = 0; k < n; ++k) {
                    Eigen::Index imax = 0;
                    es.vectors.col(k).cwiseAbs().maxCoeff(&imax);
                    phase_ok = phase_ok && es.vectors(imax, k).imag() == 0.0 && es.vectors(imax, k).real() > 0.0;
                }
            }
        }
        CHECK(worst_rec <= 1e-12);
        CHECK(worst_orth <= 1e-12);
        CHECK(ascending);
        CHECK(phase_ok);
    }

    TEST_CASE("degenerate spectra") {
        const EigenSystem e1 = eig_hermitian(identity(3));
        CHECK((e1.vectors.adjoint() * e1.vectors - identity(3)).norm() < 1e-14);
        CMat H(3, 3);
        H << 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0;  // u = 1: levels -1, 1, 1
        const EigenSystem es = eig_hermitian(H);
        CHECK(es.values(0) == doctest::Approx(-1.0));
        CHECK(es.values(1) == doctest::Approx(1.0));
        CHECK(es.values(2) == doctest::Approx(1.0));
        CHECK((H - es.reconstruct()).norm() < 1e-14);
    }

    TEST_CASE("non-Hermitian and non-finite input are rejected") {
        CMat A(2, 2);
        A << 0.0, 1.0, 0.5, 0.0;
        CHECK_THROWS_AS((void)eig_hermitian(A), NonHermitian);
        try {
            eig_hermitian(A);
        } catch (const NonHermitian& e) {
            CHECK(std::string(e.what()).find("defect") != std::string::npos);
        }
        CMat B = identity(2);
        B(0, 0) = std::nan("");
        CHECK_THROWS_AS((void)eig_hermitian(B), NonHermitian);
        CHECK_THROWS_AS((void)expm_skew(A, 1.0), NonHermitian);
        CHECK_THROWS_AS((void)eig_hermitian(CMat::Zero(2, 3)), std::invalid_argument);
    }

    TEST_CASE("expm_skew closed forms") {
        CHECK((expm_skew(CMat::Zero(3, 3), 2.0) - identity(3)).norm() < 1e-15);

        CMat D = CMat::Zero(2, 2);
        D(0, 0) = 1.0;
        D(1, 1) = -1.0;
        CHECK((expm_skew(D, std::numbers::pi) + identity(2)).norm() < 1e-14);

        CMat X(2, 2);
        X << 0.0, 1.0, 1.0, 0.0;
        for (double t : {0.0, 0.3, 1.0, 2.5, 7.0, 31.4}) {
            const CMat rabi = std::cos(t) * identity(2) - cplx{0.0, std::sin(t)} * X;
            CHECK((expm_skew(X, t) - rabi).norm() < 1e-13);
        }
    }

    TEST_CASE("expm_skew is unitary to 1e-13 for |A| dt <= 1") {
        std::mt19937_64 rng(3);
        double worst = 0.0;
        for (int n : {2, 3}) {
            for (int trial = 0; trial < 2000; ++trial) {
                const CMat A = random_hermitian(rng, n);
                worst = std::max(worst, unitarity_defect(expm_skew(A, 1.0 / A.norm())));
            }
        }
        CHECK(worst <= 1e-13);
    }

    TEST_CASE("hermiticity defect is relative") {
        CMat A(2, 2);
        A << 1e6, cplx{0.0, 1.0}, cplx{0.0, -1.0}, 0.0;
        CHECK(hermiticity_defect(A) == 0.0);
        A(0, 1) += 1e-9;
        CHECK(hermiticity_defect(A) < 1e-12);
    }
}
