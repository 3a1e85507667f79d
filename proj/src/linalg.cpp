#include "qstir/linalg.hpp"

#include "qstir/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace qstir {

namespace {

EigenSystem eig2(const CMat& A) {
    const double a = A(0, 0).real();
    const double d = A(1, 1).real();
    const cplx b = 0.5 * (A(0, 1) + std::conj(A(1, 0)));
    const double mean = 0.5 * (a + d);
    const double delta = 0.5 * (a - d);
    const double r = std::hypot(delta, std::abs(b));

    EigenSystem es;
    es.values.resize(2);
    es.vectors.resize(2, 2);
    es.values << mean - r, mean + r;

    if (std::abs(b) == 0.0) {
        // Already diagonal; order the basis vectors by their diagonal entries.
        es.vectors.setZero();
        if (a <= d) {
            es.vectors(0, 0) = 1.0;
            es.vectors(1, 1) = 1.0;
        } else {
            es.vectors(1, 0) = 1.0;
            es.vectors(0, 1) = 1.0;
        }
        return es;
    }

    // Pick the rows of (A − λ) that avoid cancellation in δ ± r.
    const double s = std::abs(delta) + r;
    CVec lower(2), upper(2);
    if (delta >= 0.0) {
        upper << s, std::conj(b);
        lower << -b, s;
    } else {
        lower << -s, std::conj(b);
        upper << b, s;
    }
    es.vectors.col(0) = lower / lower.norm();
    es.vectors.col(1) = upper / upper.norm();
    fix_phases(es.vectors);
    return es;
}

// Two passes of modified Gram-Schmidt; removes the orthogonality drift that
// accumulated rotations leave behind.
void orthonormalize(CMat& V) {
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < V.cols(); ++k) {
            for (Eigen::Index j = 0; j < k; ++j) V.col(k) -= V.col(j).dot(V.col(k)) * V.col(j);
            V.col(k) /= V.col(k).norm();
        }
    }
}

// Cyclic Jacobi for a Hermitian matrix. Each rotation first removes the phase of
// the pivot, then applies the real symmetric rotation that annihilates it.
EigenSystem eig_jacobi(const CMat& A_in) {
    const Eigen::Index n = A_in.rows();
    CMat A = 0.5 * (A_in + A_in.adjoint());
    CMat V = identity(n);
    const double scale = std::max(A.norm(), std::numeric_limits<double>::min());

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += std::norm(A(p, q));
        if (std::sqrt(off) <= 1e-17 * scale) break;

        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double mag = std::abs(A(p, q));
                if (mag <= 1e-300) continue;
                const cplx phase = A(p, q) / mag;
                const double tau = (A(q, q).real() - A(p, p).real()) / (2.0 * mag);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                CMat R = identity(n);
                R(p, p) = c;
                R(p, q) = s;
                R(q, p) = -s * std::conj(phase);
                R(q, q) = c * std::conj(phase);
                A = R.adjoint() * A * R;
                A(p, q) = 0.0;
                A(q, p) = 0.0;
                V = V * R;
            }
        }
    }

    std::array<Eigen::Index, 3> order{0, 1, 2};
    std::sort(order.begin(), order.begin() + n,
              [&](Eigen::Index i, Eigen::Index j) { return A(i, i).real() < A(j, j).real(); });

    EigenSystem es;
    es.values.resize(n);
    es.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        es.values(k) = A(order[k], order[k]).real();
        es.vectors.col(k) = V.col(order[k]);
    }
    orthonormalize(es.vectors);
    fix_phases(es.vectors);
    return es;
}

}  // namespace

CMat identity(Eigen::Index n) { return CMat::Identity(n, n); }

CMat EigenSystem::reconstruct() const {
    return vectors * values.cast<cplx>().asDiagonal() * vectors.adjoint();
}

double hermiticity_defect(const CMat& A) {
    const double norm = std::max(A.norm(), std::numeric_limits<double>::min());
    return (A - A.adjoint()).norm() / norm;
}

double unitarity_defect(const CMat& U) {
    return (U.adjoint() * U - identity(U.rows())).norm();
}

void fix_phases(CMat& vectors) {
    for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
        Eigen::Index best = 0;
        double best_mag = -1.0;
        for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
            // Ties resolved toward the lower index so the convention is stable.
            const double mag = std::abs(vectors(i, k));
            if (mag > best_mag * (1.0 + 1e-12)) {
                best = i;
                best_mag = mag;
            }
        }
        if (best_mag > 0.0) vectors.col(k) *= std::conj(vectors(best, k)) / best_mag;
        vectors(best, k) = std::abs(vectors(best, k));
    }
}

EigenSystem eig_hermitian(const CMat& A) {
    if (A.rows() != A.cols() || A.rows() < 1 || A.rows() > 3)
        throw std::invalid_argument("eig_hermitian: expected a square matrix of dimension 1..3");
    if (!A.allFinite()) throw NonHermitian("matrix has non-finite entries");
    const double defect = hermiticity_defect(A);
    if (defect > kHermitianTol) {
        std::ostringstream os;
        os << "relative defect " << defect << " exceeds " << kHermitianTol;
        throw NonHermitian(os.str());
    }
    if (A.rows() == 1) {
        EigenSystem es;
        es.values.resize(1);
        es.values(0) = A(0, 0).real();
        es.vectors = identity(1);
        return es;
    }
    return A.rows() == 2 ? eig2(A) : eig_jacobi(A);
}

CMat expm_skew(const EigenSystem& es, double dt) {
    CVec phases(es.dim());
    for (Eigen::Index k = 0; k < es.dim(); ++k) phases(k) = std::polar(1.0, -es.values(k) * dt);
    const CMat U = es.vectors * phases.asDiagonal() * es.vectors.adjoint();
    // One Newton-Schulz step pulls the rounding of V back onto the unitary group,
    // so long products of steps do not drift.
    return 0.5 * U * (3.0 * identity(es.dim()) - U.adjoint() * U);
}

CMat expm_skew(const CMat& A, double dt) {
    if (!std::isfinite(dt)) throw std::invalid_argument("expm_skew: dt must be finite");
    return expm_skew(eig_hermitian(A), dt);
}

}  // namespace qstir
