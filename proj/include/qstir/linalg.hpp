// linalg.hpp: fixed-capacity complex linear algebra for 2- and 3-level systems.
//
// Matrices are Eigen objects with a compile-time capacity of 3, so nothing here
// touches the heap. The eigensolver is our own: closed form for 2x2, cyclic
// Jacobi sweeps for 3x3.

#pragma once

#include <Eigen/Core>

#include <complex>

namespace qstir {

using cplx = std::complex<double>;

using CMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;
using CVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;
using RVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

inline constexpr double kHermitianTol = 1e-12;

// Eigenvalues ascending; eigenvectors are the orthonormal columns of `vectors`,
// each with its largest-magnitude component real and positive.
struct EigenSystem {
    RVec values;
    CMat vectors;

    [[nodiscard]] Eigen::Index dim() const { return values.size(); }
    [[nodiscard]] CMat reconstruct() const;
};

// ‖A − A†‖_F / max(‖A‖_F, tiny).
double hermiticity_defect(const CMat& A);

// ‖U†U − 1‖_F.
double unitarity_defect(const CMat& U);

CMat identity(Eigen::Index n);

// Throws NonHermitian when the relative defect exceeds kHermitianTol.
EigenSystem eig_hermitian(const CMat& A);

// exp(−i·A·dt) for Hermitian A, built from the eigendecomposition.
CMat expm_skew(const CMat& A, double dt);
CMat expm_skew(const EigenSystem& es, double dt);

// Multiplies each column by a unit phase so that its largest-magnitude
// component is real positive.
void fix_phases(CMat& vectors);

}  // namespace qstir
