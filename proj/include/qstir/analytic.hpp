// analytic.hpp: closed-form predictions used as oracles against the numerics.

#pragma once

#include <utility>

namespace qstir::analytic {

struct LZParams {
    double c = 0.0;     // effective coupling
    double udot = 1.0;  // sweep rate, > 0
};

// exp(−2π c²/u̇)
double lz_probability(const LZParams& p);

// ⟨Q^k⟩ = p^⌊(k+1)/2⌋ for a single transfer path with transition probability p.
double single_path_moments(double p, int k);

struct SinglePathEigenpairs {
    double q_plus = 0.0;   // +√p
    double q_minus = 0.0;  // −√p
    double w_plus = 0.0;   // ½(1+√p)
    double w_minus = 0.0;  // ½(1−√p)
};
SinglePathEigenpairs single_path_eigenpairs(double p);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

// mean λp, variance λ²(1−p)p
Moments double_path_moments(double lambda, double p);

// Classical two-outcome estimate (1 − λp)·λp; kept for contrast only.
// Throws OutOfRange unless λp ∈ [0, 1].
double classical_double_path_variance(double lambda, double p);

double stirring_charge(double lambda_ccw, double lambda_cw);

struct CyclePrediction {
    double lambda_ccw = 0.0;
    double lambda_cw = 0.0;
    double phi = 0.0;  // φ₂ − φ₁
    double p_lz = 0.0;
};

// |λ⟲ + λ⟳ e^{iφ}|² · P_LZ
double stirring_variance(const CyclePrediction& pred);

// 4 sin²(φ/2) · P_LZ
double residual_occupation(double phi, double p_lz);

// e^{−Ω t_p}; an order-of-magnitude scale without prefactor.
double fgr_scale(double omega, double t_p);

}  // namespace qstir::analytic
