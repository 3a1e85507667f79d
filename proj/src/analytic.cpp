#include "qstir/analytic.hpp"

#include "qstir/errors.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace qstir::analytic {

namespace {

void require_probability(double p, const char* where) {
    if (!(p >= 0.0 && p <= 1.0)) {
        std::ostringstream os;
        os << where << ": probability " << p << " outside [0, 1]";
        throw std::invalid_argument(os.str());
    }
}

}  // namespace

double lz_probability(const LZParams& p) {
    if (!(p.udot > 0.0)) throw std::invalid_argument("lz_probability: udot must be positive");
    return std::exp(-2.0 * std::numbers::pi * p.c * p.c / p.udot);
}

double single_path_moments(double p, int k) {
    require_probability(p, "single_path_moments");
    if (k < 0) throw std::invalid_argument("single_path_moments: k must be non-negative");
    return std::pow(p, (k + 1) / 2);
}

SinglePathEigenpairs single_path_eigenpairs(double p) {
    require_probability(p, "single_path_eigenpairs");
    const double s = std::sqrt(p);
    return {s, -s, 0.5 * (1.0 + s), 0.5 * (1.0 - s)};
}

Moments double_path_moments(double lambda, double p) {
    require_probability(p, "double_path_moments");
    return {lambda * p, lambda * lambda * (1.0 - p) * p};
}

double classical_double_path_variance(double lambda, double p) {
    const double x = lambda * p;
    if (!(x >= 0.0 && x <= 1.0)) {
        std::ostringstream os;
        os << "lambda*p = " << x << " outside [0, 1]";
        throw OutOfRange(os.str());
    }
    return (1.0 - x) * x;
}

double stirring_charge(double lambda_ccw, double lambda_cw) { return lambda_ccw - lambda_cw; }

double stirring_variance(const CyclePrediction& pred) {
    require_probability(pred.p_lz, "stirring_variance");
    return std::norm(pred.lambda_ccw + pred.lambda_cw * std::polar(1.0, pred.phi)) * pred.p_lz;
}

double residual_occupation(double phi, double p_lz) {
    require_probability(p_lz, "residual_occupation");
    const double s = std::sin(0.5 * phi);
    return 4.0 * s * s * p_lz;
}

double fgr_scale(double omega, double t_p) {
    if (omega < 0.0 || t_p < 0.0) throw std::invalid_argument("fgr_scale: arguments must be non-negative");
    return std::exp(-omega * t_p);
}

}  // namespace qstir::analytic
