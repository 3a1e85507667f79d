#include "qstir/errors.hpp"
#include "qstir/propagation.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace qstir;

namespace {

CVec site0() {
    CVec v = CVec::Zero(2);
    v(0) = 1.0;
    return v;
}

DrivingProtocol ramp2(double c, double udot, double u_span, double ramp = 0.25) {
    return make_protocol(SystemSpec::two_site(), LinearRampLZ{c, udot, u_span, 1.0, ramp});
}

double overlap2(const CVec& a, const CVec& b) { return std::norm(a.dot(b)); }

}  // namespace

TEST_SUITE("propagation") {
    TEST_CASE("constant generator matches the matrix exponential") {
        const SystemSpec spec = SystemSpec::three_site();
        const DrivingProtocol p = make_protocol(spec, ConstantDrive{0.4, 0.07, -0.03, 13.0});
        const UnitaryRecord rec = propagate(spec, p, 0.0, 13.0);
        const CMat exact = expm_skew(hamiltonian(spec, p, 0.0), 13.0);
        CHECK((rec.U - exact).norm() < 1e-10);
        CHECK(rec.unitarity_defect < 1e-12);
        CHECK(rec.grid.size() == rec.steps);
        double covered = 0.0;
        for (const auto& s : rec.grid) covered += s.dt;
        CHECK(covered == doctest::Approx(13.0).epsilon(1e-13));
    }

    TEST_CASE("resonant Rabi oscillation") {
        const SystemSpec spec = SystemSpec::two_site();
        const double c = 0.1;
        const double T = 4.0 * std::numbers::pi / c;
        const DrivingProtocol p = make_protocol(spec, ConstantDrive{1.0, c, 0.0, T});
        double worst = 0.0;
        for (int k = 1; k <= 40; ++k) {
            const double t = T * k / 40.0;
            const UnitaryRecord rec = propagate(spec, p, 0.0, t);
            const double transfer = std::norm(rec.U(1, 0));
            worst = std::max(worst, std::abs(transfer - std::pow(std::sin(c * t), 2)));
        }
        CHECK(worst < 1e-8);
    }

    TEST_CASE("Landau-Zener survival over a long window") {
        // u from -9 to 11; 2 pi c^2 / udot = 1.0005
        const double c = 0.1;
        const double udot = 0.0628;
        const UnitaryRecord rec = propagate(SystemSpec::two_site(), ramp2(c, udot, 10.0), 0.0, 20.0 / udot);
        const double p = std::norm(rec.U(0, 0));
        CHECK(p == doctest::Approx(std::exp(-2.0 * std::numbers::pi * c * c / udot)).epsilon(0.02));
        CHECK(p == doctest::Approx(std::exp(-1.0)).epsilon(0.02));
    }

    TEST_CASE("norm is conserved along a stir cycle") {
        const SystemSpec spec = SystemSpec::three_site();
        StirCycle sc;
        sc.lambda_ccw = 1.7;
        sc.lambda_cw = -0.7;
        sc.udot = 0.02;
        const DrivingProtocol p = make_protocol(spec, sc);
        const UnitaryRecord rec = propagate(spec, p, p.t_start, p.t_end);
        CVec psi = CVec::Zero(3);
        psi << 0.6, cplx{0.0, 0.48}, 0.64;
        CHECK(std::abs((rec.U * psi).norm() - psi.norm()) < 1e-12);
        CHECK(rec.unitarity_defect <= kUnitarityLimit);
    }

    TEST_CASE("fixed-step midpoint rule is second order") {
        const SystemSpec spec = SystemSpec::two_site();
        const DrivingProtocol p = ramp2(0.2, 0.2, 1.0);
        const double T = p.t_end;
        PropagationOptions ref_opts;
        ref_opts.adaptive = false;
        ref_opts.dt_max = 1e-3;
        const CMat ref = propagate(spec, p, 0.0, T, ref_opts).U;
        double previous = 0.0;
        for (double dt : {0.4, 0.2, 0.1}) {
            PropagationOptions o;
            o.adaptive = false;
            o.dt_max = dt;
            const double err = (propagate(spec, p, 0.0, T, o).U - ref).norm();
            if (previous > 0.0) CHECK(previous / err >= 3.0);
            previous = err;
        }
    }

    TEST_CASE("adaptive control gives up below the minimum step") {
        PropagationOptions o;
        o.tol = 1e-30;
        CHECK_THROWS_AS((void)propagate(SystemSpec::two_site(), ramp2(0.1, 0.05, 2.0), 0.0, 80.0, o), StepUnderflow);
    }

    TEST_CASE("frame without coupling follows the diabatic levels") {
        const SystemSpec spec = SystemSpec::two_site();
        const DrivingProtocol p = ramp2(0.0, 0.01, 2.0);
        const AdiabaticFrame f = adiabatic_frame(spec, p, uniform_grid(0.0, p.t_end, 400));
        CHECK(f.occupied == 0);
        CHECK(f.partner == 1);
        for (std::size_t i = 0; i < f.times.size(); ++i) {
            CHECK(f.levels[i](f.occupied) == doctest::Approx(p.u(f.times[i])).epsilon(1e-14));
            CHECK(f.levels[i](f.partner) == doctest::Approx(1.0).epsilon(1e-14));
        }
        CHECK(f.min_overlap > 0.999999);
    }

    TEST_CASE("frame with coupling: gap and symmetric crossings") {
        const SystemSpec spec = SystemSpec::three_site();
        StirCycle sc;
        sc.c_eff = 0.03;
        sc.udot = 0.01;
        sc.dwell = 5.0;
        const DrivingProtocol p = make_protocol(spec, sc);
        const AdiabaticFrame f = adiabatic_frame(spec, p, uniform_grid(0.0, p.t_end, 2001));
        REQUIRE(f.crossing_times.size() == 2);
        CHECK(f.crossing_times[0] + f.crossing_times[1] == doctest::Approx(p.t_end).epsilon(1e-7));
        CHECK(f.crossing_times[0] == doctest::Approx(p.nominal_crossings[0]).epsilon(1e-3));
        CHECK(relevant_gap(spec, p, f.crossing_times[0]) == doctest::Approx(0.06).epsilon(0.05));
    }

    TEST_CASE("frame sampled exactly at the crossing is ambiguous") {
        const SystemSpec spec = SystemSpec::two_site();
        const DrivingProtocol p = ramp2(0.01, 0.01, 2.0);
        CHECK_THROWS_AS((void)adiabatic_frame(spec, p, {0.0, 0.5 * p.t_end, p.t_end}), BranchAmbiguity);
    }

    TEST_CASE("adiabatic propagator") {
        const SystemSpec two = SystemSpec::two_site();

        SUBCASE("time independent") {
            const DrivingProtocol p = make_protocol(two, ConstantDrive{0.3, 0.1, 0.0, 20.0});
            const AdiabaticFrame f = adiabatic_frame(two, p, uniform_grid(0.0, 20.0, 11));
            const CMat exact = expm_skew(hamiltonian(two, p, 0.0), 20.0);
            CHECK((adiabatic_propagator(f).U - exact).norm() < 1e-10);
        }
        SUBCASE("slow ramp") {
            const DrivingProtocol p = ramp2(0.1, 0.005, 4.0);
            const AdiabaticFrame f = adiabatic_frame(two, p, uniform_grid(0.0, p.t_end, 4001));
            const CVec psi = site0();
            const CVec exact = propagate(two, p, 0.0, p.t_end).U * psi;
            CHECK(overlap2(adiabatic_propagator(f).U * psi, exact) >= 0.999);
        }
        SUBCASE("moderate ramp loses about P_LZ") {
            const double c = 0.1;
            const double udot = 2.0 * std::numbers::pi * c * c / std::log(10.0);
            const DrivingProtocol p = ramp2(c, udot, 4.0);
            const AdiabaticFrame f = adiabatic_frame(two, p, uniform_grid(0.0, p.t_end, 4001));
            const CVec psi = site0();
            const CVec exact = propagate(two, p, 0.0, p.t_end).U * psi;
            const double infidelity = 1.0 - overlap2(adiabatic_propagator(f).U * psi, exact);
            CHECK(infidelity <= 3.0 * 0.1);
            CHECK(infidelity > 0.03);
        }
        SUBCASE("fast ramp") {
            const DrivingProtocol p = ramp2(0.1, 1.0, 4.0);
            const AdiabaticFrame f = adiabatic_frame(two, p, uniform_grid(0.0, p.t_end, 4001));
            const CVec psi = site0();
            const CVec exact = propagate(two, p, 0.0, p.t_end).U * psi;
            CHECK(overlap2(adiabatic_propagator(f).U * psi, exact) < 0.2);
        }
    }

    TEST_CASE("dynamical phase") {
        const SystemSpec spec = SystemSpec::three_site();

        SUBCASE("constant gap 2c") {
            const double c = 0.04;
            const double a = c / std::numbers::sqrt2;
            const DrivingProtocol p = make_protocol(spec, ConstantDrive{1.0, a, a, 50.0});
            const AdiabaticFrame f = adiabatic_frame(spec, p, uniform_grid(0.0, 50.0, 11));
            const PhaseRecord ph = dynamical_phase(f);
            CHECK(ph.phi.back() == doctest::Approx(2.0 * c * 50.0).epsilon(1e-12));
            CHECK(dynamical_phase_at(f, 20.0) == doctest::Approx(2.0 * c * 20.0).epsilon(1e-12));
        }
        SUBCASE("stir cycle against a trapezoid sum") {
            StirCycle sc;
            sc.lambda_ccw = 0.8;
            sc.lambda_cw = 0.3;
            sc.udot = 0.01;
            sc.dwell = 2.0;
            const DrivingProtocol p = make_protocol(spec, sc);
            const AdiabaticFrame f = adiabatic_frame(spec, p, uniform_grid(0.0, p.t_end, 2001));
            const PhaseRecord ph = dynamical_phase(f);

            const std::size_t n = 400000;
            const double h = p.t_end / n;
            double trap = 0.5 * (relevant_gap(spec, p, 0.0) + relevant_gap(spec, p, p.t_end));
            for (std::size_t i = 1; i < n; ++i) trap += relevant_gap(spec, p, h * i);
            trap *= h;
            CHECK(std::abs(ph.phi.back() - trap) < 1e-8);

            for (std::size_t i = 1; i < ph.phi.size(); ++i) CHECK(ph.phi[i] > ph.phi[i - 1]);
            REQUIRE(ph.crossing_phases.size() == 2);
            CHECK(ph.relative_phase() > 0.0);
            CHECK(ph.relative_phase() == doctest::Approx(dynamical_phase_at(f, f.crossing_times[1]) -
                                                         dynamical_phase_at(f, f.crossing_times[0]))
                                             .epsilon(1e-10));
        }
        SUBCASE("strong coupling breaks the reduction") {
            const DrivingProtocol p = make_protocol(spec, ConstantDrive{1.0, 0.3, 0.3, 5.0});
            const AdiabaticFrame f = adiabatic_frame(spec, p, uniform_grid(0.0, 5.0, 11));
            CHECK_THROWS_AS((void)dynamical_phase(f), ReductionInvalid);
        }
    }

    TEST_CASE("Floquet decomposition") {
        SUBCASE("diagonal unitary") {
            CMat U = CMat::Zero(3, 3);
            U(0, 0) = std::polar(1.0, 2.5);
            U(1, 1) = std::polar(1.0, -0.4);
            U(2, 2) = std::polar(1.0, 1.0);
            const FloquetStates fs = floquet_decompose(U);
            CHECK(fs.phases(0) == doctest::Approx(-0.4).epsilon(1e-12));
            CHECK(fs.phases(1) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(fs.phases(2) == doctest::Approx(2.5).epsilon(1e-12));
        }
        SUBCASE("identity") {
            const FloquetStates fs = floquet_decompose(identity(2));
            CHECK(std::abs(fs.phases(0)) < 1e-14);
            CHECK(std::abs(fs.phases(1)) < 1e-14);
        }
        SUBCASE("stir cycle") {
            const SystemSpec spec = SystemSpec::three_site();
            StirCycle sc;
            sc.lambda_ccw = 0.8;
            sc.lambda_cw = 0.3;
            sc.udot = 0.02;
            const DrivingProtocol p = make_protocol(spec, sc);
            const FloquetStates fs = floquet_states(spec, p);
            for (Eigen::Index k = 0; k < 3; ++k) {
                CHECK(std::abs(std::abs(fs.eigenvalues(k)) - 1.0) < 1e-8);
                const CVec v = fs.vectors.col(k);
                const CVec again = propagate(spec, p, p.t_start, p.t_end).U * v;
                CHECK(overlap2(v, again) >= 1.0 - 1e-8);
            }
            CHECK((fs.vectors.adjoint() * fs.vectors - identity(3)).norm() < 1e-12);
        }
    }
}
