#include "qstir/errors.hpp"
#include "qstir/model.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace qstir;

namespace {

DrivingProtocol constant(const SystemSpec& spec, double u, double c1, double c2 = 0.0, double T = 1.0) {
    return make_protocol(spec, ConstantDrive{u, c1, c2, T});
}

}  // namespace

TEST_SUITE("model") {
    TEST_CASE("decoupled three-site levels are u, -1, +1") {
        const SystemSpec spec = SystemSpec::three_site();
        const CMat H = hamiltonian(spec, constant(spec, 0.5, 0.0, 0.0), 0.5);
        const EigenSystem es = eig_hermitian(H);
        CHECK(es.values(0) == doctest::Approx(-1.0).epsilon(1e-15));
        CHECK(es.values(1) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(es.values(2) == doctest::Approx(1.0).epsilon(1e-15));
    }

    TEST_CASE("two-site avoided crossing at u = 1") {
        const SystemSpec spec = SystemSpec::two_site();
        const CMat H = hamiltonian(spec, constant(spec, 1.0, 0.1), 0.0);
        CMat expected(2, 2);
        expected << 1.0, 0.1, 0.1, 1.0;
        CHECK((H - expected).norm() == 0.0);
        const EigenSystem es = eig_hermitian(H);
        CHECK(es.values(1) - es.values(0) == doctest::Approx(0.2).epsilon(1e-14));
    }

    TEST_CASE("three-site Hamiltonian layout and exact hermiticity") {
        const SystemSpec spec = SystemSpec::three_site();
        const CMat H = hamiltonian(spec, constant(spec, 1.0, 0.06, 0.02), 0.0);
        CMat expected(3, 3);
        expected << 1.0, 0.06, 0.02, 0.06, 0.0, 1.0, 0.02, 1.0, 0.0;
        CHECK((H - expected).norm() == 0.0);
        CHECK((H - H.adjoint()).norm() == 0.0);

        const DrivingProtocol stir = make_protocol(spec, StirCycle{});
        for (int i = 0; i <= 50; ++i) {
            const CMat Ht = hamiltonian(spec, stir, stir.duration() * i / 50.0);
            CHECK((Ht - Ht.adjoint()).norm() == 0.0);
        }
    }

    TEST_CASE("time outside the protocol window") {
        const SystemSpec spec = SystemSpec::three_site();
        const DrivingProtocol p = constant(spec, 0.0, 0.1, 0.1, 2.0);
        CHECK_THROWS_AS((void)hamiltonian(spec, p, 2.5), TimeOutOfRange);
        CHECK_THROWS_AS((void)hamiltonian(spec, p, -0.1), TimeOutOfRange);
        CHECK_THROWS_AS((void)current_operator(spec, p, 3.0, Bond::ZeroOne), TimeOutOfRange);
        CHECK_NOTHROW((void)hamiltonian(spec, p, 2.0));
    }

    TEST_CASE("bond currents") {
        const SystemSpec spec = SystemSpec::three_site();
        CHECK(current_operator(spec, constant(spec, 0.0, 0.0, 0.1), 0.0, Bond::ZeroOne).norm() == 0.0);

        const CMat I = current_operator(spec, constant(spec, 0.0, 0.05, 0.03), 0.0, Bond::ZeroOne);
        CHECK(I(0, 1) == cplx{0.0, 0.05});
        CHECK(I(1, 0) == cplx{0.0, -0.05});
        CHECK(I.cwiseAbs().sum() == doctest::Approx(0.1));
        const CMat I2 = current_operator(spec, constant(spec, 0.0, 0.05, 0.03), 0.0, Bond::ZeroTwo);
        CHECK(I2(0, 2) == cplx{0.0, 0.03});
        CHECK(I2(2, 0) == cplx{0.0, -0.03});

        CVec psi = CVec::Zero(3);
        psi(0) = psi(1) = 1.0 / std::numbers::sqrt2;
        CHECK(std::abs(psi.dot(I * psi)) < 1e-17);

        // A relative phase of +i between |0> and |1> carries current out of site 0.
        psi(1) = cplx{0.0, 1.0 / std::numbers::sqrt2};
        const double flow = psi.dot(I * psi).real();
        CHECK(std::abs(std::abs(flow) - 0.05) < 1e-15);

        const SystemSpec two = SystemSpec::two_site();
        CHECK_THROWS_AS((void)current_operator(two, constant(two, 0.0, 0.1), 0.0, Bond::ZeroTwo), InvalidBond);
        CHECK_THROWS_AS((void)current_at(two, 0.1, 0.0, Bond::ZeroTwo), InvalidBond);
    }

    TEST_CASE("splitting ratio") {
        CHECK(splitting_ratio(1.0, 1.0) == 0.5);
        CHECK(splitting_ratio(1.0, 0.0) == 1.0);
        for (double k : {0.01, 1.0, 3.0}) {
            CHECK(splitting_ratio(1.7 * k, -0.7 * k) == doctest::Approx(1.7).epsilon(1e-14));
            CHECK(1.0 - splitting_ratio(1.7 * k, -0.7 * k) == doctest::Approx(-0.7).epsilon(1e-13));
        }
        CHECK_THROWS_AS((void)splitting_ratio(0.1, -0.1), DegenerateSplit);
        CHECK_THROWS_AS((void)splitting_ratio(0.0, 0.0), DegenerateSplit);
        for (auto [a, b] : {std::pair{0.3, 0.7}, {1.7, -0.7}, {-0.2, 0.05}})
            CHECK(splitting_ratio(a, b) + splitting_ratio(b, a) == doctest::Approx(1.0).epsilon(1e-14));
    }

    TEST_CASE("effective coupling") {
        CHECK(effective_coupling(0.0, 0.0) == 0.0);
        CHECK(effective_coupling(0.1, 0.1) == doctest::Approx(0.2 / std::numbers::sqrt2).epsilon(1e-15));
        CHECK(effective_coupling(0.1, -0.1) == 0.0);
    }

    TEST_CASE("minimal upper gap at u = 1 is 2c to first order") {
        const SystemSpec spec = SystemSpec::three_site();
        for (double c : {0.01, 0.03, 0.05}) {
            for (double lambda : {0.5, 0.2, 1.0}) {
                const double c1 = std::numbers::sqrt2 * lambda * c;
                const double c2 = std::numbers::sqrt2 * (1.0 - lambda) * c;
                double gap = 1e9;
                for (int i = 0; i <= 2000; ++i) {
                    const double u = 1.0 - 4.0 * c + 8.0 * c * i / 2000.0;
                    const EigenSystem es = eig_hermitian(hamiltonian_at(spec, u, c1, c2));
                    gap = std::min(gap, es.values(2) - es.values(1));
                }
                CHECK(gap == doctest::Approx(2.0 * c).epsilon(0.05));
            }
        }
    }

    TEST_CASE("linear ramp layout") {
        const SystemSpec spec = SystemSpec::three_site();
        const LinearRampLZ p{0.05, 0.01, 0.5, 0.3, 0.25};
        const DrivingProtocol proto = make_protocol(spec, p);
        CHECK(proto.t_end == doctest::Approx(100.0));
        CHECK(proto.u(0.0) == doctest::Approx(0.5));
        CHECK(proto.u(50.0) == doctest::Approx(1.0));
        CHECK(proto.nominal_crossings.front() == doctest::Approx(50.0));
        CHECK(proto.c1(50.0) == doctest::Approx(std::numbers::sqrt2 * 0.3 * 0.05));
        CHECK(splitting_ratio(proto.c1(50.0), proto.c2(50.0)) == doctest::Approx(0.3));
        CHECK(effective_coupling(proto.c1(50.0), proto.c2(50.0)) == doctest::Approx(0.05));
        CHECK(proto.c1(0.0) == 0.0);
        CHECK(proto.c2(100.0) == doctest::Approx(0.0).epsilon(1e-15));
    }

    TEST_CASE("stir cycle layout") {
        const SystemSpec spec = SystemSpec::three_site();
        StirCycle sc;
        sc.lambda_ccw = 0.8;
        sc.lambda_cw = 0.3;
        sc.udot = 0.01;
        sc.dwell = 7.0;
        const DrivingProtocol p = make_protocol(spec, sc);
        const double half = 2.0 * sc.u_span / sc.udot;
        CHECK(p.duration() == doctest::Approx(2.0 * half + 7.0));
        CHECK(p.u(0.0) == doctest::Approx(0.5));
        CHECK(p.u(half + 3.0) == doctest::Approx(1.5));
        CHECK(p.u(p.t_end) == doctest::Approx(0.5));
        CHECK(splitting_ratio(p.c1(0.5 * half), p.c2(0.5 * half)) == doctest::Approx(0.8));
        CHECK(splitting_ratio(p.c1(half + 7.0 + 0.5 * half), p.c2(half + 7.0 + 0.5 * half)) == doctest::Approx(0.3));
        CHECK(p.c1(half + 3.0) == 0.0);
        CHECK(p.half_cycle_lambdas == std::vector<double>{0.8, 0.3});
        REQUIRE(p.nominal_crossings.size() == 2);
        CHECK(p.nominal_crossings[0] + p.nominal_crossings[1] == doctest::Approx(p.duration()));
        CHECK(p.u(p.nominal_crossings[1]) == doctest::Approx(1.0));
    }

    TEST_CASE("protocol validation") {
        CHECK_THROWS_AS((void)make_protocol(SystemSpec::two_site(), StirCycle{}), ConfigError);
        CHECK_THROWS_AS((void)make_protocol(SystemSpec::two_site(), LinearRampLZ{0.1, 0.01, 1.0, 0.5, 0.25}), ConfigError);
        CHECK_THROWS_AS((void)make_protocol(SystemSpec::two_site(), ConstantDrive{0.0, 0.1, 0.1, 1.0}), ConfigError);
        CHECK_THROWS_AS((void)make_protocol(SystemSpec::three_site(), LinearRampLZ{0.1, -0.01}), ConfigError);
        CHECK_THROWS_AS((void)make_protocol(SystemSpec::three_site(), ConstantDrive{0.0, 0.1, 0.1, 0.0}), ConfigError);
        CHECK_THROWS_AS((void)make_protocol(SystemSpec{4}, ConstantDrive{}), ConfigError);
    }

    TEST_CASE("raised-cosine envelope") {
        CHECK(tukey_envelope(0.0, 0.25) == 0.0);
        CHECK(tukey_envelope(1.0, 0.25) == doctest::Approx(0.0));
        CHECK(tukey_envelope(0.5, 0.25) == 1.0);
        CHECK(tukey_envelope(0.125, 0.25) == doctest::Approx(0.5));
        CHECK(tukey_envelope(0.3, 0.0) == 1.0);
    }

    TEST_CASE("small-coupling warning") {
        const SystemSpec spec = SystemSpec::three_site();
        CHECK_FALSE(constant(spec, 0.0, 0.1, 0.1).small_coupling_warning());
        const auto w = constant(spec, 0.0, 0.3, 0.0).small_coupling_warning();
        REQUIRE(w);
        CHECK(*w == doctest::Approx(0.3));
    }

    TEST_CASE("adiabaticity report") {
        const SystemSpec two = SystemSpec::two_site();
        const auto slow = adiabaticity_report(two, make_protocol(two, LinearRampLZ{0.1, 0.01, 4.0, 1.0, 0.25}));
        REQUIRE(slow.crossings.size() == 1);
        CHECK(slow.p_lz == doctest::Approx(std::exp(-2.0 * std::numbers::pi)).epsilon(1e-9));
        CHECK(slow.p_lz == doctest::Approx(0.00187).epsilon(0.01));
        CHECK(slow.adiabatic());

        const auto flat = adiabaticity_report(two, make_protocol(two, LinearRampLZ{0.0, 0.01, 4.0, 1.0, 0.25}));
        CHECK(flat.p_lz == 1.0);
        CHECK_FALSE(flat.adiabatic());

        const SystemSpec three = SystemSpec::three_site();
        StirCycle sc;
        sc.c_eff = 0.05;
        sc.u_span = 0.125;  // t_p = 4 u_span / udot = 10 c / udot
        sc.udot = 0.002;
        const auto stir = adiabaticity_report(three, make_protocol(three, sc));
        REQUIRE(stir.crossings.size() == 2);
        CHECK(stir.t_p == doctest::Approx(10.0 * stir.t_lz).epsilon(1e-12));
        CHECK(stir.time_scales_separated);
        CHECK(stir.crossings[0].udot == doctest::Approx(0.002).epsilon(1e-9));
        CHECK(stir.crossings[1].udot == doctest::Approx(-0.002).epsilon(1e-9));
        CHECK(stir.crossings[0].time + stir.crossings[1].time == doctest::Approx(stir.t_p).epsilon(1e-9));

        StirCycle quick = sc;
        quick.udot = 0.02;
        quick.c_eff = 0.01;
        quick.u_span = 0.5;
        const auto q = adiabaticity_report(three, make_protocol(three, quick));
        CHECK(q.time_scales_separated);
        CHECK_FALSE(q.lz_small);

        CHECK_THROWS_AS((void)adiabaticity_report(three, constant(three, 0.3, 0.1, 0.1, 5.0)), NoCrossing);
    }
}
