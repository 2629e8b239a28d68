#include <catch2/catch_amalgamated.hpp>

#include "cogarch/levy.hpp"
#include "cogarch/oracles.hpp"

using namespace cogarch;

namespace {
const Theta kTheta0{0.04, 0.053, 0.038};
}

TEST_CASE("theta coordinates must be strictly positive") {
    REQUIRE_THROWS_AS(Theta(0.0, 1.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(Theta(1.0, -0.1, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(Theta(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("variance gamma requires the standardized A = 1") {
    REQUIRE_THROWS_AS(LevyModel::variance_gamma(1.0, 2.0), std::invalid_argument);
    REQUIRE_THROWS_AS(LevyModel::variance_gamma(-1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(LevyModel::compound_poisson_normal(0.0), std::invalid_argument);
}

TEST_CASE("variance gamma measure moments: closed form vs quadrature") {
    for (double C : {1.0, 2.5}) {
        const LevyModel m = LevyModel::variance_gamma(C);
        for (int order : {2, 4, 6, 8}) {
            const double closed = m.levy_measure_moment(order);
            const double numeric = oracles::levy_measure_moment_numeric(m, order, 1e-12);
            REQUIRE(closed == Catch::Approx(numeric).epsilon(1e-8));
        }
        REQUIRE(m.levy_measure_moment(3) == 0.0);
    }
    // standardized C = 1 values are the normal-like sequence 1, 3, 30, 630
    const LevyModel vg = LevyModel::variance_gamma(1.0);
    REQUIRE(vg.levy_measure_moment(2) == Catch::Approx(1.0).epsilon(1e-14));
    REQUIRE(vg.levy_measure_moment(4) == Catch::Approx(3.0).epsilon(1e-14));
    REQUIRE(vg.levy_measure_moment(6) == Catch::Approx(30.0).epsilon(1e-14));
    REQUIRE(vg.levy_measure_moment(8) == Catch::Approx(630.0).epsilon(1e-14));
}

TEST_CASE("compound Poisson normal measure moments: closed form vs quadrature") {
    const LevyModel m = LevyModel::compound_poisson_normal(2.0);
    REQUIRE(m.cpn_jump_sd() == Catch::Approx(1.0 / std::sqrt(2.0)));
    for (int order : {2, 4, 6, 8}) {
        const double closed = m.levy_measure_moment(order);
        const double numeric = oracles::levy_measure_moment_numeric(m, order, 1e-12);
        REQUIRE(closed == Catch::Approx(numeric).epsilon(1e-8));
    }
    REQUIRE(m.levy_measure_moment(2) == Catch::Approx(1.0).epsilon(1e-14));
    REQUIRE(m.levy_measure_moment(4) == Catch::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("both families are standardized: unit variance, no Brownian part") {
    REQUIRE(LevyModel::variance_gamma(1.0).tau2() == Catch::Approx(0.0).margin(1e-14));
    REQUIRE(LevyModel::compound_poisson_normal(3.0).tau2() == Catch::Approx(0.0).margin(1e-14));
    REQUIRE(LevyModel::variance_gamma(1.0).qv_moment(2) == 1.0);
    REQUIRE(LevyModel::variance_gamma(1.0).qv_moment(4) == Catch::Approx(3.0));
}

TEST_CASE("moment order guards") {
    const LevyModel m = LevyModel::variance_gamma(1.0);
    REQUIRE_THROWS_AS(m.levy_measure_moment(1), std::invalid_argument);
    REQUIRE_THROWS_AS(m.levy_measure_moment(66), numeric_error);
    REQUIRE_THROWS_AS(m.qv_moment(3), std::invalid_argument);
    REQUIRE_THROWS_AS(psi(m, kTheta0, -1), std::invalid_argument);
    REQUIRE(psi(m, kTheta0, 0) == 0.0);
}

TEST_CASE("Laplace exponent: closed form vs quadrature") {
    const Theta other{0.06, 0.08, 0.02};
    for (const LevyModel& m :
         {LevyModel::variance_gamma(1.0), LevyModel::compound_poisson_normal(2.0)}) {
        for (const Theta& th : {kTheta0, other}) {
            for (int c = 1; c <= 4; ++c) {
                const double closed = psi(m, th, c);
                const double numeric = oracles::psi_numeric(m, th, c, 1e-12);
                REQUIRE(closed == Catch::Approx(numeric).epsilon(1e-7).margin(1e-10));
            }
        }
    }
}

TEST_CASE("Laplace exponent values at the reference parameter point") {
    const LevyModel m = LevyModel::variance_gamma(1.0);
    // Psi(1) = -eta + phi is exact; Psi(4) < 0 is the moment condition the
    // optimal estimator relies on
    REQUIRE(psi(m, kTheta0, 1) == Catch::Approx(-0.015).epsilon(1e-12));
    REQUIRE(psi(m, kTheta0, 2) == Catch::Approx(-0.025668).epsilon(1e-10));
    REQUIRE(psi(m, kTheta0, 3) == Catch::Approx(-0.03035784).epsilon(1e-10));
    REQUIRE(psi(m, kTheta0, 4) == Catch::Approx(-0.0261).margin(5e-4));
    REQUIRE(psi(m, kTheta0, 4) < 0.0);
}

TEST_CASE("stationarity check covers all orders up to k") {
    const LevyModel m = LevyModel::variance_gamma(1.0);
    REQUIRE(stationarity_check(m, kTheta0, 4));
    // large phi: Psi(1) still negative but higher orders explode
    const Theta edge{0.04, 0.08, 0.06};
    REQUIRE(psi(m, edge, 1) < 0.0);
    REQUIRE_FALSE(stationarity_check(m, edge, 4));
    REQUIRE_FALSE(stationarity_check(m, kTheta0, 40));
}
