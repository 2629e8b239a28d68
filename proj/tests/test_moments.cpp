#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cogarch/moments.hpp"
#include "cogarch/oracles.hpp"

using namespace cogarch;

namespace {
const Theta kTheta0{0.04, 0.053, 0.038};
const LevyModel kVg = LevyModel::variance_gamma(1.0);
}

TEST_CASE("stationary sigma moments follow the product formula") {
    MomentCache cache(kVg, kTheta0, 4);
    // E sigma^{2k} = k! beta^k prod_{l<=k} (-1/Psi(l)), computed independently
    long double expect = 1.0L;
    for (int k = 1; k <= 4; ++k) {
        expect *= k * static_cast<long double>(kTheta0.beta) / (-psi(kVg, kTheta0, k));
        REQUIRE(cache.stationary_sigma_moment(k) ==
                Catch::Approx(static_cast<double>(expect)).epsilon(1e-12));
    }
    REQUIRE(cache.stationary_sigma_moment(1) == Catch::Approx(0.04 / 0.015).epsilon(1e-12));
    REQUIRE_THROWS_AS(cache.stationary_sigma_moment(5), std::invalid_argument);
}

TEST_CASE("table construction rejects nonstationary parameters") {
    const Theta bad{0.04, 0.01, 0.05}; // Psi(1) = 0.04 > 0
    REQUIRE_THROWS_AS(JTable(kVg, bad, 2), numeric_error);
    REQUIRE_THROWS_AS(JTable(kVg, kTheta0, 5), std::invalid_argument);
}

TEST_CASE("marginal return moments at unit lag match the reference values") {
    MomentCache cache(kVg, kTheta0, 4);
    REQUIRE(cache.marginal_g_moment(1, 1.0) == Catch::Approx(2.66667).epsilon(2e-5));
    REQUIRE(cache.marginal_g_moment(2, 1.0) == Catch::Approx(52.6779).epsilon(2e-5));
    REQUIRE(cache.marginal_g_moment(3, 1.0) == Catch::Approx(3635.69).epsilon(2e-5));
    REQUIRE(cache.marginal_g_moment(4, 1.0) == Catch::Approx(844166.0).epsilon(2e-5));
    // E G_t^2 = t E sigma^2 for all t, not only t = 1
    for (double t : {0.5, 1.0, 2.0, 3.7})
        REQUIRE(cache.marginal_g_moment(1, t) ==
                Catch::Approx(t * cache.stationary_sigma_moment(1)).epsilon(1e-10));
}

TEST_CASE("first-order coefficient J_100 at unit lag") {
    MomentCache cache(kVg, kTheta0, 4);
    // E_v sigma^2_{v+1} = J_101 sigma^2_v + J_100; the constant equals
    // E sigma^2 (1 - e^{Psi(1)})
    REQUIRE(cache.jtable().at(1, 0, 0).eval(1.0, 0.0) == Catch::Approx(0.0397015).epsilon(1e-5));
    REQUIRE(cache.jtable().at(1, 0, 1).eval(1.0, 0.0) ==
            Catch::Approx(std::exp(-0.015)).epsilon(1e-12));
}

TEST_CASE("closed-form coefficients match nested quadrature for k <= 3") {
    const JTable jt(kVg, kTheta0, 3);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> tdist(0.2, 3.0);
    for (int point = 0; point < 10; ++point) {
        const double t = tdist(rng);
        const double d = 0.5 * (point % 3);
        const double h = t - d > 0.1 ? t - d : t;
        const double dd = t - d > 0.1 ? d : 0.0;
        for (int k = 1; k <= 3; ++k) {
            for (int i = 0; i <= k; ++i) {
                // the i = 0 row depends on (h, d) only through h + d
                const double closed = jt.at(k, 0, k - i).eval(h, dd);
                const double numeric = oracles::nested_j_quadrature(kVg, kTheta0, k, i, h + dd, 1e-12);
                REQUIRE(closed == Catch::Approx(numeric).epsilon(1e-8).margin(1e-12));
            }
        }
    }
}

TEST_CASE("closed-form coefficients match the RK4 ODE solve for k <= 4") {
    const JTable jt(kVg, kTheta0, 4);
    for (auto [h, d] : {std::pair{0.7, 0.0}, {1.0, 0.0}, {1.3, 0.9}, {0.4, 2.1}}) {
        const oracles::OdeJTable ode(kVg, kTheta0, 4, h, d);
        for (int k = 0; k <= 4; ++k)
            for (int i = 0; i <= k; ++i)
                for (int r = 0; r <= k; ++r) {
                    const double closed = jt.at(k, i, r).eval(h, d);
                    const double numeric = ode.at(k, i, r);
                    REQUIRE(closed == Catch::Approx(numeric).epsilon(1e-8).margin(1e-10));
                }
    }
}

TEST_CASE("conditioning gap factorizes through the i = 0 propagator") {
    // J_{kir}(h, d) = sum_s J_{kis}(h, 0) J_{s0r}(d, 0): conditioning at the
    // later time and propagating the sigma powers across the gap is the same
    // as conditioning across the whole gap at once
    const JTable jt(kVg, kTheta0, 4);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.2, 2.5);
    for (int point = 0; point < 15; ++point) {
        const double h = u(rng), d = u(rng);
        for (int k = 0; k <= 4; ++k)
            for (int i = 0; i <= k; ++i)
                for (int r = 0; r <= k; ++r) {
                    const double direct = jt.at(k, i, r).eval(h, d);
                    long double factored = 0.0L;
                    for (int s = r; s <= k; ++s)
                        factored += jt.at(k, i, s).eval(h, 0.0) * jt.at(s, 0, r).eval(d, 0.0);
                    REQUIRE(direct == Catch::Approx(static_cast<double>(factored))
                                          .epsilon(1e-10)
                                          .margin(1e-13));
                }
    }
}

TEST_CASE("law of total expectation closes the i = 0 row") {
    MomentCache cache(kVg, kTheta0, 4);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 4.0);
    for (int point = 0; point < 20; ++point) {
        const double h = u(rng), d = u(rng);
        for (int k = 1; k <= 4; ++k) {
            long double total = 0.0L;
            for (int r = 0; r <= k; ++r)
                total += cache.jtable().at(k, 0, r).eval(h, d) * cache.stationary_sigma_moment(r);
            REQUIRE(static_cast<double>(total) ==
                    Catch::Approx(cache.stationary_sigma_moment(k)).epsilon(1e-10));
        }
    }
}

TEST_CASE("conditional product moment input guards") {
    MomentCache cache(kVg, kTheta0, 2);
    REQUIRE_THROWS_AS(conditional_product_moment(cache.jtable(), 2, 1, -1.0, 0.0, 1.0),
                      std::invalid_argument);
    // with sigma^2_v = 0 only the r = 0 coefficient survives
    REQUIRE(conditional_product_moment(cache.jtable(), 1, 0, 1.0, 0.0, 0.0) ==
            Catch::Approx(cache.jtable().at(1, 0, 0).eval(1.0, 0.0)));
}

TEST_CASE("joint return moments: canonicalization and guards") {
    MomentCache cache(kVg, kTheta0, 4);
    const double r = 1.0;
    const double base = joint_return_moment(cache, {{0.0, 1}, {1.0, 1}}, r);
    REQUIRE(base == Catch::Approx(9.22681).epsilon(2e-5)); // lag-1 squared-return product
    // order of the lag list cannot matter
    REQUIRE(joint_return_moment(cache, {{1.0, 1}, {0.0, 1}}, r) == Catch::Approx(base));
    // zero powers drop out
    REQUIRE(joint_return_moment(cache, {{0.0, 1}, {0.5, 0}, {1.0, 1}}, r) == Catch::Approx(base));
    // coincident times merge into a higher power
    REQUIRE(joint_return_moment(cache, {{0.0, 1}, {0.0, 1}}, r) ==
            Catch::Approx(cache.marginal_g_moment(2, r)));
    // a single return is the marginal moment
    REQUIRE(joint_return_moment(cache, {{3.0, 2}}, r) ==
            Catch::Approx(cache.marginal_g_moment(2, r)));
    REQUIRE(joint_return_moment(cache, {}, r) == 1.0);
    // overlapping windows and untabulated total orders are refused
    REQUIRE_THROWS_AS(joint_return_moment(cache, {{0.0, 1}, {0.5, 1}}, r), numeric_error);
    REQUIRE_THROWS_AS(joint_return_moment(cache, {{0.0, 3}, {1.0, 2}}, r), numeric_error);
    REQUIRE_THROWS_AS(joint_return_moment(cache, {{0.0, 1}}, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(joint_return_moment(cache, {{0.0, -1}}, r), std::invalid_argument);
}

TEST_CASE("joint return moments decay to independence at large gaps") {
    MomentCache cache(kVg, kTheta0, 4);
    const double eg2 = cache.marginal_g_moment(1, 1.0);
    const double far = joint_return_moment(cache, {{0.0, 1}, {1500.0, 1}}, 1.0);
    REQUIRE(far == Catch::Approx(eg2 * eg2).epsilon(1e-6));
}
