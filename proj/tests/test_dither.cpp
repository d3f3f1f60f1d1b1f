#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "esd/dither.hpp"

using namespace esd;

namespace {

Mat example_hessian() {
    Mat h(3, 3);
    h << 100, 30, 5, 30, 20, 5, 5, 5, 50;
    return h;
}

}  // namespace

TEST_CASE("period law") {
    CHECK(make_period(3, 0, 0.3) == 7);
    CHECK(make_period(3, 0, 1e-12) == 7);
    CHECK(make_period(3, 5, 1e-4) == 1500);
    CHECK(make_period(1, 1, 0.25) == 3);
    CHECK(make_period(3, 50, 1e-6) == 150000);
    // ⌊1/√ε⌋ exactly at perfect squares and just around them
    CHECK(floor_inv_sqrt(1e-4) == 100);
    CHECK(floor_inv_sqrt(0.25) == 2);
    CHECK(floor_inv_sqrt(std::nextafter(0.25, 1.0)) == 1);
    CHECK(floor_inv_sqrt(1.0 / 9.0) == 3);
    CHECK(floor_inv_sqrt(3.6e-12) == 527046);
}

TEST_CASE("dither and demodulation values") {
    Vec a(3);
    a << 0.1, 0.2, 0.4;
    const DitherConfig cfg(a, 1e-4, 5);
    CHECK(cfg.frequencies()(1) == doctest::Approx(2 * 2 * std::numbers::pi / 1500));
    CHECK(dither_vec(cfg, 0).norm() == 0.0);
    CHECK(demod_vec(cfg, 0).norm() == 0.0);
    CHECK(dither_vec(cfg, cfg.period()).cwiseAbs().maxCoeff() < 1e-12);
    for (std::int64_t j : {1, 17, 749, 1499, 123456}) {
        const Vec s = dither_vec(cfg, j), m = demod_vec(cfg, j);
        for (int i = 0; i < 3; ++i) {
            const double oracle = std::sin(2.0 * std::numbers::pi * (i + 1) * static_cast<double>(j % 1500) / 1500.0);
            CHECK(s(i) == doctest::Approx(a(i) * oracle).epsilon(1e-12));
            CHECK(m(i) == doctest::Approx(2.0 / a(i) * oracle).epsilon(1e-12));
            CHECK(m(i) * s(i) >= 0.0);
            CHECK(m(i) * s(i) == doctest::Approx(2.0 * oracle * oracle).epsilon(1e-12));
        }
    }
}

TEST_CASE("signals are T-periodic up to 10 periods") {
    for (double eps : {1e-4, 3e-7}) {
        const DitherConfig cfg(Vec::Constant(3, 0.1), eps, 5);  // table and direct sin paths
        const std::int64_t t = cfg.period();
        std::mt19937_64 gen(2);
        for (int k = 0; k < 200; ++k) {
            const std::int64_t j = static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(t));
            const Vec s0 = dither_vec(cfg, j);
            for (int p = 1; p <= 10; ++p) CHECK((dither_vec(cfg, j + p * t) - s0).cwiseAbs().maxCoeff() <= 1e-10);
            CHECK((demod_vec(cfg, j + 7 * t) - demod_vec(cfg, j)).cwiseAbs().maxCoeff() <= 1e-10);
        }
    }
}

TEST_CASE("gain schedule") {
    GainSchedule g{0.1, 0.005, 0.3e-4};
    CHECK(gain(g, 0).alpha == 0.1);
    CHECK(gain(GainSchedule{2.0, 0.0, 0.1}, 123456).alpha == 2.0);
    // long double oracle for 0.1·(1 − 1.5e-7)^1e6
    const long double oracle = 0.1L * std::pow(1.0L - 1.5e-7L, 1.0e6L);
    CHECK(gain(g, 1000000).alpha == doctest::Approx(static_cast<double>(oracle)).epsilon(1e-13));
    CHECK(gain(g, 1000000).alpha < gain(g, 999999).alpha);
    CHECK_FALSE(gain(g, 1000000).exhausted);
    CHECK(gain(GainSchedule{1.0, 0.5, 0.5}, 5000).exhausted);
}

TEST_CASE("incremental gain tracks the closed form") {
    const GainSchedule g{1.0, 0.005, 1e-3};
    GainTracker t(g);
    double worst = 0.0;
    for (std::int64_t j = 1; j <= 1000000; ++j) {
        t.advance();
        if (j % 997 == 0) worst = std::max(worst, std::abs(t.value() / gain(g, j).alpha - 1.0));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("window averaging identities") {
    struct Case {
        int n, d;
        double eps;
    };
    std::mt19937_64 gen(4);
    for (Case c : {Case{1, 0, 1e-2}, Case{3, 0, 1e-3}, Case{3, 5, 1e-4}, Case{2, 3, 4e-4}, Case{4, 2, 1e-3}}) {
        Mat h = Mat::Identity(c.n, c.n) * 3.0;
        if (c.n == 3) h = example_hessian();
        Vec a(c.n);
        for (int i = 0; i < c.n; ++i) a(i) = 0.05 + 0.1 * i;
        const DitherConfig cfg(a, c.eps, c.d);
        for (std::int64_t t : {std::int64_t{0}, std::int64_t{13}, cfg.period() * 3 + 1}) {
            const AveragingSums s = averaging_sums(cfg, h, t);
            CHECK(s.mean_demod.cwiseAbs().maxCoeff() <= 1e-9);
            CHECK((s.mean_demod_dither - Mat::Identity(c.n, c.n)).cwiseAbs().maxCoeff() <= 1e-9);
            CHECK(s.mean_demod_quadratic.cwiseAbs().maxCoeff() <= 1e-9);
        }
    }
}

TEST_CASE("rho vanishes with k = 0") {
    const DitherConfig cfg(Vec::Constant(3, 0.1), 1e-4, 5);
    const RhoValues r = rho_exact(cfg, 0.0, example_hessian(), 37);
    for (int l = 1; l <= 4; ++l) CHECK(r.norm(l) == 0.0);
}

TEST_CASE("rho discrete derivative equals eps times the coefficient") {
    const DitherConfig cfg(Vec::Constant(3, 0.1), 1e-4, 5);
    const Mat h = example_hessian();
    const double k = 0.005;
    std::mt19937_64 gen(8);
    for (int s = 0; s < 25; ++s) {
        const auto j = static_cast<std::int64_t>(gen() % 5000);
        const RhoValues r0 = rho_exact(cfg, k, h, j), r1 = rho_exact(cfg, k, h, j + 1);
        const CoefficientTerms a = coefficient_terms(cfg, k, h, j);
        CHECK((r1.rho1 - r0.rho1 - 1e-4 * a.a1).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((r1.rho2 - r0.rho2 - 1e-4 * a.a2).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((r1.rho3 - r0.rho3 - 1e-4 * a.a3).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((r1.rho4 - r0.rho4 - 1e-4 * a.a4).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("rho tracker agrees with direct sums") {
    const DitherConfig cfg(Vec::Constant(3, 0.1), 1e-4, 5);
    const Mat h = example_hessian();
    RhoTracker tr(cfg, 0.005, h, 10);
    tr.advance_to(2000);
    const RhoValues direct = rho_exact(cfg, 0.005, h, 2000);
    CHECK((tr.value().rho1 - direct.rho1).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((tr.value().rho3 - direct.rho3).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS(tr.advance_to(5));
}

TEST_CASE("rho_1 period maximum for the example gains") {
    // Brute-force window sums at 100 points over one period, D_M = 5, ε = 1e-4.
    const DitherConfig cfg(Vec::Constant(3, 0.1), 1e-4, 5);
    const Mat h = example_hessian();
    double worst = 0.0;
    for (int p = 0; p < 100; ++p) worst = std::max(worst, rho_exact(cfg, 0.005, h, p * 15).norm(1));
    // Golden from an independent numpy evaluation of the same window sums. The closed-form
    // bound at these inputs is ρ̄₁√ε = 0.1346.
    CHECK(worst == doctest::Approx(0.020096994433004424).epsilon(1e-10));
    CHECK(worst < 13.4580285 * 1e-2);
}
