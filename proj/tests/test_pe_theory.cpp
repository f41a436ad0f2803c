#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ropelab/error.hpp"
#include "ropelab/pe_theory.hpp"

using namespace ropelab;

namespace {

std::vector<double> normal_vector(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> dist;
    std::vector<double> v(n);
    for (auto& x : v) {
        x = dist(rng);
    }
    return v;
}

double oracle_c_d(double scale, double eff_base, int d) {
    double s = 0;
    for (int j = 0; j < d / 2; ++j) {
        s += std::sin(scale * std::pow(eff_base, -2.0 * j / d));
    }
    return s;
}

} // namespace

TEST_CASE("c_d examples") {
    CHECK(c_d(PEVariant::pi(10000, 2, 0.25)) == doctest::Approx(std::sin(0.25)).epsilon(1e-15));
    CHECK(c_d(PEVariant::pi(10000, 2, 0.25)) == doctest::Approx(0.247404).epsilon(1e-6));
    CHECK(c_d(PEVariant::abf(100, 4, 1)) == doctest::Approx(std::sin(1.0) + std::sin(0.1)).epsilon(1e-15));
    CHECK(c_d(PEVariant::abf(100, 4, 1)) == doctest::Approx(0.941304).epsilon(1e-6));
    CHECK(c_d(PEVariant::rope(100, 4)) == c_d(PEVariant::abf(100, 4, 1)));
    CHECK_THROWS_AS(c_d(PEVariant::xpos_abf(10000, 64, 50)), Error);

    for (int d : {64, 512, 4096}) {
        CHECK(c_d(PEVariant::pi(10000, d, 0.25)) == doctest::Approx(oracle_c_d(0.25, 1e4, d)).epsilon(1e-13));
        CHECK(c_d(PEVariant::abf(10000, d, 50)) == doctest::Approx(oracle_c_d(1, 5e5, d)).epsilon(1e-13));
        CHECK(c_d_mean(PEVariant::abf(10000, d, 50)) == doctest::Approx(2.0 / d * oracle_c_d(1, 5e5, d)));
    }
}

TEST_CASE("mean consecutive sine at d=4096 sits inside the limit bounds") {
    const auto pi = PEVariant::pi(10000, 4096, 0.25);
    const auto abf = PEVariant::abf(10000, 4096, 50);
    for (const auto& v : {pi, abf}) {
        const auto lb = limit_bounds(v);
        CHECK(c_d_mean(v) > lb.lower);
        CHECK(c_d_mean(v) < lb.upper);
    }
    CHECK(std::abs(c_d_mean(pi) / 0.027 - 1) < 0.05);
    CHECK(std::abs(c_d_mean(abf) / 0.076 - 1) < 0.05);
}

TEST_CASE("limit_bounds closed forms") {
    const auto pi = limit_bounds(PEVariant::pi(10000, 128, 0.25));
    const double lb = std::log(10000.0);
    CHECK(pi.approximation == doctest::Approx(0.25 / lb).epsilon(1e-15));
    CHECK(pi.upper == doctest::Approx(0.25 / lb * (9999.0 / 10000)).epsilon(1e-15));
    CHECK(pi.lower == doctest::Approx(0.25 / lb * (9999.0 / 10000 - 0.25 / std::numbers::pi * (1e8 - 1) / 1e8))
                          .epsilon(1e-14));
    CHECK(std::abs(pi.approximation - 0.027) < 0.0005);

    const auto abf = limit_bounds(PEVariant::abf(10000, 128, 50));
    const double bb = 5e5;
    CHECK(abf.approximation == doctest::Approx(1 / std::log(bb)).epsilon(1e-15));
    CHECK(abf.upper == doctest::Approx((bb - 1) / bb / std::log(bb)).epsilon(1e-15));
    CHECK(abf.lower ==
          doctest::Approx(((bb - 1) / bb - 1 / std::numbers::pi * (bb * bb - 1) / (bb * bb)) / std::log(bb)));
    CHECK(std::abs(abf.approximation - 0.076) < 0.0005);
}

TEST_CASE("limit_bounds: lower <= upper on random parameterizations") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> logb(std::log(2.0), std::log(1e7));
    std::uniform_real_distribution<double> alpha(1e-3, 1.0);
    std::uniform_real_distribution<double> logbeta(0.0, std::log(1e3));
    for (int i = 0; i < 1000; ++i) {
        const double b = std::exp(logb(rng));
        const auto v = (i % 2 == 0) ? PEVariant::pi(b, 64, alpha(rng)) : PEVariant::abf(b, 64, std::exp(logbeta(rng)));
        const auto bounds = limit_bounds(v);
        CHECK(bounds.lower <= bounds.upper);
        CHECK(bounds.approximation >= bounds.upper);
    }
}

TEST_CASE("convergence of the mean sine toward the limit") {
    for (const auto& make : {+[](int d) { return PEVariant::pi(10000, d, 0.25); },
                             +[](int d) { return PEVariant::abf(10000, d, 50); }}) {
        double prev_gap = INFINITY;
        for (int d = 64; d <= 8192; d *= 2) {
            const double gap = std::abs(c_d_mean(make(d)) - c_d_mean(make(2 * d)));
            CHECK(gap < prev_gap);
            prev_gap = gap;
        }
        const auto v = make(8192);
        const auto lb = limit_bounds(v);
        CHECK(c_d_mean(v) > lb.lower);
        CHECK(c_d_mean(v) < lb.upper);
    }
}

TEST_CASE("verify_consecutive_similarity examples") {
    const auto v = PEVariant::abf(100, 4, 1);
    const std::vector<double> ones(4, 1.0);
    const auto chk = verify_consecutive_similarity(v, ones, 0);
    CHECK(chk.c_d == doctest::Approx(0.941304).epsilon(1e-6));
    CHECK(chk.observed_similarity == doctest::Approx(0.470652).epsilon(1e-6));
    CHECK(chk.observed_similarity == doctest::Approx((std::sin(1.0) + std::sin(0.1)) / 2).epsilon(1e-14));

    for (const auto& var : {PEVariant::pi(10000, 64, 0.25), PEVariant::abf(10000, 256, 50), PEVariant::rope(10000, 8)}) {
        const std::vector<double> x(static_cast<std::size_t>(var.head_dim()), 1.0);
        const auto r = verify_consecutive_similarity(var, x, 17);
        const double expect = 2 * c_d(var) / var.head_dim();
        CHECK(r.lower_bound == doctest::Approx(expect).epsilon(1e-14));
        CHECK(r.upper_bound == doctest::Approx(expect).epsilon(1e-14));
        CHECK(r.observed_similarity == doctest::Approx(expect).epsilon(1e-12));
        // The statement's component-level upper bound (without the factor 2) fails here.
        CHECK(r.component_upper_bound / 2 < r.observed_similarity);
    }

    CHECK_THROWS_AS(verify_consecutive_similarity(v, std::vector<double>(4, 0.0), 0), Error);
    CHECK_THROWS_AS(verify_consecutive_similarity(PEVariant::xpos_abf(10000, 4, 50), ones, 0), Error);
}

TEST_CASE("sandwich property sweep") {
    std::mt19937_64 rng(2024);
    for (int d : {64, 128, 512}) {
        const std::vector<PEVariant> vs{PEVariant::pi(10000, d, 0.125), PEVariant::pi(10000, d, 0.25),
                                        PEVariant::abf(10000, d, 50), PEVariant::abf(10000, d, 1)};
        for (const auto& v : vs) {
            for (int i = 0; i < 200; ++i) {
                const auto x = normal_vector(rng, static_cast<std::size_t>(d));
                const auto c0 = verify_consecutive_similarity(v, x, 0);
                for (long long n : {1LL, 100LL, 10000LL}) {
                    const auto cn = verify_consecutive_similarity(v, x, n);
                    CHECK(std::abs(cn.observed_similarity - c0.observed_similarity) <= 1e-12);
                }
                const double slack = 1e-12 * std::abs(c0.upper_bound);
                CHECK(c0.observed_similarity >= c0.lower_bound - slack);
                CHECK(c0.observed_similarity <= c0.upper_bound + slack);
                CHECK(c0.component_lower_bound <= c0.lower_bound + slack);
                CHECK(c0.component_upper_bound >= c0.upper_bound - slack);
                CHECK(c0.lower_bound < c0.upper_bound);
            }
        }
    }
}

TEST_CASE("granularity_compare") {
    const auto g = granularity_compare(PEVariant::pi(10000, 128, 0.25), PEVariant::abf(10000, 128, 50));
    CHECK(g.pi_granularity == doctest::Approx(0.25 / std::log(1e4)).epsilon(1e-14));
    CHECK(g.abf_granularity == doctest::Approx(1 / std::log(5e5)).epsilon(1e-14));
    CHECK(g.ratio == doctest::Approx(2.807).epsilon(1e-3));
    CHECK(std::round(g.pi_granularity * 1000) / 1000 == 0.027);
    CHECK(std::round(g.abf_granularity * 1000) / 1000 == 0.076);

    const auto same = granularity_compare(PEVariant::pi(10000, 128, 1), PEVariant::abf(10000, 128, 1));
    CHECK(same.ratio == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(same.pi_granularity == doctest::Approx(1 / std::log(1e4)));

    CHECK_THROWS_AS(granularity_compare(PEVariant::abf(10000, 8, 2), PEVariant::abf(10000, 8, 2)), Error);
    CHECK_THROWS_AS(granularity_compare(PEVariant::pi(10000, 8, .5), PEVariant::rope(10000, 8)), Error);

    // ratio > 1 exactly when alpha < ln b / (ln b + ln beta).
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::uniform_real_distribution<double> lbeta(0.01, 8.0);
    for (int i = 0; i < 500; ++i) {
        const double alpha = u(rng);
        const double beta = std::exp(lbeta(rng));
        const double threshold = std::log(1e4) / (std::log(1e4) + std::log(beta));
        if (std::abs(alpha - threshold) < 1e-9) {
            continue;
        }
        const auto r = granularity_compare(PEVariant::pi(1e4, 8, alpha), PEVariant::abf(1e4, 8, beta));
        CHECK((r.ratio > 1) == (alpha < threshold));
    }
}

TEST_CASE("granularity is monotone in alpha and beta") {
    double prev = 0;
    for (double alpha = 0.05; alpha <= 1.0; alpha += 0.05) {
        const double a = limit_bounds(PEVariant::pi(10000, 64, alpha)).approximation;
        CHECK(a > prev);
        prev = a;
    }
    prev = INFINITY;
    for (double beta = 1; beta <= 1000; beta *= 1.7) {
        const double a = limit_bounds(PEVariant::abf(10000, 64, beta)).approximation;
        CHECK(a < prev);
        prev = a;
    }
}

TEST_CASE("theta1_relative_difference") {
    const double r = theta1_relative_difference(128, 10000, 500000);
    CHECK(r == doctest::Approx(1 - std::exp((2.0 / 128) * (std::log(1e4) - std::log(5e5)))).epsilon(1e-14));
    CHECK(1 - r == doctest::Approx(0.94071).epsilon(1e-5));
    CHECK(r == doctest::Approx(0.0593).epsilon(1e-3));
    CHECK(theta1_relative_difference(128, 10000, 10000) == 0.0);
    CHECK(theta1_relative_difference(1000000, 10000, 500000) < 1e-4);
    CHECK_THROWS_AS(theta1_relative_difference(3, 10000, 500000), Error);
    CHECK_THROWS_AS(theta1_relative_difference(2, 10000, 500000), Error);
    CHECK_THROWS_AS(theta1_relative_difference(128, 500000, 10000), Error);
    CHECK_THROWS_AS(theta1_relative_difference(128, 1.0, 10000), Error);
}
