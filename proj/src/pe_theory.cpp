#include "ropelab/pe_theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ropelab/error.hpp"

namespace ropelab {

namespace {

void check_theorem_variant(const PEVariant& variant) {
    if (variant.kind() == PEKind::XPos_ABF) {
        fail("the consecutive-similarity theorem does not cover xPos-ABF");
    }
    // Sine arguments must lie in (0, 1]; alpha <= 1 and beta * b >= 1 are
    // already PEVariant invariants, the check guards the largest argument.
    require(rotation_angle(variant, 0) <= 1.0, "sine arguments must lie in (0, 1]");
}

// Effective base of the geometric sum: b for RoPE and PI, b * beta for ABF.
double effective_base(const PEVariant& variant) {
    if (variant.kind() == PEKind::RoPE_ABF) {
        return variant.base_frequency() * *variant.abf_beta();
    }
    return variant.base_frequency();
}

} // namespace

double c_d(const PEVariant& variant) {
    check_theorem_variant(variant);
    double sum = 0.0;
    for (std::size_t j = 0; j < variant.n_pairs(); ++j) {
        sum += std::sin(rotation_angle(variant, j));
    }
    return sum;
}

double c_d_mean(const PEVariant& variant) {
    return 2.0 * c_d(variant) / variant.head_dim();
}

LimitBounds limit_bounds(const PEVariant& variant) {
    check_theorem_variant(variant);
    const double b = effective_base(variant);
    const double scale = variant.kind() == PEKind::RoPE_PI ? *variant.pi_alpha() : 1.0;
    const double inv_log = 1.0 / std::log(b);
    const double head = (b - 1.0) / b;
    const double tail = (scale / std::numbers::pi) * (b * b - 1.0) / (b * b);

    LimitBounds bounds{scale * inv_log * (head - tail), scale * inv_log * head, scale * inv_log,
                       variant};
    return bounds;
}

TheoremCheck verify_consecutive_similarity(const PEVariant& variant, std::span<const double> x,
                                           long long n) {
    check_theorem_variant(variant);
    const auto cd = c_d(variant);
    const auto a = embed(variant, x, static_cast<double>(n + 1));
    const auto b = embed(variant, x, static_cast<double>(n));

    TheoremCheck check{variant, n};
    check.c_d = cd;
    double comp_min = x[0] * x[0];
    double comp_max = comp_min;
    check.pair_min = x[0] * x[0] + x[1] * x[1];
    check.pair_max = check.pair_min;
    for (std::size_t j = 0; j < variant.n_pairs(); ++j) {
        const double s = x[2 * j] * x[2 * j] + x[2 * j + 1] * x[2 * j + 1];
        check.pair_min = std::min(check.pair_min, s);
        check.pair_max = std::max(check.pair_max, s);
        check.x_norm_sq += s;
        for (std::size_t k = 2 * j; k < 2 * j + 2; ++k) {
            comp_min = std::min(comp_min, x[k] * x[k]);
            comp_max = std::max(comp_max, x[k] * x[k]);
        }
    }
    if (check.x_norm_sq == 0.0) {
        fail("consecutive similarity needs a nonzero vector");
    }
    check.observed_similarity = sine_similarity(a, b);
    check.lower_bound = check.pair_min / check.x_norm_sq * cd;
    check.upper_bound = check.pair_max / check.x_norm_sq * cd;
    check.component_lower_bound = 2.0 * comp_min / check.x_norm_sq * cd;
    check.component_upper_bound = 2.0 * comp_max / check.x_norm_sq * cd;
    return check;
}

GranularityComparison granularity_compare(const PEVariant& pi, const PEVariant& abf) {
    require(pi.kind() == PEKind::RoPE_PI, "granularity_compare: first variant must be RoPE-PI");
    require(abf.kind() == PEKind::RoPE_ABF, "granularity_compare: second variant must be RoPE-ABF");
    GranularityComparison cmp;
    cmp.pi_granularity = limit_bounds(pi).approximation;
    cmp.abf_granularity = limit_bounds(abf).approximation;
    cmp.ratio = cmp.abf_granularity / cmp.pi_granularity;
    return cmp;
}

double theta1_relative_difference(long long d, double b_old, double b_new) {
    require(d >= 4 && d % 2 == 0, "theta1: d must be even and >= 4");
    require(std::isfinite(b_old) && b_old > 1.0, "theta1: b_old must be > 1");
    require(std::isfinite(b_new) && b_new >= b_old, "theta1: b_new must be >= b_old");
    const double exponent = -2.0 / static_cast<double>(d);
    // b_new^e / b_old^e, formed in log space so it is exactly 1 for b_new == b_old.
    return -std::expm1(exponent * (std::log(b_new) - std::log(b_old)));
}

} // namespace ropelab
