#pragma once

#include <span>

#include "ropelab/pe_core.hpp"

namespace ropelab {

// Consecutive-image sine similarity against the C_d sandwich.
//
// The tight bounds use the block sums s_j = x_{2j}^2 + x_{2j+1}^2:
//   (min_j s_j / |x|^2) C_d <= sin angle(f(x, n+1), f(x, n)) <= (max_j s_j / |x|^2) C_d.
// The component-level form (2 min_k x_k^2, 2 max_k x_k^2 in place of the block
// extremes) is reported as a looser corollary.
struct TheoremCheck {
    PEVariant variant;
    long long n = 0;
    double observed_similarity = 0.0;
    double lower_bound = 0.0;
    double upper_bound = 0.0;
    double c_d = 0.0;
    double pair_min = 0.0;
    double pair_max = 0.0;
    double x_norm_sq = 0.0;
    double component_lower_bound = 0.0;
    double component_upper_bound = 0.0;
};

// Analytic bounds on the d -> infinity limit of the mean consecutive sine
// (2/d) C_d, from the geometric-sum estimate.
struct LimitBounds {
    double lower = 0.0;
    double upper = 0.0;
    double approximation = 0.0;
    PEVariant variant;
};

struct GranularityComparison {
    double pi_granularity = 0.0;
    double abf_granularity = 0.0;
    double ratio = 0.0;
};

// C_d = sum_{j < d/2} sin(theta_j). Plain RoPE is the ABF case with beta = 1.
// xPos-ABF is rejected.
double c_d(const PEVariant& variant);

// (2/d) C_d: the mean of the per-pair sines, the quantity whose d -> infinity
// limit is alpha / ln b (PI) or 1 / ln(b beta) (ABF).
double c_d_mean(const PEVariant& variant);

LimitBounds limit_bounds(const PEVariant& variant);

TheoremCheck verify_consecutive_similarity(const PEVariant& variant, std::span<const double> x,
                                           long long n);

GranularityComparison granularity_compare(const PEVariant& pi, const PEVariant& abf);

// 1 - theta_1(b_new) / theta_1(b_old) with theta_1 = b^{-2/d}.
double theta1_relative_difference(long long d, double b_old, double b_new);

} // namespace ropelab
