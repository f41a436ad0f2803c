#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace ropelab {

struct LossPoint {
    double context_length = 0.0;
    double loss = 0.0;
};

// L(c) = (alpha / c)^beta + gamma
struct PowerLawFit {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double rmse = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct DoublingFactor {
    double factor = 0.0;
    double constant_offset = 0.0;
};

struct CurriculumSchedule {
    double short_len = 4096;
    double long_len = 32768;
    double switch_fraction = 0.0;
    double total_tokens = 0.0;
    double cost_ratio = 0.5;
};

struct FlopsEstimate {
    double total_flops_relative = 1.0;
    std::optional<double> absolute_flops;
};

// One row of a curriculum FLOPs table: switch fraction and total FLOPs.
// p = 0 is the from-scratch long-sequence baseline.
struct FlopsRow {
    double switch_fraction = 0.0;
    double total_flops = 0.0;
};

// Fits by a log-spaced beta grid with closed-form (A, gamma) per knot,
// followed by damped Gauss-Newton on (ln alpha, ln beta, gamma).
// Throws Error{TooFewPoints | DegenerateFit | NonPositiveContext}.
PowerLawFit fit_power_law(std::span<const LossPoint> points);

double predict_loss(const PowerLawFit& fit, double context_length);

DoublingFactor doubling_loss_factor(const PowerLawFit& fit);

// Relative cost p * r + (1 - p); absolute = relative * T * f(long) when
// `long_token_cost` is given.
FlopsEstimate curriculum_flops(const CurriculumSchedule& schedule,
                               std::optional<double> long_token_cost = {});

// Per-token cost model f(L) = fixed + per_token_len * L. Returns f(short) / f(long).
double affine_cost_ratio(double short_len, double long_len, double fixed, double per_token_len);

// Least-squares r in ratio(p) = 1 - p (1 - r) over the curriculum rows.
double calibrate_cost_ratio(std::span<const FlopsRow> table);

} // namespace ropelab
