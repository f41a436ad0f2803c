#include "ropelab/scaling_law.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Dense>

#include "ropelab/error.hpp"

namespace ropelab {

namespace {

constexpr int kGridKnots = 200;
constexpr double kGridBetaMin = 0.05;
constexpr double kGridBetaMax = 4.0;
constexpr int kMaxIterations = 200;
constexpr double kStepTolerance = 1e-10;

struct Params {
    double log_alpha;
    double log_beta;
    double gamma;
};

double sse(std::span<const LossPoint> points, const Params& p) {
    const double beta = std::exp(p.log_beta);
    double total = 0.0;
    for (const auto& pt : points) {
        const double r = std::exp(beta * (p.log_alpha - std::log(pt.context_length))) + p.gamma - pt.loss;
        total += r * r;
    }
    return total;
}

struct GridCandidate {
    Params params;
    double sse = std::numeric_limits<double>::infinity();
};

// Closed-form least squares of L ~ A u + gamma at fixed beta, u = c^-beta.
// gamma < 0 falls back to gamma = 0.
std::optional<GridCandidate> solve_at_beta(std::span<const LossPoint> points, double beta) {
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::VectorXd u(n);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        u(i) = std::pow(points[static_cast<std::size_t>(i)].context_length, -beta);
        y(i) = points[static_cast<std::size_t>(i)].loss;
    }
    const double u_scale = u.cwiseAbs().maxCoeff();
    if (!(u_scale > 0.0) || !std::isfinite(u_scale)) {
        return std::nullopt;
    }
    Eigen::MatrixXd design(n, 2);
    design.col(0) = u / u_scale;
    design.col(1).setOnes();
    const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(y);
    double a = coef(0) / u_scale;
    double gamma = coef(1);
    if (gamma < 0.0) {
        gamma = 0.0;
        a = u.dot(y) / u.squaredNorm();
    }
    if (!(a > 0.0) || !std::isfinite(a)) {
        return std::nullopt;
    }
    GridCandidate c{{std::log(a) / beta, std::log(beta), gamma}, 0.0};
    c.sse = sse(points, c.params);
    return c;
}

void validate(std::span<const LossPoint> points) {
    for (const auto& p : points) {
        if (!std::isfinite(p.context_length) || p.context_length <= 0.0) {
            throw Error(ErrorKind::NonPositiveContext, "context lengths must be positive");
        }
        if (!std::isfinite(p.loss)) {
            fail("losses must be finite");
        }
    }
    if (points.size() < 3) {
        throw Error(ErrorKind::TooFewPoints, "power-law fit needs at least 3 points");
    }
    std::set<double> distinct;
    for (const auto& p : points) {
        distinct.insert(p.context_length);
    }
    if (distinct.size() < 3) {
        throw Error(ErrorKind::TooFewPoints, "power-law fit needs at least 3 distinct context lengths");
    }
    const auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                              [](const auto& a, const auto& b) { return a.loss < b.loss; });
    if (lo->loss == hi->loss) {
        throw Error(ErrorKind::DegenerateFit, "loss values have zero variance");
    }
}

} // namespace

PowerLawFit fit_power_law(std::span<const LossPoint> points) {
    validate(points);

    std::optional<GridCandidate> best;
    const double log_ratio = std::log(kGridBetaMax / kGridBetaMin);
    for (int k = 0; k < kGridKnots; ++k) {
        const double beta = kGridBetaMin * std::exp(log_ratio * k / (kGridKnots - 1));
        auto candidate = solve_at_beta(points, beta);
        // Ascending beta with strict < keeps the smallest beta on ties.
        if (candidate && (!best || candidate->sse < best->sse)) {
            best = candidate;
        }
    }
    if (!best) {
        throw Error(ErrorKind::DegenerateFit, "no beta grid knot gives a positive power-law amplitude");
    }

    Params p = best->params;
    double current = best->sse;
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd jac(n, 3);
    Eigen::VectorXd resid(n);

    PowerLawFit fit;
    for (fit.iterations = 0; fit.iterations < kMaxIterations;) {
        ++fit.iterations;
        const double beta = std::exp(p.log_beta);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& pt = points[static_cast<std::size_t>(i)];
            const double log_ratio_c = p.log_alpha - std::log(pt.context_length);
            const double power = std::exp(beta * log_ratio_c);
            resid(i) = power + p.gamma - pt.loss;
            jac(i, 0) = beta * power;
            jac(i, 1) = beta * log_ratio_c * power;
            jac(i, 2) = 1.0;
        }
        const Eigen::Vector3d step = jac.colPivHouseholderQr().solve(-resid);
        if (!step.allFinite()) {
            break;
        }

        // Step halving until the objective does not increase.
        double lambda = 1.0;
        Params trial = p;
        double trial_sse = current;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving, lambda *= 0.5) {
            trial = {p.log_alpha + lambda * step(0), p.log_beta + lambda * step(1),
                     std::max(0.0, p.gamma + lambda * step(2))};
            trial_sse = sse(points, trial);
            if (std::isfinite(trial_sse) && trial_sse <= current) {
                accepted = true;
                break;
            }
        }
        const double scale = std::max({1.0, std::abs(p.log_alpha), std::abs(p.log_beta), std::abs(p.gamma)});
        const double taken = lambda * step.cwiseAbs().maxCoeff();
        if (!accepted) {
            // No descent along the Gauss-Newton direction: at the numerical minimum.
            fit.converged = true;
            break;
        }
        p = trial;
        current = trial_sse;
        if (taken < kStepTolerance * scale) {
            fit.converged = true;
            break;
        }
    }

    fit.alpha = std::exp(p.log_alpha);
    fit.beta = std::exp(p.log_beta);
    fit.gamma = p.gamma;
    fit.rmse = std::sqrt(current / static_cast<double>(points.size()));
    return fit;
}

double predict_loss(const PowerLawFit& fit, double context_length) {
    if (!(context_length > 0.0)) {
        throw Error(ErrorKind::NonPositiveContext, "context length must be positive");
    }
    return std::pow(fit.alpha / context_length, fit.beta) + fit.gamma;
}

DoublingFactor doubling_loss_factor(const PowerLawFit& fit) {
    const double factor = std::exp2(-fit.beta);
    return {factor, (1.0 - factor) * fit.gamma};
}

FlopsEstimate curriculum_flops(const CurriculumSchedule& schedule, std::optional<double> long_token_cost) {
    const double p = schedule.switch_fraction;
    const double r = schedule.cost_ratio;
    require(p >= 0.0 && p <= 1.0, "switch fraction must lie in [0, 1]");
    require(r > 0.0 && r <= 1.0, "cost ratio must lie in (0, 1]");
    require(schedule.short_len > 0.0 && schedule.short_len < schedule.long_len,
            "curriculum needs 0 < short_len < long_len");

    FlopsEstimate estimate;
    estimate.total_flops_relative = p * r + (1.0 - p);
    if (long_token_cost) {
        require(*long_token_cost > 0.0 && schedule.total_tokens > 0.0,
                "absolute FLOPs need positive per-token cost and token count");
        estimate.absolute_flops = estimate.total_flops_relative * schedule.total_tokens * *long_token_cost;
    }
    return estimate;
}

double affine_cost_ratio(double short_len, double long_len, double fixed, double per_token_len) {
    require(short_len > 0.0 && short_len < long_len, "cost ratio needs 0 < short_len < long_len");
    require(fixed >= 0.0 && per_token_len >= 0.0 && fixed + per_token_len > 0.0,
            "per-token cost coefficients must be nonnegative and not both zero");
    return (fixed + per_token_len * short_len) / (fixed + per_token_len * long_len);
}

double calibrate_cost_ratio(std::span<const FlopsRow> table) {
    const auto baseline = std::find_if(table.begin(), table.end(),
                                       [](const FlopsRow& row) { return row.switch_fraction == 0.0; });
    if (baseline == table.end()) {
        fail("cost-ratio calibration needs a from-scratch (p = 0) baseline row");
    }
    require(baseline->total_flops > 0.0, "baseline FLOPs must be positive");

    double num = 0.0;
    double den = 0.0;
    for (const auto& row : table) {
        require(row.switch_fraction >= 0.0 && row.switch_fraction <= 1.0,
                "switch fraction must lie in [0, 1]");
        if (row.switch_fraction == 0.0) {
            continue;
        }
        const double ratio = row.total_flops / baseline->total_flops;
        num += row.switch_fraction * (1.0 - ratio);
        den += row.switch_fraction * row.switch_fraction;
    }
    require(den > 0.0, "cost-ratio calibration needs at least one curriculum row");
    return 1.0 - num / den;
}

} // namespace ropelab
