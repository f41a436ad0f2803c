#include "ropelab/pe_core.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ropelab/error.hpp"
#include "ropelab/parallel.hpp"

namespace ropelab {

const char* pe_kind_name(PEKind kind) {
    switch (kind) {
    case PEKind::RoPE: return "RoPE";
    case PEKind::RoPE_PI: return "RoPE-PI";
    case PEKind::RoPE_ABF: return "RoPE-ABF";
    case PEKind::XPos_ABF: return "xPos-ABF";
    }
    return "?";
}

namespace {

void check_common(double base, int head_dim) {
    require(std::isfinite(base) && base > 1.0, "base frequency must be > 1");
    require(head_dim >= 2 && head_dim % 2 == 0, "head_dim must be an even integer >= 2");
}

void check_dim(const PEVariant& variant, std::size_t size) {
    if (size != static_cast<std::size_t>(variant.head_dim())) {
        fail("dimension mismatch: vector has " + std::to_string(size) + " components, variant expects " +
             std::to_string(variant.head_dim()));
    }
}

} // namespace

PEVariant PEVariant::rope(double base, int head_dim) {
    check_common(base, head_dim);
    PEVariant v;
    v.kind_ = PEKind::RoPE;
    v.base_ = base;
    v.head_dim_ = head_dim;
    return v;
}

PEVariant PEVariant::pi(double base, int head_dim, double alpha) {
    check_common(base, head_dim);
    require(std::isfinite(alpha) && alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
    PEVariant v;
    v.kind_ = PEKind::RoPE_PI;
    v.base_ = base;
    v.head_dim_ = head_dim;
    v.alpha_ = alpha;
    return v;
}

PEVariant PEVariant::abf(double base, int head_dim, double beta) {
    check_common(base, head_dim);
    require(std::isfinite(beta) && beta >= 1.0, "beta must be >= 1");
    PEVariant v;
    v.kind_ = PEKind::RoPE_ABF;
    v.base_ = base;
    v.head_dim_ = head_dim;
    v.beta_ = beta;
    return v;
}

PEVariant PEVariant::xpos_abf(double base, int head_dim, double beta, double smoothing,
                              double scale_base) {
    check_common(base, head_dim);
    require(std::isfinite(beta) && beta >= 1.0, "beta must be >= 1");
    require(std::isfinite(smoothing) && smoothing > 0.0, "xPos smoothing must be > 0");
    require(std::isfinite(scale_base) && scale_base > 0.0, "xPos scale base must be > 0");
    PEVariant v;
    v.kind_ = PEKind::XPos_ABF;
    v.base_ = base;
    v.head_dim_ = head_dim;
    v.beta_ = beta;
    v.smoothing_ = smoothing;
    v.scale_base_ = scale_base;
    return v;
}

PEVariant PEVariant::make(PEKind kind, double base, int head_dim, std::optional<double> alpha,
                          std::optional<double> beta, std::optional<double> smoothing,
                          std::optional<double> scale_base) {
    const bool wants_alpha = kind == PEKind::RoPE_PI;
    const bool wants_beta = kind == PEKind::RoPE_ABF || kind == PEKind::XPos_ABF;
    const bool wants_xpos = kind == PEKind::XPos_ABF;
    const std::string name = pe_kind_name(kind);

    if (alpha.has_value() != wants_alpha) {
        fail(wants_alpha ? "alpha is required for " + name : "alpha is not a parameter of " + name);
    }
    if (beta.has_value() != wants_beta) {
        fail(wants_beta ? "beta is required for " + name : "beta is not a parameter of " + name);
    }
    if (!wants_xpos && (smoothing || scale_base)) {
        fail("xPos scale parameters are not parameters of " + name);
    }

    switch (kind) {
    case PEKind::RoPE: return rope(base, head_dim);
    case PEKind::RoPE_PI: return pi(base, head_dim, *alpha);
    case PEKind::RoPE_ABF: return abf(base, head_dim, *beta);
    case PEKind::XPos_ABF:
        return xpos_abf(base, head_dim, *beta, smoothing.value_or(kDefaultXPosSmoothing),
                        scale_base.value_or(kDefaultXPosScaleBase));
    }
    fail("unknown PE kind");
}

std::string PEVariant::label() const {
    std::ostringstream out;
    switch (kind_) {
    case PEKind::RoPE: out << "rope"; break;
    case PEKind::RoPE_PI: out << "pi(alpha=" << *alpha_ << ")"; break;
    case PEKind::RoPE_ABF: out << "abf(beta=" << *beta_ << ")"; break;
    case PEKind::XPos_ABF: out << "xpos-abf(beta=" << *beta_ << ")"; break;
    }
    return out.str();
}

double EmbeddingImage::norm() const {
    double sum = 0.0;
    for (const auto& p : pairs) {
        sum += std::norm(p);
    }
    return std::sqrt(sum);
}

double rotation_angle(const PEVariant& variant, std::size_t j) {
    if (j >= variant.n_pairs()) {
        fail("pair index " + std::to_string(j) + " out of range [0, " +
             std::to_string(variant.n_pairs()) + ")");
    }
    const double exponent = -2.0 * static_cast<double>(j) / variant.head_dim();
    switch (variant.kind()) {
    case PEKind::RoPE:
        return std::exp(exponent * std::log(variant.base_frequency()));
    case PEKind::RoPE_PI:
        return *variant.pi_alpha() * std::exp(exponent * std::log(variant.base_frequency()));
    case PEKind::RoPE_ABF:
    case PEKind::XPos_ABF:
        return std::exp(exponent * std::log(*variant.abf_beta() * variant.base_frequency()));
    }
    return 0.0;
}

std::vector<double> rotation_angles(const PEVariant& variant) {
    std::vector<double> theta(variant.n_pairs());
    for (std::size_t j = 0; j < theta.size(); ++j) {
        theta[j] = rotation_angle(variant, j);
    }
    return theta;
}

double xpos_zeta(const PEVariant& variant, std::size_t j) {
    if (variant.kind() != PEKind::XPos_ABF) {
        return 1.0;
    }
    const double g = *variant.xpos_smoothing();
    return (2.0 * static_cast<double>(j) / variant.head_dim() + g) / (1.0 + g);
}

double pair_scale(const PEVariant& variant, std::size_t j, double t, Role role) {
    if (variant.kind() != PEKind::XPos_ABF) {
        return 1.0;
    }
    const double power = t / *variant.xpos_scale_base();
    return std::pow(xpos_zeta(variant, j), role == Role::Query ? power : -power);
}

EmbeddingImage embed(const PEVariant& variant, std::span<const double> x, double t, Role role) {
    check_dim(variant, x.size());
    EmbeddingImage image;
    image.pairs.resize(variant.n_pairs());
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < image.pairs.size(); ++j) {
        const double angle = rotation_angle(variant, j) * t;
        const std::complex<double> z{x[2 * j], x[2 * j + 1]};
        image.pairs[j] = z * std::polar(pair_scale(variant, j, t, role), angle);
        norm_sq += x[2 * j] * x[2 * j] + x[2 * j + 1] * x[2 * j + 1];
    }
    image.source_norm = std::sqrt(norm_sq);
    return image;
}

std::vector<double> rotate_real(const PEVariant& variant, std::span<const double> x, double t,
                                Role role) {
    check_dim(variant, x.size());
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < variant.n_pairs(); ++j) {
        const double angle = rotation_angle(variant, j) * t;
        const double scale = pair_scale(variant, j, t, role);
        const double c = std::cos(angle) * scale;
        const double s = std::sin(angle) * scale;
        const double a = x[2 * j];
        const double b = x[2 * j + 1];
        out[2 * j] = a * c - b * s;
        out[2 * j + 1] = a * s + b * c;
    }
    return out;
}

std::vector<double> rotate_real_adjoint(const PEVariant& variant, std::span<const double> y,
                                        double t, Role role) {
    check_dim(variant, y.size());
    std::vector<double> out(y.size());
    for (std::size_t j = 0; j < variant.n_pairs(); ++j) {
        const double angle = rotation_angle(variant, j) * t;
        const double scale = pair_scale(variant, j, t, role);
        const double c = std::cos(angle) * scale;
        const double s = std::sin(angle) * scale;
        const double a = y[2 * j];
        const double b = y[2 * j + 1];
        out[2 * j] = a * c + b * s;
        out[2 * j + 1] = -a * s + b * c;
    }
    return out;
}

std::complex<double> inner_product(const EmbeddingImage& a, const EmbeddingImage& b) {
    if (a.pairs.size() != b.pairs.size()) {
        fail("inner product of images with different lengths");
    }
    std::complex<double> sum{0.0, 0.0};
    for (std::size_t j = 0; j < a.pairs.size(); ++j) {
        sum += a.pairs[j] * std::conj(b.pairs[j]);
    }
    return sum;
}

double sine_similarity(const EmbeddingImage& a, const EmbeddingImage& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        fail("sine similarity of a zero-norm image");
    }
    return inner_product(a, b).imag() / (na * nb);
}

double decay_score(const PEVariant& variant, long long delta, bool normalized) {
    if (delta < 0) {
        fail("decay distance must be nonnegative");
    }
    const double t = static_cast<double>(delta);
    double sum = 0.0;
    for (std::size_t j = 0; j < variant.n_pairs(); ++j) {
        sum += 2.0 * pair_scale(variant, j, t, Role::Query) * std::cos(rotation_angle(variant, j) * t);
    }
    return normalized ? sum / variant.head_dim() : sum;
}

DecayCurve decay_curve(const PEVariant& variant, std::span<const long long> distances,
                       bool normalized, Parallelism par) {
    for (std::size_t i = 0; i < distances.size(); ++i) {
        if (distances[i] < 0) {
            fail("decay distance must be nonnegative");
        }
        if (i > 0 && distances[i] <= distances[i - 1]) {
            fail("decay distances must be strictly increasing");
        }
    }
    DecayCurve curve{std::vector<long long>(distances.begin(), distances.end()),
                     std::vector<double>(distances.size()), normalized, variant};
    detail::parallel_blocks(distances.size(), par.threads,
                            [&](std::size_t begin, std::size_t end, std::size_t) {
                                for (std::size_t i = begin; i < end; ++i) {
                                    curve.scores[i] = decay_score(variant, distances[i], normalized);
                                }
                            });
    return curve;
}

HelixTrace helix_trace(double a, double t_start, double t_end, int n_samples) {
    require(n_samples >= 2, "helix trace needs at least 2 samples");
    require(std::isfinite(t_start) && std::isfinite(t_end) && t_end > t_start,
            "helix trace needs t_end > t_start");
    HelixTrace trace{a, {}};
    trace.samples.reserve(static_cast<std::size_t>(n_samples));
    const double step = (t_end - t_start) / (n_samples - 1);
    for (int i = 0; i < n_samples; ++i) {
        const double t = i + 1 == n_samples ? t_end : t_start + step * i;
        trace.samples.push_back({t, std::cos(t), std::sin(t), std::sin(a * t)});
    }
    return trace;
}

namespace {

std::vector<EmbeddingImage> images_at_positions(const PEVariant& variant, std::span<const double> x,
                                                long long n_positions) {
    std::vector<EmbeddingImage> images;
    images.reserve(static_cast<std::size_t>(n_positions));
    for (long long t = 0; t < n_positions; ++t) {
        images.push_back(embed(variant, x, static_cast<double>(t)));
    }
    return images;
}

double image_distance(const EmbeddingImage& a, const EmbeddingImage& b) {
    double sum = 0.0;
    for (std::size_t j = 0; j < a.pairs.size(); ++j) {
        sum += std::norm(a.pairs[j] - b.pairs[j]);
    }
    return std::sqrt(sum);
}

} // namespace

ClosestPair min_pairwise_distance(const PEVariant& variant, std::span<const double> x,
                                  long long n_positions, Parallelism par) {
    require(n_positions >= 2, "min_pairwise_distance needs at least 2 positions");
    check_dim(variant, x.size());
    const auto images = images_at_positions(variant, x, n_positions);
    const auto n = static_cast<std::size_t>(n_positions);

    std::vector<ClosestPair> best(detail::worker_count(n, par.threads),
                                  {std::numeric_limits<double>::infinity(), -1, -1});
    detail::parallel_blocks(n, par.threads, [&](std::size_t begin, std::size_t end, std::size_t w) {
        ClosestPair local = best[w];
        for (std::size_t k = begin; k < end; ++k) {
            for (std::size_t j = k + 1; j < n; ++j) {
                const double dist = image_distance(images[k], images[j]);
                if (dist < local.distance) {
                    local = {dist, static_cast<long long>(k), static_cast<long long>(j)};
                }
            }
        }
        best[w] = local;
    });

    ClosestPair result = best.front();
    for (const auto& candidate : best) {
        // Blocks are ordered by k, so strict < keeps the lexicographically smallest pair.
        if (candidate.distance < result.distance) {
            result = candidate;
        }
    }
    return result;
}

double embedding_drift(const PEVariant& old_variant, const PEVariant& new_variant,
                       std::span<const std::vector<double>> x_set, long long n_old, long long n_new,
                       Parallelism par) {
    require(!x_set.empty(), "embedding_drift needs a nonempty vector set");
    require(n_old >= 1 && n_new >= 1, "embedding_drift needs n_old, n_new >= 1");
    for (const auto& x : x_set) {
        check_dim(old_variant, x.size());
        check_dim(new_variant, x.size());
    }

    std::vector<double> per_vector(x_set.size());
    detail::parallel_blocks(x_set.size(), par.threads,
                            [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto old_images = images_at_positions(old_variant, x_set[i], n_old);
            const auto new_images = images_at_positions(new_variant, x_set[i], n_new);
            double closest = std::numeric_limits<double>::infinity();
            for (const auto& a : old_images) {
                for (const auto& b : new_images) {
                    closest = std::min(closest, image_distance(a, b));
                }
            }
            per_vector[i] = closest;
        }
    });

    double drift = 0.0;
    for (double v : per_vector) {
        drift = std::max(drift, v);
    }
    return drift;
}

} // namespace ropelab
