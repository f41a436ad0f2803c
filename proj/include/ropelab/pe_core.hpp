#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ropelab {

enum class PEKind { RoPE, RoPE_PI, RoPE_ABF, XPos_ABF };
enum class Role { Query, Key };

const char* pe_kind_name(PEKind kind);

// A rotary positional-encoding configuration. Parameters that do not belong
// to the kind are absent; construction goes through the named factories (or
// `make`, which rejects mismatched parameters) so an instance is always valid.
class PEVariant {
public:
    static constexpr double kDefaultBase = 10000.0;
    static constexpr double kDefaultXPosSmoothing = 0.4;
    static constexpr double kDefaultXPosScaleBase = 512.0;

    static PEVariant rope(double base, int head_dim);
    static PEVariant pi(double base, int head_dim, double alpha);
    static PEVariant abf(double base, int head_dim, double beta);
    static PEVariant xpos_abf(double base, int head_dim, double beta,
                              double smoothing = kDefaultXPosSmoothing,
                              double scale_base = kDefaultXPosScaleBase);

    static PEVariant make(PEKind kind, double base, int head_dim,
                          std::optional<double> alpha = {},
                          std::optional<double> beta = {},
                          std::optional<double> smoothing = {},
                          std::optional<double> scale_base = {});

    PEKind kind() const noexcept { return kind_; }
    double base_frequency() const noexcept { return base_; }
    int head_dim() const noexcept { return head_dim_; }
    std::size_t n_pairs() const noexcept { return static_cast<std::size_t>(head_dim_ / 2); }

    const std::optional<double>& pi_alpha() const noexcept { return alpha_; }
    const std::optional<double>& abf_beta() const noexcept { return beta_; }
    const std::optional<double>& xpos_smoothing() const noexcept { return smoothing_; }
    const std::optional<double>& xpos_scale_base() const noexcept { return scale_base_; }

    bool is_norm_preserving() const noexcept { return kind_ != PEKind::XPos_ABF; }

    // Short label such as "rope", "pi(alpha=0.25)", "abf(beta=50)".
    std::string label() const;

    friend bool operator==(const PEVariant&, const PEVariant&) = default;

private:
    PEVariant() = default;

    PEKind kind_ = PEKind::RoPE;
    double base_ = kDefaultBase;
    int head_dim_ = 2;
    std::optional<double> alpha_;
    std::optional<double> beta_;
    std::optional<double> smoothing_;
    std::optional<double> scale_base_;
};

// Image of a real vector under a rotary map: d/2 complex pairs.
struct EmbeddingImage {
    std::vector<std::complex<double>> pairs;
    double source_norm = 0.0;

    double norm() const;
};

struct DecayCurve {
    std::vector<long long> distances;
    std::vector<double> scores;
    bool normalized = true;
    PEVariant variant;
};

struct HelixSample {
    double t, x, y, z;
};

struct HelixTrace {
    double frequency_coefficient = 0.0;
    std::vector<HelixSample> samples;
};

struct ClosestPair {
    double distance = 0.0;
    long long first = 0;
    long long second = 0;
};

// Number of worker threads for the brute-force scans. 1 runs inline; the
// result is identical for every value.
struct Parallelism {
    unsigned threads = 1;
};

double rotation_angle(const PEVariant& variant, std::size_t j);
std::vector<double> rotation_angles(const PEVariant& variant);

// xPos per-pair decay base zeta_j = (2j/d + smoothing) / (1 + smoothing);
// 1 for kinds without the xPos scale.
double xpos_zeta(const PEVariant& variant, std::size_t j);

// Multiplier applied to pair j at position t for the given role
// (zeta_j^{t/s} for queries, zeta_j^{-t/s} for keys, 1 for non-xPos kinds).
double pair_scale(const PEVariant& variant, std::size_t j, double t, Role role);

EmbeddingImage embed(const PEVariant& variant, std::span<const double> x, double t,
                     Role role = Role::Query);

std::vector<double> rotate_real(const PEVariant& variant, std::span<const double> x, double t,
                                Role role);

// Transpose of the linear map x -> rotate_real(x, t, role). Used for
// back-propagating through the rotation.
std::vector<double> rotate_real_adjoint(const PEVariant& variant, std::span<const double> y,
                                        double t, Role role);

std::complex<double> inner_product(const EmbeddingImage& a, const EmbeddingImage& b);

double sine_similarity(const EmbeddingImage& a, const EmbeddingImage& b);

// Closed-form all-ones score g(delta) = sum_j 2 * scale_j(delta) * cos(theta_j * delta),
// divided by d when normalized.
double decay_score(const PEVariant& variant, long long delta, bool normalized);

DecayCurve decay_curve(const PEVariant& variant, std::span<const long long> distances,
                       bool normalized = true, Parallelism par = {});

HelixTrace helix_trace(double a, double t_start, double t_end, int n_samples);

ClosestPair min_pairwise_distance(const PEVariant& variant, std::span<const double> x,
                                  long long n_positions, Parallelism par = {});

double embedding_drift(const PEVariant& old_variant, const PEVariant& new_variant,
                       std::span<const std::vector<double>> x_set, long long n_old,
                       long long n_new, Parallelism par = {});

} // namespace ropelab
