#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ropelab/pe_core.hpp"

namespace ropelab {

// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

struct AttentionConfig {
    PEVariant variant;
    std::size_t seq_len = 1;
    bool causal = true;
    // Defaults to 1/sqrt(d) when unset.
    std::optional<double> score_scale;
    // Position of row 0. Shifting it leaves scores unchanged for non-xPos kinds.
    long long position_offset = 0;

    double scale() const;
};

struct AttentionOutput {
    Matrix output;
    Matrix weights;
};

struct AttentionGradients {
    Matrix dq;
    Matrix dk;
    Matrix dv;
};

// Single-head scaled dot-product attention with the rotary map applied to
// queries (Role::Query) and keys (Role::Key).
AttentionOutput attention_forward(const AttentionConfig& config, const Matrix& q, const Matrix& k,
                                  const Matrix& v);

// Pre-softmax score matrix; masked entries are -inf.
Matrix attention_scores(const AttentionConfig& config, const Matrix& q, const Matrix& k);

// Gradients of sum(output^2) with respect to Q, K and V.
AttentionGradients attention_backward(const AttentionConfig& config, const Matrix& q,
                                      const Matrix& k, const Matrix& v);

// Max relative error of the analytic gradients against central differences
// (step 1e-5) on seeded standard-normal Q, K, V. The relative error of an
// entry is |analytic - numeric| / max(|analytic|, |numeric|, 1e-3).
double gradient_check(const AttentionConfig& config, std::uint64_t seed);

// Softmax mass on key position `target` in the last causal row of an all-ones
// query/key attention of length seq_len. Logits are raw decay scores times
// the score scale (1/sqrt(d) by default).
double allones_attention_mass(const PEVariant& variant, std::size_t seq_len, std::size_t target = 0,
                              std::optional<double> score_scale = {});

// Entire last row of the probe above.
std::vector<double> allones_attention_row(const PEVariant& variant, std::size_t seq_len,
                                          std::optional<double> score_scale = {});

using Token = std::int64_t;

struct ProbeTask {
    std::vector<std::vector<Token>> sentences;
    std::vector<Token> full_sequence;
    std::pair<std::size_t, std::size_t> first_sentence_span;
    std::size_t context_length = 0;
};

struct ProbeScore {
    bool exact_match = false;
    double token_overlap = 0.0;
};

ProbeTask make_first_sentence_task(std::size_t n_sentences, std::size_t tokens_per_sentence,
                                   std::uint64_t seed);

ProbeScore score_first_sentence(const ProbeTask& task, std::span<const Token> response);

struct BucketedLoss {
    std::size_t bucket_width = 500;
    std::vector<double> bucket_means;
    std::size_t n_positions = 0;
};

BucketedLoss bucket_positional_loss(std::span<const double> losses, std::size_t bucket_width = 500);

} // namespace ropelab
