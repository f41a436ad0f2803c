#include "ropelab/attention_probe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <unordered_set>

#include "ropelab/error.hpp"

namespace ropelab {

double AttentionConfig::scale() const {
    return score_scale.value_or(1.0 / std::sqrt(static_cast<double>(variant.head_dim())));
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_inputs(const AttentionConfig& config, const Matrix& q, const Matrix& k, const Matrix& v) {
    require(config.seq_len >= 1, "attention: seq_len must be >= 1");
    const auto d = static_cast<std::size_t>(config.variant.head_dim());
    for (const Matrix* m : {&q, &k, &v}) {
        if (m->rows != config.seq_len || m->cols != d) {
            fail("attention: expected " + std::to_string(config.seq_len) + "x" + std::to_string(d) +
                 " input, got " + std::to_string(m->rows) + "x" + std::to_string(m->cols));
        }
        if (std::any_of(m->data.begin(), m->data.end(), [](double x) { return std::isnan(x); })) {
            fail("attention: NaN in input");
        }
    }
}

double position(const AttentionConfig& config, std::size_t i) {
    return static_cast<double>(config.position_offset + static_cast<long long>(i));
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

Matrix rotate_rows(const AttentionConfig& config, const Matrix& x, Role role) {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto r = rotate_real(config.variant, x.row(i), position(config, i), role);
        std::copy(r.begin(), r.end(), out.row(i).begin());
    }
    return out;
}

Matrix scores_from_rotated(const AttentionConfig& config, const Matrix& rq, const Matrix& rk) {
    const double scale = config.scale();
    Matrix scores(config.seq_len, config.seq_len);
    for (std::size_t m = 0; m < config.seq_len; ++m) {
        for (std::size_t n = 0; n < config.seq_len; ++n) {
            scores(m, n) = config.causal && n > m ? kNegInf : scale * dot(rq.row(m), rk.row(n));
        }
    }
    return scores;
}

void softmax_in_place(std::span<double> row) {
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double& x : row) {
        x = x == kNegInf ? 0.0 : std::exp(x - peak);
        total += x;
    }
    for (double& x : row) {
        x /= total;
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t p = 0; p < a.cols; ++p) {
            const double aip = a(i, p);
            for (std::size_t j = 0; j < b.cols; ++j) {
                out(i, j) += aip * b(p, j);
            }
        }
    }
    return out;
}

double sum_of_squares(const Matrix& m) {
    double s = 0.0;
    for (double x : m.data) {
        s += x * x;
    }
    return s;
}

} // namespace

Matrix attention_scores(const AttentionConfig& config, const Matrix& q, const Matrix& k) {
    check_inputs(config, q, k, k);
    return scores_from_rotated(config, rotate_rows(config, q, Role::Query),
                               rotate_rows(config, k, Role::Key));
}

AttentionOutput attention_forward(const AttentionConfig& config, const Matrix& q, const Matrix& k,
                                  const Matrix& v) {
    check_inputs(config, q, k, v);
    Matrix weights = attention_scores(config, q, k);
    for (std::size_t m = 0; m < weights.rows; ++m) {
        softmax_in_place(weights.row(m));
    }
    Matrix output = matmul(weights, v);
    return {std::move(output), std::move(weights)};
}

AttentionGradients attention_backward(const AttentionConfig& config, const Matrix& q,
                                      const Matrix& k, const Matrix& v) {
    check_inputs(config, q, k, v);
    const std::size_t n = config.seq_len;
    const std::size_t d = q.cols;
    const double scale = config.scale();

    const Matrix rq = rotate_rows(config, q, Role::Query);
    const Matrix rk = rotate_rows(config, k, Role::Key);
    Matrix w = scores_from_rotated(config, rq, rk);
    for (std::size_t m = 0; m < n; ++m) {
        softmax_in_place(w.row(m));
    }
    const Matrix out = matmul(w, v);

    Matrix d_out(n, d);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        d_out.data[i] = 2.0 * out.data[i];
    }

    AttentionGradients grads{Matrix(n, d), Matrix(n, d), Matrix(n, d)};
    // dV = W^T dO
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t j = 0; j < n; ++j) {
            const double wmj = w(m, j);
            if (wmj == 0.0) {
                continue;
            }
            for (std::size_t c = 0; c < d; ++c) {
                grads.dv(j, c) += wmj * d_out(m, c);
            }
        }
    }

    // Softmax backward: dS = W * (dW - rowsum(W * dW)).
    Matrix d_scores(n, n);
    for (std::size_t m = 0; m < n; ++m) {
        double row_dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double dw = dot(d_out.row(m), v.row(j));
            d_scores(m, j) = dw;
            row_dot += w(m, j) * dw;
        }
        for (std::size_t j = 0; j < n; ++j) {
            d_scores(m, j) = w(m, j) * (d_scores(m, j) - row_dot);
        }
    }

    Matrix d_rq(n, d);
    Matrix d_rk(n, d);
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t j = 0; j < n; ++j) {
            const double g = scale * d_scores(m, j);
            if (g == 0.0) {
                continue;
            }
            for (std::size_t c = 0; c < d; ++c) {
                d_rq(m, c) += g * rk(j, c);
                d_rk(j, c) += g * rq(m, c);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto gq = rotate_real_adjoint(config.variant, d_rq.row(i), position(config, i), Role::Query);
        const auto gk = rotate_real_adjoint(config.variant, d_rk.row(i), position(config, i), Role::Key);
        std::copy(gq.begin(), gq.end(), grads.dq.row(i).begin());
        std::copy(gk.begin(), gk.end(), grads.dk.row(i).begin());
    }
    return grads;
}

double gradient_check(const AttentionConfig& config, std::uint64_t seed) {
    const auto d = static_cast<std::size_t>(config.variant.head_dim());
    require(config.seq_len * d <= 64, "gradient_check: seq_len * d must be <= 64");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<Matrix, 3> inputs{Matrix(config.seq_len, d), Matrix(config.seq_len, d),
                                 Matrix(config.seq_len, d)};
    for (auto& m : inputs) {
        for (double& x : m.data) {
            x = normal(rng);
        }
    }

    const auto grads = attention_backward(config, inputs[0], inputs[1], inputs[2]);
    const std::array<const Matrix*, 3> analytic{&grads.dq, &grads.dk, &grads.dv};
    const auto loss = [&] {
        return sum_of_squares(attention_forward(config, inputs[0], inputs[1], inputs[2]).output);
    };

    constexpr double h = 1e-5;
    double worst = 0.0;
    for (std::size_t which = 0; which < inputs.size(); ++which) {
        auto& param = inputs[which].data;
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double saved = param[i];
            param[i] = saved + h;
            const double up = loss();
            param[i] = saved - h;
            const double down = loss();
            param[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double exact = analytic[which]->data[i];
            const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-3});
            worst = std::max(worst, std::abs(exact - numeric) / denom);
        }
    }
    return worst;
}

std::vector<double> allones_attention_row(const PEVariant& variant, std::size_t seq_len,
                                          std::optional<double> score_scale) {
    require(seq_len >= 1, "allones_attention_mass: seq_len must be >= 1");
    const double scale =
        score_scale.value_or(1.0 / std::sqrt(static_cast<double>(variant.head_dim())));
    std::vector<double> row(seq_len);
    const std::size_t last = seq_len - 1;
    for (std::size_t n = 0; n < seq_len; ++n) {
        row[n] = scale * decay_score(variant, static_cast<long long>(last - n), false);
    }
    softmax_in_place(row);
    return row;
}

double allones_attention_mass(const PEVariant& variant, std::size_t seq_len, std::size_t target,
                              std::optional<double> score_scale) {
    require(seq_len >= 1, "allones_attention_mass: seq_len must be >= 1");
    require(target < seq_len, "allones_attention_mass: target out of range");
    return allones_attention_row(variant, seq_len, score_scale)[target];
}

ProbeTask make_first_sentence_task(std::size_t n_sentences, std::size_t tokens_per_sentence,
                                   std::uint64_t seed) {
    require(n_sentences >= 1, "first-sentence task needs at least one sentence");
    require(tokens_per_sentence >= 1, "first-sentence task needs at least one token per sentence");

    // Content ids come from a 32k vocabulary; markers live above it and are
    // unique per sentence.
    constexpr Token kVocab = 32000;
    constexpr Token kMarkerBase = Token{1} << 32;
    std::mt19937_64 rng(seed);

    ProbeTask task;
    std::unordered_set<Token> markers;
    for (std::size_t s = 0; s < n_sentences; ++s) {
        std::vector<Token> sentence;
        sentence.reserve(tokens_per_sentence);
        Token marker = 0;
        do {
            marker = kMarkerBase + static_cast<Token>(rng() >> 34);
        } while (!markers.insert(marker).second);
        sentence.push_back(marker);
        while (sentence.size() < tokens_per_sentence) {
            sentence.push_back(1 + static_cast<Token>(rng() % static_cast<std::uint64_t>(kVocab - 1)));
        }
        task.full_sequence.insert(task.full_sequence.end(), sentence.begin(), sentence.end());
        task.sentences.push_back(std::move(sentence));
    }
    task.first_sentence_span = {0, tokens_per_sentence};
    task.context_length = task.full_sequence.size();
    return task;
}

ProbeScore score_first_sentence(const ProbeTask& task, std::span<const Token> response) {
    const auto [start, end] = task.first_sentence_span;
    const std::span<const Token> gold(task.full_sequence.data() + start, end - start);

    ProbeScore score;
    score.exact_match = std::equal(gold.begin(), gold.end(), response.begin(), response.end());

    std::map<Token, long long> remaining;
    for (Token t : gold) {
        ++remaining[t];
    }
    std::size_t shared = 0;
    for (Token t : response) {
        auto it = remaining.find(t);
        if (it != remaining.end() && it->second > 0) {
            --it->second;
            ++shared;
        }
    }
    score.token_overlap = gold.empty() ? 0.0 : static_cast<double>(shared) / gold.size();
    return score;
}

BucketedLoss bucket_positional_loss(std::span<const double> losses, std::size_t bucket_width) {
    require(!losses.empty(), "bucket_positional_loss: empty input");
    require(bucket_width >= 1, "bucket_positional_loss: bucket width must be >= 1");
    BucketedLoss result{bucket_width, {}, losses.size()};
    for (std::size_t begin = 0; begin < losses.size(); begin += bucket_width) {
        const std::size_t end = std::min(losses.size(), begin + bucket_width);
        double sum = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            sum += losses[i];
        }
        result.bucket_means.push_back(sum / static_cast<double>(end - begin));
    }
    return result;
}

} // namespace ropelab
