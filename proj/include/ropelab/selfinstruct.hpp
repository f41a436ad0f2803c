#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ropelab {

using TokenId = std::int64_t;

struct TokenSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - start; }
    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

// A token together with its byte range in the encoded text.
struct TokenPiece {
    TokenId id = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
};

// What the data pipeline needs from a tokenizer. `pad_id()` is never returned
// by `encode`.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    virtual std::vector<TokenPiece> encode_pieces(std::string_view text) const = 0;
    virtual std::string decode(std::span<const TokenId> ids) const = 0;
    virtual TokenId pad_id() const = 0;

    std::vector<TokenId> encode(std::string_view text) const;
};

// Splits on whitespace, then emits every ASCII punctuation character as its
// own token. Ids are a 64-bit FNV-1a hash folded into [1, 2^31 - 1); pad is 0.
// decode joins tokens with single spaces, so decode(encode(t)) equals t with
// whitespace normalized to one space between tokens.
class SplitTokenizer final : public Tokenizer {
public:
    std::vector<TokenPiece> encode_pieces(std::string_view text) const override;
    std::string decode(std::span<const TokenId> ids) const override;
    TokenId pad_id() const override { return 0; }

    static TokenId token_id(std::string_view token);

private:
    mutable std::mutex mutex_;
    mutable std::unordered_map<TokenId, std::string> vocab_;
};

enum class AnswerStyle { Normal, Short };
enum class LossPolicy { OutputOnly, IncludeInputLmLoss };

const char* answer_style_name(AnswerStyle style);
const char* loss_policy_name(LossPolicy policy);

struct DocumentChunk {
    std::string doc_id;
    std::size_t chunk_index = 0;
    std::string text;
    TokenSpan token_span;
};

struct QAPair {
    std::string question;
    std::string answer;
    AnswerStyle style = AnswerStyle::Normal;

    friend bool operator==(const QAPair&, const QAPair&) = default;
};

struct TrainingInstance {
    std::string prompt;
    std::string response;
    LossPolicy loss_policy = LossPolicy::OutputOnly;
    std::vector<TokenId> token_ids;
    std::vector<bool> loss_mask;
    std::size_t prompt_tokens = 0;
    // Document tokens kept in the prompt, in document token coordinates.
    TokenSpan document_window;
};

struct SequenceSegment {
    std::size_t instance_id = 0;
    std::size_t start = 0;
    std::size_t end = 0;

    friend bool operator==(const SequenceSegment&, const SequenceSegment&) = default;
};

struct PackedBatch {
    std::size_t sequence_length = 0;
    std::vector<std::vector<TokenId>> sequences;
    std::vector<std::vector<bool>> loss_masks;
    // Per sequence, the instance pieces it holds; start/end are offsets into the sequence.
    std::vector<std::vector<SequenceSegment>> boundaries;
    std::size_t dropped_tokens = 0;
};

struct PaddedSequence {
    std::vector<TokenId> token_ids;
    std::vector<bool> loss_mask;
};

// Verbatim prompt and data templates for QA generation.
namespace templates {
extern const std::string_view kNormalAnswerPrompt;
extern const std::string_view kShortAnswerPrompt;
extern const std::string_view kNormalAnswerData;
extern const std::string_view kShortAnswerData;

inline constexpr std::string_view kTextChunk = "{TEXT_CHUNK}";
inline constexpr std::string_view kFullDocument = "{FULL_DOCUMENT}";
inline constexpr std::string_view kQuestion = "{QUESTION}";
inline constexpr std::string_view kAnswer = "{ANSWER}";

std::string_view qa_prompt(AnswerStyle style);
std::string_view data_template(AnswerStyle style);
} // namespace templates

std::vector<DocumentChunk> chunk_document(std::string_view doc_id, std::string_view text,
                                          const Tokenizer& tokenizer, std::size_t chunk_tokens,
                                          std::size_t overlap = 0);

std::string render_qa_prompt(const DocumentChunk& chunk, AnswerStyle style);

// Pulls the first <question>...</question> and <answer>...</answer> spans out
// of a free-form model response. Throws TagError.
QAPair extract_qa(std::string_view response, AnswerStyle style);

// Wraps a pair the way a compliant model reply would.
std::string wrap_qa(const QAPair& qa);

// Hook for the answer-verification pass; a filter returns false to discard a pair.
using QAFilter = std::function<bool(const QAPair&, const DocumentChunk&)>;

bool accept_all(const QAPair&, const DocumentChunk&);

// Document tokens to keep under `doc_budget`: the head of the document when the
// chunk fits there, otherwise a window centered on the chunk.
TokenSpan select_document_window(std::size_t doc_tokens, TokenSpan chunk, std::size_t doc_budget);

// Tokens the data template, question and answer use without any document text.
std::size_t instance_overhead_tokens(const QAPair& qa, const Tokenizer& tokenizer);

TrainingInstance build_instance(std::string_view full_doc, const DocumentChunk& chunk, const QAPair& qa,
                                const Tokenizer& tokenizer, std::size_t max_context_tokens,
                                LossPolicy loss_policy);

PackedBatch pack_short_instances(std::span<const TrainingInstance> instances,
                                 std::size_t sequence_length = 16384);

PaddedSequence pad_long_instance(const TrainingInstance& instance, std::size_t sequence_length,
                                 TokenId pad_id);

} // namespace ropelab
