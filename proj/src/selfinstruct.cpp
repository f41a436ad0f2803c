#include "ropelab/selfinstruct.hpp"

#include <algorithm>
#include <cctype>

#include "ropelab/error.hpp"

namespace ropelab {

const char* answer_style_name(AnswerStyle style) {
    return style == AnswerStyle::Short ? "short" : "normal";
}

const char* loss_policy_name(LossPolicy policy) {
    return policy == LossPolicy::IncludeInputLmLoss ? "include_input_lm_loss" : "output_only";
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
    const auto pieces = encode_pieces(text);
    std::vector<TokenId> ids;
    ids.reserve(pieces.size());
    for (const auto& p : pieces) {
        ids.push_back(p.id);
    }
    return ids;
}

TokenId SplitTokenizer::token_id(std::string_view token) {
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : token) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    constexpr std::uint64_t kRange = (std::uint64_t{1} << 31) - 2;
    return static_cast<TokenId>(1 + hash % kRange);
}

std::vector<TokenPiece> SplitTokenizer::encode_pieces(std::string_view text) const {
    std::vector<TokenPiece> pieces;
    std::size_t word_start = std::string_view::npos;
    const auto flush_word = [&](std::size_t end) {
        if (word_start != std::string_view::npos) {
            pieces.push_back({0, word_start, end});
            word_start = std::string_view::npos;
        }
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            flush_word(i);
        } else if (c < 0x80 && std::ispunct(c)) {
            flush_word(i);
            pieces.push_back({0, i, i + 1});
        } else if (word_start == std::string_view::npos) {
            word_start = i;
        }
    }
    flush_word(text.size());

    std::lock_guard lock(mutex_);
    for (auto& p : pieces) {
        const auto token = text.substr(p.begin, p.end - p.begin);
        p.id = token_id(token);
        const auto [it, inserted] = vocab_.try_emplace(p.id, token);
        if (!inserted && it->second != token) {
            fail("token id collision between '" + it->second + "' and '" + std::string(token) + "'");
        }
    }
    return pieces;
}

std::string SplitTokenizer::decode(std::span<const TokenId> ids) const {
    std::lock_guard lock(mutex_);
    std::string text;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto it = vocab_.find(ids[i]);
        if (it == vocab_.end()) {
            fail("decode: unknown token id " + std::to_string(ids[i]));
        }
        if (i > 0) {
            text += ' ';
        }
        text += it->second;
    }
    return text;
}

namespace {

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

std::string replace_once(std::string_view text, std::string_view placeholder, std::string_view value) {
    const auto at = text.find(placeholder);
    std::string out;
    out.reserve(text.size() + value.size());
    out.append(text.substr(0, at));
    out.append(value);
    out.append(text.substr(at + placeholder.size()));
    return out;
}

std::string tagged_field(std::string_view response, const std::string& tag) {
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    const auto begin = response.find(open);
    if (begin == std::string_view::npos) {
        throw TagError(response.find(close) == std::string_view::npos ? ErrorKind::MissingTag
                                                                       : ErrorKind::UnbalancedTag,
                       tag);
    }
    const auto content = begin + open.size();
    const auto end = response.find(close, content);
    if (end == std::string_view::npos) {
        throw TagError(ErrorKind::UnbalancedTag, tag);
    }
    const auto value = trim(response.substr(content, end - content));
    if (value.empty()) {
        throw TagError(ErrorKind::EmptyField, tag);
    }
    return std::string(value);
}

std::string_view span_text(std::string_view text, std::span<const TokenPiece> pieces, TokenSpan span) {
    if (span.size() == 0) {
        return {};
    }
    const auto begin = pieces[span.start].begin;
    return text.substr(begin, pieces[span.end - 1].end - begin);
}

} // namespace

std::vector<DocumentChunk> chunk_document(std::string_view doc_id, std::string_view text,
                                          const Tokenizer& tokenizer, std::size_t chunk_tokens,
                                          std::size_t overlap) {
    require(chunk_tokens > overlap, "chunk_tokens must exceed overlap");
    const auto pieces = tokenizer.encode_pieces(text);
    require(!pieces.empty(), "cannot chunk an empty document");

    std::vector<DocumentChunk> chunks;
    const std::size_t stride = chunk_tokens - overlap;
    for (std::size_t start = 0;; start += stride) {
        const TokenSpan span{start, std::min(pieces.size(), start + chunk_tokens)};
        chunks.push_back({std::string(doc_id), chunks.size(), std::string(span_text(text, pieces, span)), span});
        if (span.end == pieces.size()) {
            break;
        }
    }
    return chunks;
}

std::string render_qa_prompt(const DocumentChunk& chunk, AnswerStyle style) {
    return replace_once(templates::qa_prompt(style), templates::kTextChunk, chunk.text);
}

QAPair extract_qa(std::string_view response, AnswerStyle style) {
    QAPair qa;
    qa.question = tagged_field(response, "question");
    qa.answer = tagged_field(response, "answer");
    qa.style = style;
    return qa;
}

std::string wrap_qa(const QAPair& qa) {
    return "<question>" + qa.question + "</question>\n<answer>" + qa.answer + "</answer>";
}

bool accept_all(const QAPair&, const DocumentChunk&) {
    return true;
}

TokenSpan select_document_window(std::size_t doc_tokens, TokenSpan chunk, std::size_t doc_budget) {
    require(chunk.start < chunk.end && chunk.end <= doc_tokens, "chunk span must lie inside the document");
    if (doc_tokens <= doc_budget) {
        return {0, doc_tokens};
    }
    if (chunk.size() > doc_budget) {
        throw Error(ErrorKind::BudgetTooSmall, "document budget of " + std::to_string(doc_budget) +
                                                   " tokens cannot hold a " + std::to_string(chunk.size()) +
                                                   "-token chunk");
    }
    if (chunk.end <= doc_budget) {
        return {0, doc_budget};
    }
    const std::size_t mid = (chunk.start + chunk.end) / 2;
    std::size_t start = mid > doc_budget / 2 ? mid - doc_budget / 2 : 0;
    start = std::min(start, doc_tokens - doc_budget);
    return {start, start + doc_budget};
}

std::size_t instance_overhead_tokens(const QAPair& qa, const Tokenizer& tokenizer) {
    auto scaffold = replace_once(templates::data_template(qa.style), templates::kFullDocument, "");
    scaffold = replace_once(scaffold, templates::kQuestion, qa.question);
    scaffold = replace_once(scaffold, templates::kAnswer, qa.answer);
    return tokenizer.encode(scaffold).size();
}

TrainingInstance build_instance(std::string_view full_doc, const DocumentChunk& chunk, const QAPair& qa,
                                const Tokenizer& tokenizer, std::size_t max_context_tokens,
                                LossPolicy loss_policy) {
    const auto pieces = tokenizer.encode_pieces(full_doc);
    const std::size_t overhead = instance_overhead_tokens(qa, tokenizer);
    if (max_context_tokens < overhead + chunk.token_span.size()) {
        throw Error(ErrorKind::BudgetTooSmall,
                    "context budget of " + std::to_string(max_context_tokens) + " tokens cannot hold " +
                        std::to_string(overhead) + " scaffolding tokens plus the " +
                        std::to_string(chunk.token_span.size()) + "-token chunk");
    }
    const TokenSpan window =
        select_document_window(pieces.size(), chunk.token_span, max_context_tokens - overhead);

    // Split the data template at the answer placeholder: everything before it is the prompt.
    const auto tmpl = templates::data_template(qa.style);
    const auto answer_at = tmpl.find(templates::kAnswer);
    std::string prompt = replace_once(tmpl.substr(0, answer_at), templates::kFullDocument,
                                      span_text(full_doc, pieces, window));
    prompt = replace_once(prompt, templates::kQuestion, qa.question);

    TrainingInstance instance;
    instance.prompt = std::move(prompt);
    instance.response = qa.answer;
    instance.loss_policy = loss_policy;
    instance.document_window = window;
    instance.token_ids = tokenizer.encode(instance.prompt);
    instance.prompt_tokens = instance.token_ids.size();
    const auto response_ids = tokenizer.encode(instance.response);
    instance.token_ids.insert(instance.token_ids.end(), response_ids.begin(), response_ids.end());

    instance.loss_mask.assign(instance.token_ids.size(), true);
    if (loss_policy == LossPolicy::OutputOnly) {
        std::fill_n(instance.loss_mask.begin(), instance.prompt_tokens, false);
    }
    return instance;
}

PackedBatch pack_short_instances(std::span<const TrainingInstance> instances, std::size_t sequence_length) {
    require(sequence_length >= 1, "sequence length must be >= 1");
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (instances[i].token_ids.size() > sequence_length) {
            throw Error(ErrorKind::InstanceTooLong,
                        "instance " + std::to_string(i) + " has " + std::to_string(instances[i].token_ids.size()) +
                            " tokens, more than the packing length " + std::to_string(sequence_length));
        }
    }

    PackedBatch batch;
    batch.sequence_length = sequence_length;
    std::vector<TokenId> ids;
    std::vector<bool> mask;
    std::vector<SequenceSegment> segments;
    ids.reserve(sequence_length);
    mask.reserve(sequence_length);

    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        std::size_t taken = 0;
        while (taken < inst.token_ids.size()) {
            const std::size_t n = std::min(inst.token_ids.size() - taken, sequence_length - ids.size());
            segments.push_back({i, ids.size(), ids.size() + n});
            ids.insert(ids.end(), inst.token_ids.begin() + taken, inst.token_ids.begin() + taken + n);
            mask.insert(mask.end(), inst.loss_mask.begin() + taken, inst.loss_mask.begin() + taken + n);
            taken += n;
            if (ids.size() == sequence_length) {
                batch.sequences.push_back(std::move(ids));
                batch.loss_masks.push_back(std::move(mask));
                batch.boundaries.push_back(std::move(segments));
                ids.clear();
                mask.clear();
                segments.clear();
            }
        }
    }
    batch.dropped_tokens = ids.size();
    return batch;
}

PaddedSequence pad_long_instance(const TrainingInstance& instance, std::size_t sequence_length, TokenId pad_id) {
    if (instance.token_ids.size() > sequence_length) {
        throw Error(ErrorKind::InstanceTooLong, "instance has " + std::to_string(instance.token_ids.size()) +
                                                    " tokens, more than the padded length " +
                                                    std::to_string(sequence_length));
    }
    PaddedSequence out{instance.token_ids, instance.loss_mask};
    out.token_ids.resize(sequence_length, pad_id);
    out.loss_mask.resize(sequence_length, false);
    return out;
}

} // namespace ropelab
