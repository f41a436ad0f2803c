#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ropelab/error.hpp"
#include "ropelab/selfinstruct.hpp"

using namespace ropelab;

namespace {

std::string read_golden(const std::string& name) {
    std::ifstream in(std::string(ROPELAB_GOLDEN_DIR) + "/" + name, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string words(std::size_t n, const std::string& prefix = "w") {
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            text += (i % 7 == 0) ? "\n" : " ";
        }
        text += prefix + std::to_string(i);
    }
    return text;
}

TrainingInstance instance_of(std::size_t n, TokenId first, std::size_t prompt_tokens, LossPolicy policy) {
    TrainingInstance inst;
    inst.loss_policy = policy;
    inst.prompt_tokens = prompt_tokens;
    for (std::size_t i = 0; i < n; ++i) {
        inst.token_ids.push_back(first + static_cast<TokenId>(i));
        inst.loss_mask.push_back(policy == LossPolicy::IncludeInputLmLoss || i >= prompt_tokens);
    }
    return inst;
}

ErrorKind kind_of(std::string_view response) {
    try {
        extract_qa(response, AnswerStyle::Normal);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::InvalidArgument;
}

std::string tag_of(std::string_view response) {
    try {
        extract_qa(response, AnswerStyle::Normal);
    } catch (const TagError& e) {
        return e.tag();
    }
    return "";
}

} // namespace

TEST_CASE("tokenizer contract") {
    const SplitTokenizer tok;
    const std::string text = "Hello,  world!\nIt's   42 degrees.";
    const auto ids = tok.encode(text);
    CHECK(ids == tok.encode(text));
    CHECK(std::find(ids.begin(), ids.end(), tok.pad_id()) == ids.end());
    CHECK(ids.size() == 10);
    CHECK(tok.decode(ids) == "Hello , world ! It ' s 42 degrees .");
    // Decoding again is a fixed point of whitespace normalization.
    CHECK(tok.decode(tok.encode(tok.decode(ids))) == tok.decode(ids));

    const auto pieces = tok.encode_pieces(text);
    for (const auto& p : pieces) {
        CHECK(SplitTokenizer::token_id(std::string_view(text).substr(p.begin, p.end - p.begin)) == p.id);
    }
    CHECK(tok.encode("").empty());
    CHECK(tok.encode("  \n\t ").empty());
}

TEST_CASE("chunk_document tiling") {
    const SplitTokenizer tok;
    const auto ten = chunk_document("d", words(10), tok, 20);
    REQUIRE(ten.size() == 1);
    CHECK(ten[0].token_span == TokenSpan{0, 10});
    CHECK(ten[0].text == words(10));

    const auto hundred = words(100);
    const auto hundred_ids = tok.encode(hundred);
    const auto four = chunk_document("d", hundred, tok, 25);
    REQUIRE(four.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(four[i].token_span == TokenSpan{25 * i, 25 * i + 25});
        CHECK(four[i].chunk_index == i);
        CHECK(tok.decode(std::span(hundred_ids).subspan(25 * i, 25)) == tok.decode(tok.encode(four[i].text)));
    }

    const auto overlapping = chunk_document("d", hundred, tok, 40, 10);
    REQUIRE(overlapping.size() == 3);
    CHECK(overlapping[0].token_span == TokenSpan{0, 40});
    CHECK(overlapping[1].token_span == TokenSpan{30, 70});
    CHECK(overlapping[2].token_span == TokenSpan{60, 100});

    // Chunk text is the original substring, including its line breaks.
    CHECK(hundred.find(overlapping[1].text) != std::string::npos);
    CHECK(overlapping[1].text.find('\n') != std::string::npos);

    CHECK_THROWS_AS(chunk_document("d", "", tok, 10), Error);
    CHECK_THROWS_AS(chunk_document("d", hundred, tok, 10, 10), Error);
}

TEST_CASE("stored templates equal the golden files") {
    CHECK(templates::kNormalAnswerPrompt == read_golden("normal_answer_prompt.txt"));
    CHECK(templates::kShortAnswerPrompt == read_golden("short_answer_prompt.txt"));
    CHECK(templates::kNormalAnswerData == read_golden("normal_answer_data.txt"));
    CHECK(templates::kShortAnswerData == read_golden("short_answer_data.txt"));
}

TEST_CASE("render_qa_prompt") {
    DocumentChunk chunk{"d", 0, "abc", {0, 1}};
    const auto normal = render_qa_prompt(chunk, AnswerStyle::Normal);
    CHECK(normal.find("\"\"\"\nabc\n\"\"\"") != std::string::npos);
    CHECK(normal.find("Wrap the question and answer using") != std::string::npos);
    CHECK(normal.starts_with("[INST] "));
    CHECK(normal.ends_with("[/INST]"));
    CHECK(normal == render_qa_prompt(chunk, AnswerStyle::Normal));

    const auto shrt = render_qa_prompt(chunk, AnswerStyle::Short);
    CHECK(shrt.find("**which can be answered in a few words or a single phrase**") != std::string::npos);

    // Only the substitution site differs from the golden file.
    for (auto [style, file] : {std::pair{AnswerStyle::Normal, "normal_answer_prompt.txt"},
                               {AnswerStyle::Short, "short_answer_prompt.txt"}}) {
        const auto golden = read_golden(file);
        const auto at = golden.find("{TEXT_CHUNK}");
        REQUIRE(at != std::string::npos);
        const std::string payload = "multi\nline  text with {braces} and \"\"\" quotes";
        chunk.text = payload;
        const auto rendered = render_qa_prompt(chunk, style);
        CHECK(rendered.substr(0, at) == golden.substr(0, at));
        CHECK(rendered.substr(at, payload.size()) == payload);
        CHECK(rendered.substr(at + payload.size()) == golden.substr(at + 12));
    }
}

TEST_CASE("extract_qa") {
    const QAPair plain = extract_qa("<question>Q?</question><answer>A.</answer>", AnswerStyle::Normal);
    CHECK(plain.question == "Q?");
    CHECK(plain.answer == "A.");

    const QAPair chatty =
        extract_qa("Sure! <question>Q?</question>\n<answer>A.</answer> Hope that helps.", AnswerStyle::Short);
    CHECK(chatty.question == "Q?");
    CHECK(chatty.answer == "A.");
    CHECK(chatty.style == AnswerStyle::Short);

    CHECK(extract_qa("<question>\n  spaced  \n</question><answer> x </answer>", AnswerStyle::Normal).question ==
          "spaced");
    CHECK(extract_qa("<question>1</question><answer>2</answer><question>3</question>", AnswerStyle::Normal)
              .question == "1");

    CHECK(kind_of("<question>Q?</question>") == ErrorKind::MissingTag);
    CHECK(tag_of("<question>Q?</question>") == "answer");
    CHECK(kind_of("no tags at all") == ErrorKind::MissingTag);
    CHECK(tag_of("no tags at all") == "question");
    CHECK(kind_of("<question>Q?<answer>A</answer>") == ErrorKind::UnbalancedTag);
    CHECK(tag_of("<question>Q?<answer>A</answer>") == "question");
    CHECK(kind_of("<question>Q</question> A</answer>") == ErrorKind::UnbalancedTag);
    CHECK(tag_of("<question>Q</question> A</answer>") == "answer");
    CHECK(kind_of("<question> </question><answer>A</answer>") == ErrorKind::EmptyField);
    CHECK(tag_of("<question> </question><answer>A</answer>") == "question");
    CHECK(kind_of("<Question>Q</Question><answer>A</answer>") == ErrorKind::MissingTag);
}

TEST_CASE("wrap/extract round trip") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> len(1, 40);
    std::uniform_int_distribution<int> ch(32, 126);
    const auto random_text = [&] {
        std::string s;
        while (true) {
            s.clear();
            for (int i = len(rng); i > 0; --i) {
                s += static_cast<char>(ch(rng));
            }
            const bool tagged = s.find('<') != std::string::npos;
            const bool padded = s.front() == ' ' || s.back() == ' ';
            if (!tagged && !padded) {
                return s;
            }
        }
    };
    for (int i = 0; i < 100; ++i) {
        const QAPair qa{random_text(), random_text(), i % 2 ? AnswerStyle::Short : AnswerStyle::Normal};
        CHECK(extract_qa(wrap_qa(qa), qa.style) == qa);
    }
    CHECK(accept_all(QAPair{}, DocumentChunk{}));
}

TEST_CASE("select_document_window") {
    CHECK(select_document_window(500, {100, 200}, 600) == TokenSpan{0, 500});
    CHECK(select_document_window(1000, {100, 200}, 600) == TokenSpan{0, 600});
    const auto w = select_document_window(1000, {800, 900}, 600);
    CHECK(w == TokenSpan{400, 1000});
    CHECK(w.start <= 800);
    CHECK(w.end >= 900);
    CHECK(select_document_window(5000, {2000, 2100}, 600) == TokenSpan{1750, 2350});
    CHECK_THROWS_AS(select_document_window(1000, {100, 800}, 600), Error);

    for (std::size_t s = 0; s < 950; s += 37) {
        for (std::size_t len : {1, 20, 50}) {
            const TokenSpan chunk{s, std::min<std::size_t>(1000, s + len)};
            const auto win = select_document_window(1000, chunk, 100);
            CHECK(win.size() == 100);
            CHECK(win.start <= chunk.start);
            CHECK(win.end >= chunk.end);
            CHECK(win.end <= 1000);
        }
    }
}

TEST_CASE("build_instance keeps the chunk and honors the budget") {
    const SplitTokenizer tok;
    const auto doc = words(1000);
    const auto chunks = chunk_document("doc", doc, tok, 100);
    const QAPair qa{"What is w850?", "It is a word.", AnswerStyle::Normal};
    const std::size_t overhead = instance_overhead_tokens(qa, tok);
    const auto doc_ids = tok.encode(doc);

    SUBCASE("fits entirely") {
        const auto inst = build_instance(doc, chunks[1], qa, tok, 5000, LossPolicy::OutputOnly);
        CHECK(inst.prompt.find(doc) != std::string::npos);
        CHECK(inst.document_window == TokenSpan{0, 1000});
        CHECK(inst.response == qa.answer);
    }
    SUBCASE("tail drop") {
        const auto inst = build_instance(doc, chunks[1], qa, tok, overhead + 600, LossPolicy::OutputOnly);
        CHECK(inst.document_window == TokenSpan{0, 600});
        CHECK(inst.token_ids.size() == overhead + 600);
    }
    SUBCASE("centered window") {
        const auto inst = build_instance(doc, chunks[8], qa, tok, overhead + 600, LossPolicy::IncludeInputLmLoss);
        CHECK(inst.document_window == TokenSpan{400, 1000});
        CHECK(inst.token_ids.size() <= overhead + 600);
        const std::vector<TokenId> chunk_ids(doc_ids.begin() + 800, doc_ids.begin() + 900);
        CHECK(std::search(inst.token_ids.begin(), inst.token_ids.end(), chunk_ids.begin(), chunk_ids.end()) !=
              inst.token_ids.end());
        CHECK(inst.prompt.find(chunks[8].text) != std::string::npos);
    }
    SUBCASE("loss masks") {
        for (auto policy : {LossPolicy::OutputOnly, LossPolicy::IncludeInputLmLoss}) {
            const auto inst = build_instance(doc, chunks[3], qa, tok, overhead + 300, policy);
            REQUIRE(inst.loss_mask.size() == inst.token_ids.size());
            const auto response_ids = tok.encode(qa.answer);
            CHECK(inst.prompt_tokens + response_ids.size() == inst.token_ids.size());
            for (std::size_t i = 0; i < inst.token_ids.size(); ++i) {
                const bool prompt = i < inst.prompt_tokens;
                CHECK(inst.loss_mask[i] == (!prompt || policy == LossPolicy::IncludeInputLmLoss));
            }
            CHECK(std::equal(response_ids.begin(), response_ids.end(), inst.token_ids.end() - response_ids.size()));
            CHECK(inst.prompt.ends_with("[/INST]\n"));
            CHECK(inst.prompt.find("Question: What is w850? \n") != std::string::npos);
        }
    }
    SUBCASE("budget too small") {
        try {
            build_instance(doc, chunks[2], qa, tok, overhead + 99, LossPolicy::OutputOnly);
            FAIL("expected BudgetTooSmall");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::BudgetTooSmall);
        }
    }
}

TEST_CASE("chunk survival over random budgets") {
    const SplitTokenizer tok;
    const auto doc = words(700, "t");
    const auto doc_ids = tok.encode(doc);
    const auto chunks = chunk_document("doc", doc, tok, 64, 16);
    const QAPair qa{"Which?", "That one.", AnswerStyle::Short};
    const std::size_t overhead = instance_overhead_tokens(qa, tok);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> budget(64, 800);
    for (int trial = 0; trial < 60; ++trial) {
        const auto& chunk = chunks[static_cast<std::size_t>(trial) % chunks.size()];
        const auto inst = build_instance(doc, chunk, qa, tok, overhead + budget(rng), LossPolicy::OutputOnly);
        const std::vector<TokenId> want(doc_ids.begin() + static_cast<std::ptrdiff_t>(chunk.token_span.start),
                                        doc_ids.begin() + static_cast<std::ptrdiff_t>(chunk.token_span.end));
        CHECK(std::search(inst.token_ids.begin(), inst.token_ids.end(), want.begin(), want.end()) !=
              inst.token_ids.end());
    }
}

TEST_CASE("pack_short_instances examples") {
    const std::vector<TrainingInstance> three{instance_of(5, 100, 2, LossPolicy::OutputOnly),
                                              instance_of(7, 200, 3, LossPolicy::OutputOnly),
                                              instance_of(4, 300, 1, LossPolicy::IncludeInputLmLoss)};
    const auto batch = pack_short_instances(three, 8);
    REQUIRE(batch.sequences.size() == 2);
    CHECK(batch.dropped_tokens == 0);
    CHECK(batch.sequences[0] == std::vector<TokenId>{100, 101, 102, 103, 104, 200, 201, 202});
    CHECK(batch.sequences[1] == std::vector<TokenId>{203, 204, 205, 206, 300, 301, 302, 303});
    CHECK(batch.boundaries[0] == std::vector<SequenceSegment>{{0, 0, 5}, {1, 5, 8}});
    CHECK(batch.boundaries[1] == std::vector<SequenceSegment>{{1, 0, 4}, {2, 4, 8}});
    CHECK(batch.loss_masks[0] == std::vector<bool>{false, false, true, true, true, false, false, false});
    CHECK(batch.loss_masks[1] == std::vector<bool>{true, true, true, true, true, true, true, true});

    const std::vector<TrainingInstance> exact{instance_of(8, 1, 2, LossPolicy::OutputOnly)};
    const auto one = pack_short_instances(exact, 8);
    CHECK(one.sequences.size() == 1);
    CHECK(one.dropped_tokens == 0);

    const std::vector<TrainingInstance> small{instance_of(3, 1, 1, LossPolicy::OutputOnly),
                                              instance_of(2, 9, 1, LossPolicy::OutputOnly)};
    const auto none = pack_short_instances(small, 8);
    CHECK(none.sequences.empty());
    CHECK(none.dropped_tokens == 5);

    const std::vector<TrainingInstance> too_long{instance_of(9, 1, 1, LossPolicy::OutputOnly)};
    try {
        pack_short_instances(too_long, 8);
        FAIL("expected InstanceTooLong");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InstanceTooLong);
    }
}

TEST_CASE("packing conserves tokens and mask bits") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::size_t> len(1, 50);
    for (std::size_t L : {16, 64, 100}) {
        std::vector<TrainingInstance> insts;
        TokenId next = 1;
        for (int i = 0; i < 40; ++i) {
            const std::size_t n = std::min(len(rng), L);
            insts.push_back(instance_of(n, next, n / 2, i % 3 ? LossPolicy::OutputOnly : LossPolicy::IncludeInputLmLoss));
            next += static_cast<TokenId>(n);
        }
        const auto batch = pack_short_instances(insts, L);
        std::size_t total = 0;
        std::vector<TokenId> stream;
        std::vector<bool> mask_stream;
        for (const auto& inst : insts) {
            total += inst.token_ids.size();
            stream.insert(stream.end(), inst.token_ids.begin(), inst.token_ids.end());
            mask_stream.insert(mask_stream.end(), inst.loss_mask.begin(), inst.loss_mask.end());
        }
        CHECK(batch.sequences.size() * L + batch.dropped_tokens == total);
        for (std::size_t s = 0; s < batch.sequences.size(); ++s) {
            CHECK(batch.sequences[s].size() == L);
            CHECK(batch.loss_masks[s].size() == L);
            std::size_t covered = 0;
            for (const auto& seg : batch.boundaries[s]) {
                CHECK(seg.start == covered);
                covered = seg.end;
            }
            CHECK(covered == L);
            for (std::size_t i = 0; i < L; ++i) {
                CHECK(batch.sequences[s][i] == stream[s * L + i]);
                CHECK(batch.loss_masks[s][i] == mask_stream[s * L + i]);
            }
        }
    }
}

TEST_CASE("pad_long_instance") {
    const auto same = instance_of(5, 10, 2, LossPolicy::OutputOnly);
    const auto unchanged = pad_long_instance(same, 5, 0);
    CHECK(unchanged.token_ids == same.token_ids);
    CHECK(unchanged.loss_mask == same.loss_mask);

    const auto out = pad_long_instance(instance_of(3, 10, 1, LossPolicy::OutputOnly), 5, 0);
    CHECK(out.token_ids == std::vector<TokenId>{10, 11, 12, 0, 0});
    CHECK(out.loss_mask == std::vector<bool>{false, true, true, false, false});
    const auto inc = pad_long_instance(instance_of(3, 10, 1, LossPolicy::IncludeInputLmLoss), 5, 0);
    CHECK(inc.loss_mask == std::vector<bool>{true, true, true, false, false});

    CHECK_THROWS_AS(pad_long_instance(instance_of(6, 1, 1, LossPolicy::OutputOnly), 5, 0), Error);
}
