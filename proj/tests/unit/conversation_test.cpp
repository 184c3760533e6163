// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "surgvl/conversation.hpp"
#include "surgvl/errors.hpp"
#include "surgvl/tokenizer.hpp"

namespace surgvl {
namespace {

const std::string kSep(kRoundSeparator);

ConversationRecord three_rounds() {
  return {"v", {{"q1", "a1"}, {"q2", "a2"}, {"q3", "a3"}}, TaskKind::conversation};
}

ChatTemplate sys_template() {
  ChatTemplate t;
  t.system_prompt = "SYS";
  return t;
}

WordTokenizer tokenizer_for(const std::vector<std::string>& texts) {
  return WordTokenizer::build(texts, ChatTemplate{}.reserved_tokens());
}

TEST(RoundInput, FirstRoundIsTheQueryAlone) {
  const auto rec = three_rounds();
  EXPECT_EQ(build_round_input(rec, 1, HistoryMode::full), "q1");
  EXPECT_EQ(build_round_input(rec, 1, HistoryMode::previous_only), "q1");
}

TEST(RoundInput, SecondRoundConcatenatesPreviousPairAndQuery) {
  const auto rec = three_rounds();
  const std::string expected = "q1" + kSep + "a1" + kSep + "q2";
  EXPECT_EQ(build_round_input(rec, 2, HistoryMode::full), expected);
  EXPECT_EQ(build_round_input(rec, 2, HistoryMode::previous_only), expected);
}

TEST(RoundInput, ThirdRoundUnrollsInFullMode) {
  const auto rec = three_rounds();
  EXPECT_EQ(build_round_input(rec, 3, HistoryMode::full),
            "q1" + kSep + "a1" + kSep + "q2" + kSep + "a2" + kSep + "q3");
  EXPECT_EQ(build_round_input(rec, 3, HistoryMode::previous_only),
            "q2" + kSep + "a2" + kSep + "q3");
}

TEST(RoundInput, OutOfRange) {
  const auto rec = three_rounds();
  EXPECT_THROW(build_round_input(rec, 0, HistoryMode::full), InvalidInputError);
  EXPECT_THROW(build_round_input(rec, 4, HistoryMode::full), InvalidInputError);
}

TEST(RoundInputProperty, FullModePrefix) {
  gen::Gen g(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int rounds = g.integer(2, 6);
    const auto rec = g.record(rounds);
    for (int r = 1; r < rounds; ++r) {
      const std::string head = build_round_input(rec, r, HistoryMode::full) + kSep +
                               rec.rounds[static_cast<std::size_t>(r - 1)].answer;
      const std::string next = build_round_input(rec, r + 1, HistoryMode::full);
      EXPECT_EQ(next.compare(0, head.size(), head), 0) << "trial " << trial << " r " << r;
    }
  }
}

TEST(Template, SingleRoundShape) {
  ConversationRecord rec{"v", {{"q1", ""}}, TaskKind::conversation};
  EXPECT_EQ(render_template(rec, 1, HistoryMode::full, sys_template()),
            "SYS <vis> USER: q1 ASSISTANT:");
}

TEST(Template, EmptySystemPromptDropsSegment) {
  ConversationRecord rec{"v", {{"q1", ""}}, TaskKind::conversation};
  ChatTemplate t;
  t.system_prompt.clear();
  EXPECT_EQ(render_template(rec, 1, HistoryMode::full, t), "<vis> USER: q1 ASSISTANT:");
}

TEST(Template, TwoRoundsHaveOnePlaceholder) {
  const auto rec = three_rounds();
  const std::string text = render_template(rec, 2, HistoryMode::full, sys_template());
  EXPECT_EQ(text, "SYS <vis> USER: q1 ASSISTANT: a1 </s> USER: q2 ASSISTANT:");
  std::size_t count = 0;
  for (std::size_t p = text.find("<vis>"); p != std::string::npos; p = text.find("<vis>", p + 1)) {
    ++count;
  }
  EXPECT_EQ(count, 1u);
}

TEST(Template, PlaceholderAfterFirstQuery) {
  ChatTemplate t = sys_template();
  t.placement = VisualPlacement::after_first_query;
  EXPECT_EQ(render_with_answer(three_rounds(), 1, HistoryMode::full, t),
            "SYS USER: q1 <vis> ASSISTANT: a1 </s>");
}

TEST(Template, MissingPlaceholderIsConfigError) {
  ChatTemplate t;
  t.visual_placeholder.clear();
  EXPECT_THROW(render_template(three_rounds(), 1, HistoryMode::full, t), ConfigError);
  t.visual_placeholder = "two words";
  EXPECT_THROW(validate(t), ConfigError);
}

TEST(Template, ReservedTokenInsideTextIsRejected) {
  ConversationRecord rec{"v", {{"what is <vis> here", "x"}}, TaskKind::conversation};
  EXPECT_THROW(render_template(rec, 1, HistoryMode::full, ChatTemplate{}), InvalidInputError);
}

TEST(TemplateProperty, ParseRecoversRoundsAndIsDeterministic) {
  gen::Gen g(32);
  const ChatTemplate t = sys_template();
  for (int trial = 0; trial < 100; ++trial) {
    const int rounds = g.integer(1, 6);
    const auto rec = g.record(rounds);
    const std::string text = render_with_answer(rec, rounds, HistoryMode::full, t);
    EXPECT_EQ(text, render_with_answer(rec, rounds, HistoryMode::full, t));
    const auto parsed = parse_rendered(text, t);
    ASSERT_EQ(parsed.turns.size(), static_cast<std::size_t>(rounds));
    for (int i = 0; i < rounds; ++i) {
      EXPECT_EQ(parsed.turns[static_cast<std::size_t>(i)].query,
                rec.rounds[static_cast<std::size_t>(i)].query);
      EXPECT_EQ(parsed.turns[static_cast<std::size_t>(i)].answer,
                rec.rounds[static_cast<std::size_t>(i)].answer);
      EXPECT_TRUE(parsed.turn_answered[static_cast<std::size_t>(i)]);
    }
  }
}

TEST(Parse, BrokenGrammarNamesTurn) {
  const ChatTemplate t = sys_template();
  try {
    parse_rendered("SYS <vis> USER: q1 ASSISTANT: a1 </s> ASSISTANT: q2", t);
    FAIL() << "expected AlignmentError";
  } catch (const AlignmentError& e) {
    EXPECT_EQ(e.round(), 2);
  }
}

TEST(Mask, OpenRoundHasNoSupervision) {
  ConversationRecord rec{"v", {{"what phase", ""}}, TaskKind::conversation};
  const auto tok = tokenizer_for({"what phase"});
  const auto ex = tokenize_and_mask(render_template(rec, 1, HistoryMode::full, ChatTemplate{}), {},
                                    tok, ChatTemplate{});
  EXPECT_EQ(ex.supervised_count(), 0u);
  EXPECT_EQ(ex.loss_mask.size(), ex.token_ids.size());
}

TEST(Mask, ThreeAnswerTokensPlusEndOfTurn) {
  ConversationRecord rec{"v", {{"what phase", "calot triangle dissection"}},
                         TaskKind::conversation};
  const auto tok = tokenizer_for({"what phase calot triangle dissection"});
  ASSERT_EQ(tok.encode("calot triangle dissection").size(), 3u);
  const std::vector<std::string> answers{"calot triangle dissection"};
  const auto ex = tokenize_and_mask(render_with_answer(rec, 1, HistoryMode::full, ChatTemplate{}),
                                    answers, tok, ChatTemplate{});
  EXPECT_EQ(ex.supervised_count(), 4u);
  const int eot = *tok.token_id("</s>");
  EXPECT_EQ(ex.token_ids.back(), eot);
  EXPECT_EQ(ex.loss_mask.back(), 1);
  EXPECT_EQ(ex.loss_mask[ex.visual_start], 0);
}

TEST(Mask, AnswerMismatchNamesRound) {
  const auto rec = three_rounds();
  const auto tok = tokenizer_for({"q1 a1 q2 a2 q3 a3"});
  const std::vector<std::string> answers{"a1", "wrong"};
  try {
    tokenize_and_mask(render_with_answer(rec, 2, HistoryMode::full, ChatTemplate{}), answers, tok,
                      ChatTemplate{});
    FAIL() << "expected AlignmentError";
  } catch (const AlignmentError& e) {
    EXPECT_EQ(e.round(), 2);
  }
}

TEST(MaskProperty, SupervisedCountEqualsAnswerTokensAndAvoidsVisual) {
  gen::Gen g(33);
  for (int trial = 0; trial < 100; ++trial) {
    const int rounds = g.integer(1, 6);
    const auto rec = g.record(rounds);
    std::vector<std::string> texts;
    for (const auto& r : rec.rounds) {
      texts.push_back(r.query);
      // Half the answers miss the vocabulary and go through byte fallback.
      if (g.integer(0, 1)) texts.push_back(r.answer);
    }
    const auto tok = tokenizer_for(texts);
    for (HistoryMode mode : {HistoryMode::full, HistoryMode::previous_only}) {
      const auto examples = training_examples(rec, mode, tok, ChatTemplate{});
      std::size_t expected = 0;
      for (const auto& r : rec.rounds) expected += tok.encode(r.answer).size() + 1;
      std::size_t got = 0;
      for (const auto& ex : examples) {
        got += ex.supervised_count();
        ASSERT_EQ(ex.loss_mask.size(), ex.token_ids.size());
        EXPECT_EQ(ex.visual_length, 1u);
        EXPECT_EQ(ex.loss_mask[ex.visual_start], 0);
        EXPECT_EQ(ex.token_ids[ex.visual_start], *tok.token_id("<vis>"));
      }
      EXPECT_EQ(got, expected) << "trial " << trial;
    }
    const auto a = training_examples(rec, HistoryMode::full, tok, ChatTemplate{});
    const auto b = training_examples(rec, HistoryMode::full, tok, ChatTemplate{});
    EXPECT_EQ(a[0].token_ids, b[0].token_ids);
  }
}

TokenizedExample ten_token_example(const WordTokenizer& tok) {
  // "<vis> USER: a b c ASSISTANT: d e f </s>" is 10 tokens.
  ChatTemplate t;
  t.system_prompt.clear();
  ConversationRecord rec{"v", {{"a b c", "d e f"}}, TaskKind::conversation};
  const std::vector<std::string> answers{"d e f"};
  return tokenize_and_mask(render_with_answer(rec, 1, HistoryMode::full, t), answers, tok, t);
}

TEST(Splice, LengthArithmetic) {
  const auto tok = tokenizer_for({"a b c d e f"});
  const auto ex = ten_token_example(tok);
  ASSERT_EQ(ex.token_ids.size(), 10u);
  gen::Gen g(34);
  const Matrix text = g.matrix(10, 8);
  const auto seq = splice_visual(ex, ProjectedVisualTokens{g.matrix(4, 8), Modality::image}, text);
  EXPECT_EQ(seq.length(), 13u);
  EXPECT_EQ(seq.embeddings.rows(), 13);
  EXPECT_EQ(seq.visual_start, ex.visual_start);
  EXPECT_EQ(seq.visual_length, 4u);
}

TEST(Splice, PlaceholderRowAsVisualIsIdentity) {
  const auto tok = tokenizer_for({"a b c d e f"});
  const auto ex = ten_token_example(tok);
  gen::Gen g(35);
  const Matrix text = g.matrix(10, 8);
  const Matrix placeholder_row = text.row(static_cast<Eigen::Index>(ex.visual_start));
  const auto seq =
      splice_visual(ex, ProjectedVisualTokens{placeholder_row, Modality::image}, text);
  EXPECT_EQ(seq.embeddings.value(), text);
}

TEST(Splice, MaskStillMarksTheSameAnswerTokens) {
  const auto tok = tokenizer_for({"a b c d e f"});
  const auto ex = ten_token_example(tok);
  gen::Gen g(36);
  const auto seq =
      splice_visual(ex, ProjectedVisualTokens{g.matrix(3, 8), Modality::video}, g.matrix(10, 8));
  std::vector<int> before, after;
  for (std::size_t i = 0; i < ex.token_ids.size(); ++i)
    if (ex.loss_mask[i]) before.push_back(ex.token_ids[i]);
  for (std::size_t i = 0; i < seq.length(); ++i) {
    if (seq.loss_mask[i]) after.push_back(seq.token_ids[i]);
    if (i >= seq.visual_start && i < seq.visual_start + seq.visual_length) {
      EXPECT_EQ(seq.token_ids[i], -1);
      EXPECT_EQ(seq.loss_mask[i], 0);
    }
  }
  EXPECT_EQ(before, after);
}

TEST(Splice, WidthMismatchIsConfigError) {
  const auto tok = tokenizer_for({"a b c d e f"});
  const auto ex = ten_token_example(tok);
  EXPECT_THROW(splice_visual(ex, ProjectedVisualTokens{Matrix::Zero(2, 7), Modality::image},
                             Matrix::Zero(10, 8)),
               ConfigError);
}

TEST(Tokenizer, LayoutAndByteFallback) {
  const auto tok = tokenizer_for({"b a a"});
  const auto vocab = tok.vocabulary();
  EXPECT_EQ(vocab[0], "<pad>");
  EXPECT_EQ(vocab[1], "<bw>");
  EXPECT_EQ(vocab[2], "USER:");
  EXPECT_EQ(vocab[6], "<0x00>");
  EXPECT_EQ(vocab[6 + 256], "a");
  EXPECT_EQ(vocab[6 + 257], "b");
  const auto ids = tok.encode("a zz");
  ASSERT_EQ(ids.size(), 4u);
  EXPECT_EQ(ids[1], WordTokenizer::kByteWord);
  EXPECT_EQ(tok.decode(ids), "a zz");
}

TEST(TokenizerProperty, DecodeInvertsEncodeUpToWhitespace) {
  gen::Gen g(37);
  const auto tok = tokenizer_for({"gallbladder hook clip"});
  for (int trial = 0; trial < 200; ++trial) {
    const std::string s = g.sentence(8);
    EXPECT_EQ(tok.decode(tok.encode(s)), s);
  }
  EXPECT_EQ(tok.decode(tok.encode("  hook \n\t clip ")), "hook clip");
}

TEST(Record, Validation) {
  EXPECT_THROW(validate(ConversationRecord{}), InvalidInputError);
  EXPECT_THROW(validate(ConversationRecord{"v", {{"", "a"}}, TaskKind::conversation}),
               InvalidInputError);
  EXPECT_THROW(validate(ConversationRecord{"v", {{"q", ""}, {"q", "a"}}, TaskKind::conversation}),
               InvalidInputError);
  EXPECT_NO_THROW(validate(ConversationRecord{"v", {{"q", "a"}, {"q", ""}}, TaskKind::conversation}));
}

}  // namespace
}  // namespace surgvl
