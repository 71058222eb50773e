#include <cmath>
#include <random>

#include "doctest.h"
#include "ifdl/judge.hpp"

using namespace ifdl;

namespace {

judge::JudgeRequest sample_request() {
  judge::JudgeRequest req;
  req.tampered_image = ImageTensor(8, 8);
  for (auto& v : req.tampered_image.values) v = 0.25;
  req.gt_mask = BinaryMask(8, 8);
  req.predicted_mask_a = BinaryMask(8, 8);
  req.predicted_mask_b = BinaryMask(8, 8);
  for (int i = 20; i < 28; ++i) {
    req.gt_mask.values[i] = 1;
    req.predicted_mask_a.values[i] = 1;
  }
  req.explanation_a = "a red rectangle in the top-left quadrant";
  req.explanation_b = "no tampering detected";
  req.gt_rationale = "a red rectangle was pasted in the top-left quadrant";
  return req;
}

}  // namespace

TEST_CASE("judge payload is byte-stable and embeds the decoding params") {
  auto req = sample_request();
  auto a = judge::build_judge_prompt(req);
  auto b = judge::build_judge_prompt(req);
  CHECK(a.dump() == b.dump());

  std::string text = a.dump();
  CHECK(text.find("0.7") != std::string::npos);
  CHECK(text.find("0.95") != std::string::npos);
  CHECK(text.find("8000") != std::string::npos);

  // Changing any attachment changes the payload.
  auto req2 = req;
  req2.explanation_a = "something else";
  CHECK(judge::build_judge_prompt(req2).dump() != text);
}

TEST_CASE("judge payload validation rejects incomplete requests") {
  auto req = sample_request();
  req.gt_mask = BinaryMask(0, 0);
  CHECK_THROWS_AS(judge::build_judge_prompt(req), std::invalid_argument);

  auto mismatched = sample_request();
  mismatched.predicted_mask_b = BinaryMask(4, 4);
  CHECK_THROWS_AS(judge::build_judge_prompt(mismatched),
                  std::invalid_argument);

  auto no_text = sample_request();
  no_text.gt_rationale = "";
  CHECK_THROWS_AS(judge::build_judge_prompt(no_text), std::invalid_argument);
}

TEST_CASE("judge response parsing round-trips and validates ranges") {
  std::string good = R"({"mask": 4.0, "type": 3.5, "areas": 2.0,
                         "tampered": 1.5, "visual": 5.0, "summary": 0.0})";
  auto s = judge::parse_judge_response(good);
  CHECK(s.mask == 4.0);
  CHECK(s.type == 3.5);
  CHECK(s.areas == 2.0);
  CHECK(s.tampered == 1.5);
  CHECK(s.visual == 5.0);
  CHECK(s.summary == 0.0);

  // Prose wrapping around the JSON object is tolerated.
  auto wrapped = judge::parse_judge_response(
      "Here are my scores:\n" + good + "\nThanks for asking.");
  CHECK(wrapped.mask == 4.0);

  // Out-of-range score.
  CHECK_THROWS_AS(judge::parse_judge_response(
                      R"({"mask": 6.0, "type": 1, "areas": 1,
                          "tampered": 1, "visual": 1, "summary": 1})"),
                  judge::ParseError);

  // Missing field names the gap.
  try {
    judge::parse_judge_response(
        R"({"mask": 1, "type": 1, "areas": 1, "tampered": 1, "visual": 1})");
    FAIL("expected a parse error");
  } catch (const judge::ParseError& e) {
    CHECK(std::string(e.what()).find("summary") != std::string::npos);
    CHECK(e.retriable);
  }

  // Unparseable text carries the raw response for the retry log.
  try {
    judge::parse_judge_response("total gibberish");
    FAIL("expected a parse error");
  } catch (const judge::ParseError& e) {
    CHECK(e.raw_response == "total gibberish");
  }
}

TEST_CASE("score aggregation reproduces the published columns") {
  judge::JudgeScores ours{2.28, 3.70, 2.45, 1.98, 2.91, 3.31};
  auto a = judge::aggregate_scores(ours);
  CHECK(a.overall_text == doctest::Approx(2.4365).epsilon(1e-12));
  CHECK(std::abs(a.overall_text - 2.44) < 0.005);
  CHECK(std::abs(a.overall - 2.36) < 0.005);

  judge::JudgeScores baseline{1.22, 2.96, 1.67, 1.14, 2.40, 2.48};
  auto b = judge::aggregate_scores(baseline);
  CHECK(b.overall_text == doctest::Approx(1.6725).epsilon(1e-12));
  CHECK(std::abs(b.overall_text - 1.67) < 0.005);
  // Exact aggregation of this baseline's rounded per-dimension means gives
  // 1.44625; the reference value 1.44 was evidently aggregated per-sample
  // before rounding, so only a looser bound holds here.
  CHECK(b.overall == doctest::Approx(1.44625).epsilon(1e-12));
  CHECK(std::abs(b.overall - 1.44) < 0.01);
}

TEST_CASE("score aggregation is affine with unit weights") {
  // Equal scores pass through unchanged because the weights sum to 1.
  for (double s : {0.0, 1.0, 3.7, 5.0}) {
    judge::JudgeScores eq{s, s, s, s, s, s};
    auto a = judge::aggregate_scores(eq);
    CHECK(a.overall_text == doctest::Approx(s).epsilon(1e-12));
    CHECK(a.overall == doctest::Approx(s).epsilon(1e-12));
  }

  // Scaling every input scales both outputs.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 2.5);
  for (int t = 0; t < 50; ++t) {
    judge::JudgeScores s{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    judge::JudgeScores doubled{2 * s.mask,     2 * s.type,   2 * s.areas,
                               2 * s.tampered, 2 * s.visual, 2 * s.summary};
    auto a = judge::aggregate_scores(s);
    auto b = judge::aggregate_scores(doubled);
    CHECK(b.overall_text == doctest::Approx(2 * a.overall_text).epsilon(1e-12));
    CHECK(b.overall == doctest::Approx(2 * a.overall).epsilon(1e-12));
    CHECK(a.overall >= 0.0);
    CHECK(a.overall <= 5.0);
  }
}

TEST_CASE("user study tally reproduces the published proportions") {
  using judge::Vote;
  std::vector<Vote> votes;
  votes.insert(votes.end(), 652, Vote::A);
  votes.insert(votes.end(), 113, Vote::B);
  votes.insert(votes.end(), 126, Vote::Neither);
  votes.insert(votes.end(), 109, Vote::Tie);
  auto t = judge::tally_user_study(votes);
  CHECK(t[0] == doctest::Approx(0.652).epsilon(1e-12));
  CHECK(t[1] == doctest::Approx(0.113).epsilon(1e-12));
  CHECK(t[2] == doctest::Approx(0.126).epsilon(1e-12));
  CHECK(t[3] == doctest::Approx(0.109).epsilon(1e-12));
  CHECK(std::abs(t[0] + t[1] + t[2] + t[3] - 1.0) < 1e-9);

  auto all_a = judge::tally_user_study({Vote::A, Vote::A});
  CHECK(all_a == std::array<double, 4>{1.0, 0.0, 0.0, 0.0});

  auto even = judge::tally_user_study(
      {Vote::A, Vote::B, Vote::Neither, Vote::Tie});
  for (double v : even) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_AS(judge::tally_user_study({}), std::invalid_argument);
}

TEST_CASE("mock judge is deterministic and favours faithful outputs") {
  judge::MockJudgeClient mock;
  auto req = sample_request();
  auto payload = judge::build_judge_prompt(req);
  std::string r1 = mock.evaluate(payload);
  std::string r2 = mock.evaluate(payload);
  CHECK(r1 == r2);

  auto s = judge::parse_judge_response(r1);
  // Candidate A carries the exact GT mask and an on-topic explanation;
  // candidate B claims nothing happened. A must dominate the mask score.
  CHECK(s.mask > 2.5);
  for (double v : {s.mask, s.type, s.areas, s.tampered, s.visual, s.summary}) {
    CHECK(v >= 0.0);
    CHECK(v <= 5.0);
  }
}

TEST_CASE("base64 round-trips binary payloads") {
  std::vector<uint8_t> bytes = {0, 1, 2, 250, 255, 128, 7};
  auto text = judge::base64_encode(bytes);
  CHECK(judge::base64_decode(text) == bytes);

  // RFC test vectors.
  CHECK(judge::base64_encode({'f'}) == "Zg==");
  CHECK(judge::base64_encode({'f', 'o'}) == "Zm8=");
  CHECK(judge::base64_encode({'f', 'o', 'o'}) == "Zm9v");
  CHECK(judge::base64_decode("").empty());

  // Property: round trip over random buffers of awkward lengths.
  std::mt19937_64 rng(11);
  for (int len : {1, 2, 3, 4, 5, 61, 62, 63, 64}) {
    std::vector<uint8_t> buf(len);
    for (auto& b : buf) b = static_cast<uint8_t>(rng());
    CHECK(judge::base64_decode(judge::base64_encode(buf)) == buf);
  }
}
