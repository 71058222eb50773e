#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "ifdl/image.hpp"

#include "json.hpp"

namespace ifdl::judge {

struct DecodingParams {
  double temperature = 0.7;
  double top_p = 0.95;
  int max_tokens = 8000;
};

struct JudgeRequest {
  ImageTensor tampered_image;
  BinaryMask gt_mask;
  BinaryMask predicted_mask_a;
  BinaryMask predicted_mask_b;
  std::string explanation_a;
  std::string explanation_b;
  std::string gt_rationale;
  DecodingParams decoding;
};

// Six per-dimension scores in [0,5].
struct JudgeScores {
  double mask = 0.0;
  double type = 0.0;
  double areas = 0.0;
  double tampered = 0.0;
  double visual = 0.0;
  double summary = 0.0;
};

struct AggregateScores {
  double overall_text = 0.0;  // 0.05 t + 0.35 a + 0.40 ta + 0.15 v + 0.05 s
  double overall = 0.0;       // 0.5 mask + 0.5 overall_text
};

// Deterministic provider payload: fixed rubric text, the five attachments
// base64-encoded in a stable order, decoding params, and a demand for a
// structured six-field numeric response.
nlohmann::ordered_json build_judge_prompt(const JudgeRequest& request);

// Extracts the six numeric fields from a judge response. The response may
// wrap the JSON object in prose. Out-of-range or missing fields are errors.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::string raw)
      : std::runtime_error(what), raw_response(std::move(raw)) {}
  std::string raw_response;
  bool retriable = true;
};
JudgeScores parse_judge_response(const std::string& text);

AggregateScores aggregate_scores(const JudgeScores& scores);

enum class Vote { A, B, Neither, Tie };

// Proportions (A, B, Neither, Tie), summing to 1 within 1e-9.
std::array<double, 4> tally_user_study(const std::vector<Vote>& votes);

// ---- providers ----

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  // Takes the payload from build_judge_prompt, returns the raw response
  // text. Throws on transport failure.
  virtual std::string evaluate(const nlohmann::ordered_json& payload) = 0;
  virtual std::string name() const = 0;
};

// Offline deterministic judge: scores mask fidelity by IoU against the GT
// mask and each text dimension by token overlap with the reference
// rationale, then emits a well-formed six-field JSON response.
class MockJudgeClient : public JudgeClient {
 public:
  std::string evaluate(const nlohmann::ordered_json& payload) override;
  std::string name() const override { return "mock"; }
};

struct HttpJudgeConfig {
  std::string endpoint;      // e.g. http://host:port/v1/judge
  std::string model;
  std::string credential_env = "IFDL_JUDGE_API_KEY";
  int timeout_seconds = 60;
};

// POSTs the payload as JSON with a bearer credential read from the
// configured environment variable.
class HttpJudgeClient : public JudgeClient {
 public:
  explicit HttpJudgeClient(HttpJudgeConfig config);
  std::string evaluate(const nlohmann::ordered_json& payload) override;
  std::string name() const override { return "http"; }

 private:
  HttpJudgeConfig config_;
};

std::string base64_encode(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> base64_decode(const std::string& text);

}  // namespace ifdl::judge
