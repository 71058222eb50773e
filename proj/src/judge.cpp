#include "ifdl/judge.hpp"

#include <cmath>
#include <cstdlib>
#include <set>

#include "ifdl/metrics.hpp"

#include "httplib.h"

namespace ifdl::judge {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const char* kRubric =
    "You are scoring two image-forgery analysis systems. You are given a "
    "tampered image, the ground-truth localization mask, two predicted "
    "masks (model A and model B), both models' textual explanations, and a "
    "reference rationale. Score model A on six dimensions, each on a 0-5 "
    "scale: mask (localization fidelity), type (forgery type), areas "
    "(tampered regions), tampered (tampered objects or parts), visual "
    "(consistency of visual evidence), summary (overall summary accuracy). "
    "Respond with a single JSON object containing exactly the numeric "
    "fields mask, type, areas, tampered, visual, summary.";

const char* kDims[6] = {"mask", "type", "areas", "tampered", "visual",
                        "summary"};

}  // namespace

ordered_json build_judge_prompt(const JudgeRequest& request) {
  if (request.tampered_image.height <= 0 || request.tampered_image.width <= 0)
    throw std::invalid_argument("judge request: empty image");
  auto check_mask = [&](const BinaryMask& m, const char* which) {
    if (m.height != request.tampered_image.height ||
        m.width != request.tampered_image.width)
      throw std::invalid_argument(std::string("judge request: ") + which +
                                  " dims differ from image");
  };
  check_mask(request.gt_mask, "gt_mask");
  check_mask(request.predicted_mask_a, "predicted_mask_a");
  check_mask(request.predicted_mask_b, "predicted_mask_b");
  if (request.explanation_a.empty() || request.explanation_b.empty() ||
      request.gt_rationale.empty())
    throw std::invalid_argument("judge request: empty text payload");

  ordered_json payload;
  payload["rubric"] = kRubric;
  payload["decoding"] = {{"temperature", request.decoding.temperature},
                         {"top_p", request.decoding.top_p},
                         {"max_tokens", request.decoding.max_tokens}};
  payload["attachments"] = {
      {"tampered_image",
       base64_encode(png::encode_image(request.tampered_image))},
      {"gt_mask", base64_encode(png::encode_mask(request.gt_mask))},
      {"predicted_mask_a",
       base64_encode(png::encode_mask(request.predicted_mask_a))},
      {"predicted_mask_b",
       base64_encode(png::encode_mask(request.predicted_mask_b))}};
  payload["explanation_a"] = request.explanation_a;
  payload["explanation_b"] = request.explanation_b;
  payload["gt_rationale"] = request.gt_rationale;
  return payload;
}

JudgeScores parse_judge_response(const std::string& text) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw ParseError("judge response carries no JSON object", text);
  json j;
  try {
    j = json::parse(text.substr(open, close - open + 1));
  } catch (const json::exception& e) {
    throw ParseError(std::string("judge response is not valid JSON: ") +
                         e.what(),
                     text);
  }
  double values[6];
  for (int i = 0; i < 6; ++i) {
    if (!j.contains(kDims[i]) || !j[kDims[i]].is_number())
      throw ParseError(std::string("judge response missing field '") +
                           kDims[i] + "'",
                       text);
    values[i] = j[kDims[i]].get<double>();
    if (!(values[i] >= 0.0 && values[i] <= 5.0)) {
      ParseError err(std::string("judge score '") + kDims[i] +
                         "' out of range [0,5]",
                     text);
      err.retriable = false;
      throw err;
    }
  }
  return JudgeScores{values[0], values[1], values[2],
                     values[3], values[4], values[5]};
}

AggregateScores aggregate_scores(const JudgeScores& s) {
  AggregateScores out;
  out.overall_text = 0.05 * s.type + 0.35 * s.areas + 0.40 * s.tampered +
                     0.15 * s.visual + 0.05 * s.summary;
  out.overall = 0.5 * s.mask + 0.5 * out.overall_text;
  return out;
}

std::array<double, 4> tally_user_study(const std::vector<Vote>& votes) {
  if (votes.empty())
    throw std::invalid_argument("tally_user_study: no votes");
  std::array<double, 4> counts{};
  for (Vote v : votes) counts[static_cast<int>(v)] += 1.0;
  const double n = static_cast<double>(votes.size());
  for (double& c : counts) c /= n;
  return counts;
}

std::string MockJudgeClient::evaluate(const ordered_json& payload) {
  const auto& att = payload.at("attachments");
  BinaryMask gt = png::decode_mask(
      base64_decode(att.at("gt_mask").get<std::string>()));
  BinaryMask pred_a = png::decode_mask(
      base64_decode(att.at("predicted_mask_a").get<std::string>()));

  const double mask_score = 5.0 * metrics::pixel_iou(pred_a, gt);

  // Text dimensions: token Jaccard overlap between model A's explanation
  // and the reference rationale, tilted per dimension so the six scores
  // are not all identical.
  auto words = [](const std::string& s) {
    auto toks = metrics::tokenize(s);
    return std::set<std::string>(toks.begin(), toks.end());
  };
  const auto a = words(payload.at("explanation_a").get<std::string>());
  const auto g = words(payload.at("gt_rationale").get<std::string>());
  long inter = 0;
  for (const auto& w : a) inter += g.count(w);
  const long uni = static_cast<long>(a.size() + g.size()) - inter;
  const double overlap =
      uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  const double tilt[5] = {1.0, 0.9, 0.8, 0.85, 0.95};

  ordered_json response;
  response["mask"] = mask_score;
  for (int i = 0; i < 5; ++i)
    response[kDims[i + 1]] = 5.0 * overlap * tilt[i];
  return response.dump();
}

HttpJudgeClient::HttpJudgeClient(HttpJudgeConfig config)
    : config_(std::move(config)) {
  if (config_.endpoint.empty())
    throw std::invalid_argument("http judge: endpoint not configured");
}

std::string HttpJudgeClient::evaluate(const ordered_json& payload) {
  // Split http[s]://host[:port]/path.
  std::string url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw std::invalid_argument("http judge: malformed endpoint");
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin =
      path_start == std::string::npos ? url : url.substr(0, path_start);
  const std::string path =
      path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  client.set_read_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (const char* key = std::getenv(config_.credential_env.c_str()))
    headers.emplace("Authorization", std::string("Bearer ") + key);
  ordered_json body = payload;
  body["model"] = config_.model;
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res)
    throw std::runtime_error("judge request failed: " +
                             httplib::to_string(res.error()));
  if (res->status != 200)
    throw std::runtime_error("judge request returned HTTP " +
                             std::to_string(res->status));
  return res->body;
}

namespace {
const char kB64[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::vector<uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (size_t i = 0; i < bytes.size(); i += 3) {
    uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    if (i + 2 < bytes.size()) v |= bytes[i + 2];
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kB64[(v >> 6) & 63] : '=';
    out += i + 2 < bytes.size() ? kB64[v & 63] : '=';
  }
  return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<uint8_t> out;
  int buffer = 0, bits = 0;
  for (char c : text) {
    if (c == '=' || std::isspace(static_cast<unsigned char>(c))) continue;
    const int v = value(c);
    if (v < 0) throw std::invalid_argument("base64: invalid character");
    buffer = (buffer << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<uint8_t>((buffer >> bits) & 0xff));
    }
  }
  return out;
}

}  // namespace ifdl::judge
