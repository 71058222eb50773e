#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "ifdl/autograd.hpp"
#include "ifdl/data.hpp"
#include "ifdl/encoder.hpp"
#include "ifdl/params.hpp"

namespace ifdl::stage2 {

enum class MaskSource { GroundTruth, Predicted };

struct BlendConfig {
  double alpha = 0.5;
  MaskSource mask_source = MaskSource::GroundTruth;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw std::invalid_argument("blend alpha must be in [0,1]");
  }
};

// Fixed word-level vocabulary covering the fixture explanation templates
// plus pad/bos/eos and the five section-delimiter tokens.
class Vocabulary {
 public:
  Vocabulary();

  long pad() const { return 0; }
  long bos() const { return 1; }
  long eos() const { return 2; }
  long size() const { return static_cast<long>(words_.size()); }

  long token(const std::string& word) const;
  const std::string& word(long token) const;
  bool contains(const std::string& word) const;

  // Section delimiter token for section index 0..4.
  long section_marker(int section) const;

  // <type> w.. <areas> w.. <tampered_content> w.. <visual_inconsistencies>
  // w.. <summary> w.. eos
  std::vector<long> encode_explanation(
      const data::ExplanationSections& e) const;
  data::ExplanationSections decode_explanation(
      const std::vector<long>& tokens) const;

 private:
  std::vector<std::string> words_;
  std::map<std::string, long> index_;
};

struct LanguageHeadConfig {
  int vocab_size = 64;
  int context = 64;     // maximum text tokens
  int dim = 64;
  int depth = 2;
  int heads = 4;
  int visual_dim = 64;  // width of incoming visual tokens
  int max_prefix = 66;  // class token + patch tokens

  void validate() const;
};

// Blended visual prefix: patch-token blend per the region-aware rule plus
// the unblended class token of the full-image encoding.
struct VisualTokens {
  ag::Var cls;     // 1xD
  ag::Var tokens;  // N'xD
};

// T_vis = alpha * enc(x) + (1 - alpha) * enc(x .* M), patch tokens only.
// The mask gates pixels to zero before encoding; both passes use the same
// (frozen) encoder parameters. alpha may be a 1x1 variable so its gradient
// can be checked.
VisualTokens region_enhance(const ImageTensor& image, const BinaryMask& mask,
                            const ag::Var& alpha,
                            const encoder::EncoderConfig& enc_config,
                            const ParamStore& store);
VisualTokens region_enhance(const ImageTensor& image, const BinaryMask& mask,
                            double alpha,
                            const encoder::EncoderConfig& enc_config,
                            const ParamStore& store);

void add_params(ParamStore& store, const LanguageHeadConfig& config,
                std::mt19937_64& rng);

// Teacher-forced logits for the text positions: input ids (bos + shifted
// targets) conditioned on the visual prefix. Returns T x V.
ag::Var lm_logits(const VisualTokens& visual, const std::vector<long>& ids,
                  const LanguageHeadConfig& config, const ParamStore& store);

// Greedy decoding from [bos] until eos or the context limit. Deterministic.
std::vector<long> generate_explanation(const VisualTokens& visual,
                                       const LanguageHeadConfig& config,
                                       const ParamStore& store);

// a.b / (|a||b|); zero vectors are an error.
double feature_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Sequence CE of teacher-forced predictions for one sample.
ag::Var stage2_sample_loss(const VisualTokens& visual,
                           const std::vector<long>& target_tokens,
                           const LanguageHeadConfig& config,
                           const ParamStore& store);

}  // namespace ifdl::stage2
