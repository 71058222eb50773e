#include "ifdl/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ifdl/losses.hpp"
#include "ifdl/nn.hpp"

namespace ifdl::stage2 {

namespace {

const char* kSpecials[] = {"<pad>", "<bos>", "<eos>"};
const char* kMarkers[] = {"<type>", "<areas>", "<tampered_content>",
                          "<visual_inconsistencies>", "<summary>"};
const char* kTemplateWords[] = {
    "tampered", "image",      "with",   "a",           "pasted",
    "region",   "the",        "quadrant", "top-left",  "top-right",
    "bottom-left", "bottom-right", "red", "yellow",    "magenta",
    "rectangle", "ellipse",   "does",   "not",         "match",
    "background", "palette",  "was",    "in"};

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) {
    std::transform(w.begin(), w.end(), w.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    out.push_back(w);
  }
  return out;
}

}  // namespace

Vocabulary::Vocabulary() {
  for (const char* w : kSpecials) words_.push_back(w);
  for (const char* w : kMarkers) words_.push_back(w);
  for (const char* w : kTemplateWords) words_.push_back(w);
  for (size_t i = 0; i < words_.size(); ++i)
    index_[words_[i]] = static_cast<long>(i);
}

long Vocabulary::token(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end())
    throw std::out_of_range("word not in fixture vocabulary: " + word);
  return it->second;
}

const std::string& Vocabulary::word(long token) const {
  if (token < 0 || token >= size())
    throw std::out_of_range("token id out of range");
  return words_[token];
}

bool Vocabulary::contains(const std::string& word) const {
  return index_.count(word) != 0;
}

long Vocabulary::section_marker(int section) const {
  if (section < 0 || section > 4)
    throw std::out_of_range("section index out of range");
  return 3 + section;
}

std::vector<long> Vocabulary::encode_explanation(
    const data::ExplanationSections& e) const {
  const std::string* sections[5] = {&e.type, &e.areas, &e.tampered_content,
                                    &e.visual_inconsistencies, &e.summary};
  std::vector<long> out;
  for (int s = 0; s < 5; ++s) {
    out.push_back(section_marker(s));
    for (const auto& w : split_words(*sections[s])) out.push_back(token(w));
  }
  out.push_back(eos());
  return out;
}

data::ExplanationSections Vocabulary::decode_explanation(
    const std::vector<long>& tokens) const {
  std::array<std::string, 5> sections;
  int current = -1;
  for (long t : tokens) {
    if (t == pad() || t == bos()) continue;
    if (t == eos()) break;
    if (t >= 3 && t <= 7) {
      current = static_cast<int>(t - 3);
      continue;
    }
    if (current < 0) continue;  // tokens before the first marker are dropped
    if (!sections[current].empty()) sections[current] += ' ';
    sections[current] += word(t);
  }
  return data::ExplanationSections{sections[0], sections[1], sections[2],
                                   sections[3], sections[4]};
}

void LanguageHeadConfig::validate() const {
  if (vocab_size <= 0 || context <= 0 || dim <= 0 || depth <= 0 || heads <= 0)
    throw std::invalid_argument("language head: dims must be positive");
  if (dim % heads != 0)
    throw std::invalid_argument("language head: heads must divide dim");
  Vocabulary v;
  if (vocab_size < v.size())
    throw std::invalid_argument(
        "language head: vocab_size smaller than the fixture vocabulary");
}

VisualTokens region_enhance(const ImageTensor& image, const BinaryMask& mask,
                            const ag::Var& alpha,
                            const encoder::EncoderConfig& enc_config,
                            const ParamStore& store) {
  if (mask.height != image.height || mask.width != image.width)
    throw std::invalid_argument("region_enhance: mask/image dims differ");
  if (alpha->rows() != 1 || alpha->cols() != 1)
    throw std::invalid_argument("region_enhance: alpha must be scalar");
  const double a = alpha->value(0, 0);
  if (!(a >= 0.0 && a <= 1.0))
    throw std::invalid_argument("region_enhance: alpha must be in [0,1]");

  ImageTensor gated = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (!mask.at(y, x))
        for (int c = 0; c < 3; ++c) gated.at(y, x, c) = 0.0;

  encoder::TokenSequence full = encoder::encode(image, enc_config, store);
  encoder::TokenSequence masked = encoder::encode(gated, enc_config, store);
  ag::Var one_minus = ag::add_scalar(ag::scale(alpha, -1.0), 1.0);
  ag::Var blended = ag::add(ag::scale_by(full.patches, alpha),
                            ag::scale_by(masked.patches, one_minus));
  return VisualTokens{full.cls, blended};
}

VisualTokens region_enhance(const ImageTensor& image, const BinaryMask& mask,
                            double alpha,
                            const encoder::EncoderConfig& enc_config,
                            const ParamStore& store) {
  return region_enhance(image, mask, ag::scalar(alpha), enc_config, store);
}

void add_params(ParamStore& store, const LanguageHeadConfig& config,
                std::mt19937_64& rng) {
  config.validate();
  const long D = config.dim;
  store.create("lm.embed", config.vocab_size, D, rng, 0.02);
  store.create("lm.pos", config.max_prefix + config.context, D, rng, 0.02);
  nn::add_affine_params(store, "lm.adapter", config.visual_dim, D, rng);
  for (int b = 0; b < config.depth; ++b) {
    const std::string bp = "lm.block" + std::to_string(b);
    nn::add_layernorm_params(store, bp + ".ln1", D);
    nn::add_mha_params(store, bp + ".attn", D, D, D, config.heads, rng);
    nn::add_layernorm_params(store, bp + ".ln2", D);
    nn::add_mlp_params(store, bp + ".mlp", D, 4 * D, D, rng);
  }
  nn::add_layernorm_params(store, "lm.ln_f", D);
  nn::add_affine_params(store, "lm.out", D, config.vocab_size, rng);
}

ag::Var lm_logits(const VisualTokens& visual, const std::vector<long>& ids,
                  const LanguageHeadConfig& config, const ParamStore& store) {
  config.validate();
  const long T = static_cast<long>(ids.size());
  if (T == 0) throw std::invalid_argument("lm_logits: empty input");
  if (T > config.context)
    throw std::invalid_argument("lm_logits: context overflow");

  ag::Var prefix = nn::affine(
      store, "lm.adapter", ag::concat_rows({visual.cls, visual.tokens}));
  const long P = prefix->rows();
  if (P > config.max_prefix)
    throw std::invalid_argument("lm_logits: visual prefix too long");
  ag::Var emb = ag::gather_rows(store.at("lm.embed"), ids);
  ag::Var h = ag::concat_rows({prefix, emb});
  h = ag::add(h, ag::slice_rows(store.at("lm.pos"), 0, P + T));
  ag::Mat bias = nn::causal_bias(P + T);
  for (int b = 0; b < config.depth; ++b) {
    const std::string bp = "lm.block" + std::to_string(b);
    ag::Var n1 = nn::layernorm(store, bp + ".ln1", h);
    h = ag::add(h, nn::mha(store, bp + ".attn", n1, n1, config.heads, &bias));
    h = ag::add(h, nn::mlp(store, bp + ".mlp",
                           nn::layernorm(store, bp + ".ln2", h)));
  }
  h = nn::layernorm(store, "lm.ln_f", h);
  return nn::affine(store, "lm.out", ag::slice_rows(h, P, T));
}

std::vector<long> generate_explanation(const VisualTokens& visual,
                                       const LanguageHeadConfig& config,
                                       const ParamStore& store) {
  Vocabulary vocab;
  std::vector<long> ids{vocab.bos()};
  std::vector<long> out;
  while (static_cast<long>(ids.size()) < config.context) {
    ag::Var logits = lm_logits(visual, ids, config, store);
    Eigen::Index best;
    logits->value.row(logits->rows() - 1).maxCoeff(&best);
    if (best == vocab.eos()) break;
    ids.push_back(static_cast<long>(best));
    out.push_back(static_cast<long>(best));
  }
  return out;
}

double feature_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("feature_cosine: dim mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("feature_cosine: zero vector");
  return a.dot(b) / (na * nb);
}

ag::Var stage2_sample_loss(const VisualTokens& visual,
                           const std::vector<long>& target_tokens,
                           const LanguageHeadConfig& config,
                           const ParamStore& store) {
  if (target_tokens.empty())
    throw std::invalid_argument("stage2_sample_loss: empty target");
  Vocabulary vocab;
  std::vector<long> input{vocab.bos()};
  input.insert(input.end(), target_tokens.begin(), target_tokens.end() - 1);
  ag::Var logits = lm_logits(visual, input, config, store);
  return losses::sequence_ce_loss(logits, target_tokens, vocab.pad());
}

}  // namespace ifdl::stage2
