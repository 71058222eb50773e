#pragma once

#include <Eigen/Core>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ifdl/data.hpp"
#include "ifdl/image.hpp"

namespace ifdl::metrics {

// ---- localization ----

// |intersection| / |union|; 1.0 when both masks are empty, 0.0 when
// exactly one is.
double pixel_iou(const BinaryMask& pred, const BinaryMask& gt);
// 2|intersection| / (|pred| + |gt|), same empty conventions.
double pixel_f1(const BinaryMask& pred, const BinaryMask& gt);

// ROC-AUC via the rank statistic with tie correction (ties count half).
// Undefined (nullopt) when gt has a single pixel class.
std::optional<double> pixel_auc(const std::vector<double>& probs,
                                const BinaryMask& gt);

// ---- detection ----

struct ClassScores {
  double accuracy = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // class absent from labels (see detection_scores)
};

struct DetectionReport {
  std::map<data::Label, ClassScores> per_class;
  double overall_accuracy = 0.0;  // unweighted mean over the 3 classes
  double overall_f1 = 0.0;
};

// Per-class one-vs-rest accuracy and F1. A class absent from the labels
// gets F1 = 0 if it was ever predicted, 1 if never involved; either way it
// is flagged degenerate.
DetectionReport detection_scores(const std::vector<data::Label>& preds,
                                 const std::vector<data::Label>& labels);

// ---- text ----

// Lowercase, strip punctuation, split on whitespace.
std::vector<std::string> tokenize(const std::string& text);

// Clipped unigram precision times brevity penalty exp(min(0, 1 - r/c)).
double bleu1(const std::vector<std::string>& candidate,
             const std::vector<std::string>& reference);

// LCS F-measure with beta = 1.2.
double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference);

// Plain CIDEr: mean over n = 1..4 of 10 x cosine of TF-IDF n-gram vectors,
// IDF from the reference corpus. Single-document corpora yield all-zero
// IDF and therefore zero scores.
struct CiderResult {
  std::vector<double> per_sample;
  double mean = 0.0;
};
CiderResult cider(const std::vector<std::vector<std::string>>& candidates,
                  const std::vector<std::vector<std::string>>& references);

// ---- semantic similarity ----

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual Eigen::VectorXd embed(const std::string& text) const = 0;
  virtual std::string name() const = 0;
};

// Deterministic offline embedder: 512-d feature-hashing bag of words with a
// fixed hash seed. A real sentence-embedding provider plugs in behind the
// same interface.
class HashingEmbedder : public TextEmbedder {
 public:
  explicit HashingEmbedder(int dim = 512) : dim_(dim) {}
  Eigen::VectorXd embed(const std::string& text) const override;
  std::string name() const override { return "hashing-bow-512"; }

 private:
  int dim_;
};

inline constexpr std::array<double, 5> kSectionWeights = {0.05, 0.35, 0.40,
                                                          0.15, 0.05};

struct SectionScores {
  double type = 0.0;
  double areas = 0.0;
  double tampered_content = 0.0;
  double visual_inconsistencies = 0.0;
  double summary = 0.0;
  double weighted = 0.0;

  std::array<double, 5> as_array() const {
    return {type, areas, tampered_content, visual_inconsistencies, summary};
  }
};

double weighted_css(const std::array<double, 5>& sections);

// Per-section cosine of embeddings; empty-vs-empty sections score 1.0,
// empty-vs-nonempty 0.0.
SectionScores css_sections(const data::ExplanationSections& pred,
                           const data::ExplanationSections& gt,
                           const TextEmbedder& embedder);

// ---- mask perturbation (boundary robustness study) ----

enum class MorphOp { Dilate, Erode };

// Square structuring element of side 2r+1, zero-padded borders.
BinaryMask perturb_mask(const BinaryMask& mask, MorphOp op, int radius);

}  // namespace ifdl::metrics
