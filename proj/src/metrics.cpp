#include "ifdl/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace ifdl::metrics {

namespace {
void check_dims(const BinaryMask& a, const BinaryMask& b, const char* op) {
  if (a.height != b.height || a.width != b.width)
    throw std::invalid_argument(std::string(op) + ": mask dims differ");
}
}  // namespace

double pixel_iou(const BinaryMask& pred, const BinaryMask& gt) {
  check_dims(pred, gt, "pixel_iou");
  long inter = 0, uni = 0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    const bool p = pred.values[i], g = gt.values[i];
    inter += p && g;
    uni += p || g;
  }
  if (uni == 0) return 1.0;  // both empty
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double pixel_f1(const BinaryMask& pred, const BinaryMask& gt) {
  check_dims(pred, gt, "pixel_f1");
  long inter = 0;
  for (size_t i = 0; i < pred.values.size(); ++i)
    inter += pred.values[i] && gt.values[i];
  const long denom = pred.count() + gt.count();
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(denom);
}

std::optional<double> pixel_auc(const std::vector<double>& probs,
                                const BinaryMask& gt) {
  if (probs.size() != gt.values.size())
    throw std::invalid_argument("pixel_auc: score/mask size mismatch");
  const long npos = gt.count();
  const long nneg = static_cast<long>(gt.values.size()) - npos;
  if (npos == 0 || nneg == 0) return std::nullopt;

  // Rank statistic: AUC = (sum of positive ranks - npos(npos+1)/2) /
  // (npos*nneg), with midranks for ties.
  std::vector<size_t> order(probs.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return probs[a] < probs[b]; });
  std::vector<double> rank(probs.size());
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && probs[order[j + 1]] == probs[order[i]]) ++j;
    const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 +
                       1.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double pos_rank_sum = 0.0;
  for (size_t k = 0; k < probs.size(); ++k)
    if (gt.values[k]) pos_rank_sum += rank[k];
  const double np = static_cast<double>(npos), nn = static_cast<double>(nneg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

DetectionReport detection_scores(const std::vector<data::Label>& preds,
                                 const std::vector<data::Label>& labels) {
  if (preds.size() != labels.size() || preds.empty())
    throw std::invalid_argument(
        "detection_scores: inputs must be nonempty and equal length");
  DetectionReport report;
  const double n = static_cast<double>(labels.size());
  double acc_sum = 0.0, f1_sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    const auto cls = static_cast<data::Label>(c);
    long tp = 0, tn = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
      const bool p = preds[i] == cls, g = labels[i] == cls;
      tp += p && g;
      tn += !p && !g;
      fp += p && !g;
      fn += !p && g;
    }
    ClassScores s;
    s.accuracy = static_cast<double>(tp + tn) / n;
    if (tp + fp + fn == 0) {
      s.f1 = 1.0;  // class never involved
      s.degenerate = true;
    } else {
      s.f1 = 2.0 * static_cast<double>(tp) /
             static_cast<double>(2 * tp + fp + fn);
      s.degenerate = (tp + fn == 0);  // absent from labels but predicted
    }
    acc_sum += s.accuracy;
    f1_sum += s.f1;
    report.per_class[cls] = s;
  }
  report.overall_accuracy = acc_sum / 3.0;
  report.overall_f1 = f1_sum / 3.0;
  return report;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      cur += static_cast<char>(std::tolower(ch));
    } else if (std::isspace(ch) || std::ispunct(ch)) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double bleu1(const std::vector<std::string>& candidate,
             const std::vector<std::string>& reference) {
  if (reference.empty())
    throw std::invalid_argument("bleu1: empty reference");
  if (candidate.empty()) return 0.0;
  std::unordered_map<std::string, long> ref_counts;
  for (const auto& w : reference) ++ref_counts[w];
  std::unordered_map<std::string, long> cand_counts;
  for (const auto& w : candidate) ++cand_counts[w];
  long clipped = 0;
  for (const auto& [w, c] : cand_counts) {
    auto it = ref_counts.find(w);
    if (it != ref_counts.end()) clipped += std::min(c, it->second);
  }
  const double precision =
      static_cast<double>(clipped) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double c = static_cast<double>(candidate.size());
  const double bp = std::exp(std::min(0.0, 1.0 - r / c));
  return precision * bp;
}

double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const size_t n = candidate.size(), m = reference.size();
  std::vector<std::vector<long>> lcs(n + 1, std::vector<long>(m + 1, 0));
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j)
      lcs[i][j] = candidate[i - 1] == reference[j - 1]
                      ? lcs[i - 1][j - 1] + 1
                      : std::max(lcs[i - 1][j], lcs[i][j - 1]);
  const double l = static_cast<double>(lcs[n][m]);
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(n);
  const double r = l / static_cast<double>(m);
  const double beta2 = 1.2 * 1.2;
  return (1.0 + beta2) * p * r / (r + beta2 * p);
}

namespace {

std::unordered_map<std::string, double> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::unordered_map<std::string, double> out;
  if (static_cast<int>(tokens.size()) < n) return out;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (int k = 0; k < n; ++k) {
      if (k) key += '\x1f';
      key += tokens[i + k];
    }
    out[key] += 1.0;
  }
  return out;
}

}  // namespace

CiderResult cider(const std::vector<std::vector<std::string>>& candidates,
                  const std::vector<std::vector<std::string>>& references) {
  if (candidates.size() != references.size())
    throw std::invalid_argument("cider: corpus size mismatch");
  CiderResult result;
  const double ndocs = static_cast<double>(references.size());
  for (int n = 1; n <= 4; ++n) {
    // Document frequency over the reference corpus.
    std::unordered_map<std::string, double> df;
    std::vector<std::unordered_map<std::string, double>> ref_tf;
    std::vector<std::unordered_map<std::string, double>> cand_tf;
    for (size_t d = 0; d < references.size(); ++d) {
      ref_tf.push_back(ngram_counts(references[d], n));
      cand_tf.push_back(ngram_counts(candidates[d], n));
      for (const auto& [g, _] : ref_tf.back()) df[g] += 1.0;
    }
    if (result.per_sample.empty())
      result.per_sample.assign(references.size(), 0.0);
    for (size_t d = 0; d < references.size(); ++d) {
      auto weight = [&](const std::unordered_map<std::string, double>& tf) {
        std::unordered_map<std::string, double> v;
        for (const auto& [g, c] : tf) {
          auto it = df.find(g);
          const double idf =
              std::log(ndocs / (it == df.end() ? 1.0 : it->second));
          v[g] = c * idf;
        }
        return v;
      };
      auto cv = weight(cand_tf[d]);
      auto rv = weight(ref_tf[d]);
      double dot = 0.0, nc = 0.0, nr = 0.0;
      for (const auto& [g, w] : cv) {
        nc += w * w;
        auto it = rv.find(g);
        if (it != rv.end()) dot += w * it->second;
      }
      for (const auto& [g, w] : rv) nr += w * w;
      const double denom = std::sqrt(nc) * std::sqrt(nr);
      const double cos = denom > 0.0 ? dot / denom : 0.0;
      result.per_sample[d] += 10.0 * cos / 4.0;
    }
  }
  if (!result.per_sample.empty())
    result.mean = std::accumulate(result.per_sample.begin(),
                                  result.per_sample.end(), 0.0) /
                  static_cast<double>(result.per_sample.size());
  return result;
}

Eigen::VectorXd HashingEmbedder::embed(const std::string& text) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  for (const auto& tok : tokenize(text)) {
    // FNV-1a with a fixed seed; low bit picks the sign, the rest the bucket.
    uint64_t h = 0xcbf29ce484222325ULL ^ 0x9e3779b97f4a7c15ULL;
    for (unsigned char c : tok) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    const int bucket = static_cast<int>((h >> 1) % static_cast<uint64_t>(dim_));
    v[bucket] += (h & 1) ? 1.0 : -1.0;
  }
  return v;
}

double weighted_css(const std::array<double, 5>& sections) {
  double w = 0.0;
  for (int i = 0; i < 5; ++i) w += kSectionWeights[i] * sections[i];
  return w;
}

SectionScores css_sections(const data::ExplanationSections& pred,
                           const data::ExplanationSections& gt,
                           const TextEmbedder& embedder) {
  const std::string* ps[5] = {&pred.type, &pred.areas, &pred.tampered_content,
                              &pred.visual_inconsistencies, &pred.summary};
  const std::string* gs[5] = {&gt.type, &gt.areas, &gt.tampered_content,
                              &gt.visual_inconsistencies, &gt.summary};
  std::array<double, 5> scores{};
  for (int i = 0; i < 5; ++i) {
    const bool pe = tokenize(*ps[i]).empty();
    const bool ge = tokenize(*gs[i]).empty();
    if (pe && ge) {
      scores[i] = 1.0;
    } else if (pe || ge) {
      scores[i] = 0.0;
    } else {
      Eigen::VectorXd a = embedder.embed(*ps[i]);
      Eigen::VectorXd b = embedder.embed(*gs[i]);
      const double na = a.norm(), nb = b.norm();
      scores[i] = (na == 0.0 || nb == 0.0) ? 0.0 : a.dot(b) / (na * nb);
    }
  }
  SectionScores out;
  out.type = scores[0];
  out.areas = scores[1];
  out.tampered_content = scores[2];
  out.visual_inconsistencies = scores[3];
  out.summary = scores[4];
  out.weighted = weighted_css(scores);
  return out;
}

BinaryMask perturb_mask(const BinaryMask& mask, MorphOp op, int radius) {
  if (radius < 1) throw std::invalid_argument("perturb_mask: radius must be >= 1");
  BinaryMask out(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      bool acc = op == MorphOp::Erode;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          const int yy = y + dy, xx = x + dx;
          const bool v = yy >= 0 && yy < mask.height && xx >= 0 &&
                         xx < mask.width && mask.at(yy, xx);
          if (op == MorphOp::Dilate)
            acc = acc || v;
          else
            acc = acc && v;
        }
      out.set(y, x, acc);
    }
  return out;
}

}  // namespace ifdl::metrics
