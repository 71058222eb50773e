// Python bindings for the core operations: the synthetic corpus generator,
// the stage-1 model, localization/text metrics, the judge aggregation
// rules, and the learning-rate schedule.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "ifdl/data.hpp"
#include "ifdl/image.hpp"
#include "ifdl/judge.hpp"
#include "ifdl/metrics.hpp"
#include "ifdl/model.hpp"
#include "ifdl/stage2.hpp"
#include "ifdl/train.hpp"

namespace py = pybind11;
using namespace ifdl;

namespace {

BinaryMask mask_from_rows(const std::vector<std::vector<int>>& rows) {
  if (rows.empty() || rows[0].empty())
    throw std::invalid_argument("mask rows must be non-empty");
  BinaryMask m(static_cast<int>(rows.size()),
               static_cast<int>(rows[0].size()));
  for (size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != rows[0].size())
      throw std::invalid_argument("ragged mask rows");
    for (size_t x = 0; x < rows[y].size(); ++x)
      m.set(static_cast<int>(y), static_cast<int>(x), rows[y][x] != 0);
  }
  return m;
}

std::vector<std::vector<int>> mask_to_rows(const BinaryMask& m) {
  std::vector<std::vector<int>> rows(m.height, std::vector<int>(m.width));
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) rows[y][x] = m.at(y, x) ? 1 : 0;
  return rows;
}

metrics::MorphOp morph_from_string(const std::string& op) {
  if (op == "dilate") return metrics::MorphOp::Dilate;
  if (op == "erode") return metrics::MorphOp::Erode;
  throw std::invalid_argument("morph op must be 'dilate' or 'erode'");
}

}  // namespace

PYBIND11_MODULE(_ifdl, m) {
  m.doc() = "forgery detection/localization pipeline core";

  // ---- masks and localization metrics ----
  m.def("pixel_iou",
        [](const std::vector<std::vector<int>>& pred,
           const std::vector<std::vector<int>>& gt) {
          return metrics::pixel_iou(mask_from_rows(pred), mask_from_rows(gt));
        },
        py::arg("pred"), py::arg("gt"),
        "Intersection over union of two 0/1 masks given as row lists.");
  m.def("pixel_f1",
        [](const std::vector<std::vector<int>>& pred,
           const std::vector<std::vector<int>>& gt) {
          return metrics::pixel_f1(mask_from_rows(pred), mask_from_rows(gt));
        },
        py::arg("pred"), py::arg("gt"));
  m.def("pixel_auc",
        [](const std::vector<double>& probs,
           const std::vector<std::vector<int>>& gt)
            -> std::optional<double> {
          return metrics::pixel_auc(probs, mask_from_rows(gt));
        },
        py::arg("probs"), py::arg("gt"),
        "Rank AUC with half-credit ties; None when gt is single-class.");
  m.def("perturb_mask",
        [](const std::vector<std::vector<int>>& mask, const std::string& op,
           int radius) {
          return mask_to_rows(
              metrics::perturb_mask(mask_from_rows(mask),
                                    morph_from_string(op), radius));
        },
        py::arg("mask"), py::arg("op"), py::arg("radius"),
        "Morphological dilation/erosion with a square structuring element.");

  // ---- text metrics ----
  m.def("tokenize", &metrics::tokenize, py::arg("text"));
  m.def("bleu1", &metrics::bleu1, py::arg("candidate"), py::arg("reference"));
  m.def("rouge_l", &metrics::rouge_l, py::arg("candidate"),
        py::arg("reference"));
  m.def("cider",
        [](const std::vector<std::vector<std::string>>& cands,
           const std::vector<std::vector<std::string>>& refs) {
          auto r = metrics::cider(cands, refs);
          return py::make_tuple(r.per_sample, r.mean);
        },
        py::arg("candidates"), py::arg("references"),
        "Returns (per_sample, mean).");
  m.def("weighted_css",
        [](const std::array<double, 5>& sections) {
          return metrics::weighted_css(sections);
        },
        py::arg("sections"),
        "Fixed-weight aggregation of the five per-section similarities.");
  m.def("css",
        [](const std::vector<std::string>& pred,
           const std::vector<std::string>& gt) {
          if (pred.size() != 5 || gt.size() != 5)
            throw std::invalid_argument("expected five sections per side");
          data::ExplanationSections p{pred[0], pred[1], pred[2], pred[3],
                                      pred[4]};
          data::ExplanationSections g{gt[0], gt[1], gt[2], gt[3], gt[4]};
          metrics::HashingEmbedder emb;
          auto s = metrics::css_sections(p, g, emb);
          py::dict out;
          out["type"] = s.type;
          out["areas"] = s.areas;
          out["tampered_content"] = s.tampered_content;
          out["visual_inconsistencies"] = s.visual_inconsistencies;
          out["summary"] = s.summary;
          out["weighted"] = s.weighted;
          return out;
        },
        py::arg("pred_sections"), py::arg("gt_sections"),
        "Per-section cosine similarity of two five-section explanations.");

  // ---- judge protocol ----
  m.def("aggregate_judge_scores",
        [](double mask, double type, double areas, double tampered,
           double visual, double summary) {
          judge::JudgeScores s{mask, type, areas, tampered, visual, summary};
          auto a = judge::aggregate_scores(s);
          return py::make_tuple(a.overall_text, a.overall);
        },
        py::arg("mask"), py::arg("type"), py::arg("areas"),
        py::arg("tampered"), py::arg("visual"), py::arg("summary"),
        "Returns (overall_text, overall) under the fixed dimension weights.");
  m.def("parse_judge_response",
        [](const std::string& text) {
          auto s = judge::parse_judge_response(text);
          py::dict out;
          out["mask"] = s.mask;
          out["type"] = s.type;
          out["areas"] = s.areas;
          out["tampered"] = s.tampered;
          out["visual"] = s.visual;
          out["summary"] = s.summary;
          return out;
        },
        py::arg("text"));

  // ---- schedule ----
  m.def("lr_at",
        [](long step, double peak, long warmup_steps, long total_steps) {
          train::ScheduleConfig s;
          s.warmup_steps = warmup_steps;
          s.total_steps = total_steps;
          return train::lr_at(step, peak, s);
        },
        py::arg("step"), py::arg("peak"), py::arg("warmup_steps"),
        py::arg("total_steps"),
        "Linear warmup to peak, then linear decay to zero.");

  // ---- corpus generation ----
  m.def("generate_fixture",
        [](const std::filesystem::path& out_dir, uint64_t seed, int image_size,
           int count_real, int count_full_synthetic, int count_tampered,
           int min_shape, int max_shape) {
          data::FixtureConfig cfg;
          cfg.image_size = image_size;
          cfg.count_real = count_real;
          cfg.count_full_synthetic = count_full_synthetic;
          cfg.count_tampered = count_tampered;
          cfg.min_shape = min_shape;
          cfg.max_shape = max_shape;
          auto man = data::generate_fixture(cfg, seed, out_dir);
          return man.records.size();
        },
        py::arg("out_dir"), py::arg("seed") = 11, py::arg("image_size") = 64,
        py::arg("count_real") = 120, py::arg("count_full_synthetic") = 120,
        py::arg("count_tampered") = 120, py::arg("min_shape") = 20,
        py::arg("max_shape") = 36,
        "Writes the synthetic corpus and returns the number of records.");

  // ---- stage-1 model ----
  py::class_<model::Stage1Model>(m, "Stage1Model")
      .def(py::init([](int image_size, int patch_size, int embed_dim,
                       int depth, int heads, int prompt_dim, int prompt_heads,
                       int feature_channels, int dec_heads, int refine_blocks,
                       int up_channels, uint64_t seed) {
             auto mm = std::make_unique<model::Stage1Model>();
             mm->enc.image_size = image_size;
             mm->enc.patch_size = patch_size;
             mm->enc.embed_dim = embed_dim;
             mm->enc.depth = depth;
             mm->enc.heads = heads;
             mm->prompt.token_dim = embed_dim;
             mm->prompt.prompt_dim = prompt_dim;
             mm->prompt.heads = prompt_heads;
             mm->dec.image_size = image_size;
             mm->dec.feature_channels = feature_channels;
             mm->dec.prompt_dim = prompt_dim;
             mm->dec.heads = dec_heads;
             mm->dec.refine_blocks = refine_blocks;
             mm->dec.up_channels = up_channels;
             mm->init(seed);
             return mm;
           }),
           py::arg("image_size") = 64, py::arg("patch_size") = 8,
           py::arg("embed_dim") = 64, py::arg("depth") = 2,
           py::arg("heads") = 4, py::arg("prompt_dim") = 256,
           py::arg("prompt_heads") = 4, py::arg("feature_channels") = 64,
           py::arg("dec_heads") = 4, py::arg("refine_blocks") = 2,
           py::arg("up_channels") = 32, py::arg("seed") = 11)
      .def("load",
           [](model::Stage1Model& self, const std::filesystem::path& ckpt) {
             self.store.load(ckpt);
           },
           py::arg("checkpoint"))
      .def("predict_class_file",
           [](const model::Stage1Model& self,
              const std::filesystem::path& image_png) {
             data::SampleRecord rec;
             rec.image_path = image_png;
             return self.predict_class(data::load_image(rec));
           },
           py::arg("image_png"),
           "0 = real, 1 = fully synthetic, 2 = tampered.")
      .def("predict_mask_file",
           [](const model::Stage1Model& self,
              const std::filesystem::path& image_png, double threshold) {
             data::SampleRecord rec;
             rec.image_path = image_png;
             return mask_to_rows(
                 self.predict_mask(data::load_image(rec), threshold));
           },
           py::arg("image_png"), py::arg("threshold") = 0.5);
}
