#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "ifdl/data.hpp"
#include "ifdl/judge.hpp"
#include "ifdl/metrics.hpp"
#include "ifdl/model.hpp"
#include "ifdl/report.hpp"
#include "ifdl/runconfig.hpp"
#include "ifdl/stage2.hpp"
#include "ifdl/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ifdl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPartial = 3;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

json load_cfg(const CommonArgs& args) {
  json cfg = cfg::load_run_config(args.config_path, args.overrides);
  std::cout << "effective config:\n" << cfg::render_effective(cfg);
  return cfg;
}

data::FixtureConfig fixture_config(const json& cfg) {
  data::FixtureConfig fc;
  fc.image_size = cfg["fixture"]["image_size"].get<int>();
  fc.count_real = cfg["fixture"]["real_count"].get<int>();
  fc.count_full_synthetic = cfg["fixture"]["synthetic_count"].get<int>();
  fc.count_tampered = cfg["fixture"]["tampered_count"].get<int>();
  fc.min_shape = cfg["fixture"]["min_shape"].get<int>();
  fc.max_shape = cfg["fixture"]["max_shape"].get<int>();
  return fc;
}

train::LoopConfig loop_config(const json& cfg) {
  train::LoopConfig lc;
  const json& t = cfg["train"];
  lc.optimizer.learning_rate = t["lr"].get<double>();
  lc.optimizer.beta1 = t["beta1"].get<double>();
  lc.optimizer.beta2 = t["beta2"].get<double>();
  lc.optimizer.weight_decay = t["weight_decay"].get<double>();
  lc.schedule.warmup_steps = t["warmup_steps"].get<long>();
  lc.schedule.total_steps = t["total_steps"].get<long>();
  lc.steps = t["steps"].get<long>();
  lc.batch = t["batch_size"].get<long>();
  lc.accum = t["accum_steps"].get<long>();
  lc.grad_clip = t["clip_norm"].get<double>();
  lc.seed = cfg["seed"].get<uint64_t>();
  return lc;
}

void apply_model_config(model::Stage1Model& m, const json& cfg) {
  m.enc.image_size = cfg["encoder"]["image_size"].get<int>();
  m.enc.patch_size = cfg["encoder"]["patch_size"].get<int>();
  m.enc.embed_dim = cfg["encoder"]["embed_dim"].get<int>();
  m.enc.depth = cfg["encoder"]["depth"].get<int>();
  m.enc.heads = cfg["encoder"]["heads"].get<int>();
  m.prompt.prompt_dim = cfg["prompt"]["prompt_dim"].get<int>();
  m.prompt.heads = cfg["prompt"]["heads"].get<int>();
  m.dec.image_size = m.enc.image_size;
  m.dec.feature_channels = cfg["mask_decoder"]["feature_channels"].get<int>();
  m.dec.prompt_dim = m.prompt.prompt_dim;
  m.dec.heads = cfg["mask_decoder"]["heads"].get<int>();
  m.dec.refine_blocks = cfg["mask_decoder"]["refine_blocks"].get<int>();
  m.dec.up_channels = cfg["mask_decoder"]["up_channels"].get<int>();
}

void apply_model_config(model::Stage2Model& m, const json& cfg) {
  m.enc.image_size = cfg["encoder"]["image_size"].get<int>();
  m.enc.patch_size = cfg["encoder"]["patch_size"].get<int>();
  m.enc.embed_dim = cfg["encoder"]["embed_dim"].get<int>();
  m.enc.depth = cfg["encoder"]["depth"].get<int>();
  m.enc.heads = cfg["encoder"]["heads"].get<int>();
  m.lm.context = cfg["lm"]["context"].get<int>();
  m.lm.dim = cfg["lm"]["dim"].get<int>();
  m.lm.depth = cfg["lm"]["depth"].get<int>();
  m.lm.heads = cfg["lm"]["heads"].get<int>();
  m.lm.visual_dim = m.enc.embed_dim;
  int patches = (m.enc.image_size / m.enc.patch_size) *
                (m.enc.image_size / m.enc.patch_size);
  m.lm.max_prefix = patches + 1;
}

std::array<data::DatasetManifest, 3> load_splits(const json& cfg) {
  std::string manifest = cfg["data"]["manifest"].get<std::string>();
  if (manifest.empty())
    throw std::invalid_argument("data.manifest is required");
  data::DatasetManifest ds = data::load_manifest(manifest);
  std::array<double, 3> ratios = {cfg["data"]["train_frac"].get<double>(),
                                  cfg["data"]["val_frac"].get<double>(),
                                  cfg["data"]["test_frac"].get<double>()};
  return data::split_dataset(ds, ratios, cfg["data"]["split_seed"].get<uint64_t>());
}

const data::DatasetManifest& pick_split(
    const std::array<data::DatasetManifest, 3>& splits, const std::string& name) {
  if (name == "train") return splits[0];
  if (name == "val") return splits[1];
  if (name == "test") return splits[2];
  throw std::invalid_argument("unknown split: " + name);
}

std::string join_sections(const data::ExplanationSections& e) {
  return e.type + " " + e.areas + " " + e.tampered_content + " " +
         e.visual_inconsistencies + " " + e.summary;
}

// The three content slots of a fixture explanation: the quadrant named in
// "areas" plus the color and shape named in "tampered_content".
std::array<std::string, 3> extract_slots(const data::ExplanationSections& e) {
  auto areas = metrics::tokenize(e.areas);      // the {quadrant} quadrant
  auto tc = metrics::tokenize(e.tampered_content);  // a {color} {shape}
  std::array<std::string, 3> slots = {"", "", ""};
  if (areas.size() >= 2) slots[0] = areas[1];
  if (tc.size() >= 2) slots[1] = tc[1];
  if (tc.size() >= 3) slots[2] = tc[2];
  return slots;
}

double slot_match(const data::ExplanationSections& pred,
                  const data::ExplanationSections& gt) {
  auto p = extract_slots(pred);
  auto g = extract_slots(gt);
  // fixture "areas" tokens: "top-left" tokenizes as "top", "left"
  auto pa = metrics::tokenize(pred.areas);
  auto ga = metrics::tokenize(gt.areas);
  int hit = (pa == ga) ? 1 : 0;
  hit += p[1] == g[1] && !g[1].empty();
  hit += p[2] == g[2] && !g[2].empty();
  return hit / 3.0;
}

struct MorphSpec {
  metrics::MorphOp op;
  int radius;
  std::string key;
};

MorphSpec parse_perturb(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("perturb spec must be op:radius, got " + s);
  std::string op = s.substr(0, colon);
  int radius = std::stoi(s.substr(colon + 1));
  if (radius < 1) throw std::invalid_argument("perturb radius must be >= 1");
  if (op == "dilate") return {metrics::MorphOp::Dilate, radius, s};
  if (op == "erode") return {metrics::MorphOp::Erode, radius, s};
  throw std::invalid_argument("unknown perturb op: " + op);
}

// ---- commands ----

int cmd_fixture(const CommonArgs& args) {
  json cfg = load_cfg(args);
  fs::path out = cfg["fixture"]["out_dir"].get<std::string>();
  data::DatasetManifest m =
      data::generate_fixture(fixture_config(cfg), cfg["seed"].get<uint64_t>(), out);
  std::cout << "fixture: " << m.records.size() << " samples under " << out
            << "\n";
  return kExitOk;
}

int cmd_train_stage1(const CommonArgs& args, bool resume) {
  json cfg = load_cfg(args);
  auto splits = load_splits(cfg);
  model::Stage1Model m;
  apply_model_config(m, cfg);
  m.init(cfg["seed"].get<uint64_t>());
  fs::path out = cfg["out_dir"].get<std::string>();
  train::TrainState st = train::train_stage1(splits[0], m, loop_config(cfg), out, resume);
  std::cout << "stage1: " << st.step << " steps, final loss "
            << (st.history.empty() ? 0.0 : st.history.back().total) << "\n";
  return kExitOk;
}

int cmd_train_stage2(const CommonArgs& args, bool resume) {
  json cfg = load_cfg(args);
  auto splits = load_splits(cfg);
  std::string s1 = cfg["train"]["stage1_checkpoint"].get<std::string>();
  if (s1.empty())
    throw std::invalid_argument("train.stage1_checkpoint is required for stage 2");
  model::Stage2Model m;
  apply_model_config(m, cfg);
  m.init(cfg["seed"].get<uint64_t>(), s1);
  train::Stage2LoopConfig lc;
  static_cast<train::LoopConfig&>(lc) = loop_config(cfg);
  lc.alpha = cfg["blend"]["alpha"].get<double>();
  fs::path out = cfg["out_dir"].get<std::string>();
  train::TrainState st = train::train_stage2(splits[0], m, lc, out, resume);
  std::cout << "stage2: " << st.step << " steps, final loss "
            << (st.history.empty() ? 0.0 : st.history.back().total) << "\n";
  return kExitOk;
}

struct SampleEval {
  std::string id;
  data::Label label;
  data::Label pred_label;
  bool has_localization = false;
  double iou = 0.0, f1 = 0.0;
  std::optional<double> auc;
  bool has_text = false;
  json text;  // per-sample text metrics
};

int cmd_eval(const CommonArgs& args, const std::vector<std::string>& perturbs,
             bool alpha_sweep) {
  json cfg = load_cfg(args);
  auto splits = load_splits(cfg);
  const data::DatasetManifest& split =
      pick_split(splits, cfg["eval"]["split"].get<std::string>());
  if (split.records.empty()) throw std::invalid_argument("empty eval split");

  std::string ckpt = cfg["eval"]["checkpoint"].get<std::string>();
  std::string ckpt2 = cfg["eval"]["stage2_checkpoint"].get<std::string>();
  bool oracle = ckpt.empty();  // predictions copied from ground truth
  double threshold = cfg["eval"]["mask_threshold"].get<double>();
  double alpha = cfg["blend"]["alpha"].get<double>();
  std::string mask_source = cfg["blend"]["mask_source"].get<std::string>();
  if (mask_source != "ground_truth" && mask_source != "predicted")
    throw std::invalid_argument("blend.mask_source must be ground_truth or predicted");
  if (mask_source == "predicted" && oracle && !ckpt2.empty())
    throw std::invalid_argument(
        "blend.mask_source=predicted needs eval.checkpoint (a stage-1 checkpoint)");

  model::Stage1Model m1;
  if (!oracle) {
    apply_model_config(m1, cfg);
    m1.init(cfg["seed"].get<uint64_t>());
    m1.store.load(ckpt);
  }
  model::Stage2Model m2;
  bool gen_text = !ckpt2.empty();
  if (gen_text) {
    apply_model_config(m2, cfg);
    m2.init(cfg["seed"].get<uint64_t>());
    m2.store.load(ckpt2);
  }
  stage2::Vocabulary vocab;

  std::vector<MorphSpec> morphs;
  for (const auto& p : perturbs) morphs.push_back(parse_perturb(p));

  std::vector<data::Label> preds, labels;
  std::vector<SampleEval> per_sample;
  std::vector<std::vector<std::string>> cand_tokens, ref_tokens;
  std::vector<double> slot_accs;
  std::vector<metrics::SectionScores> section_scores;
  metrics::HashingEmbedder embedder;

  struct TextCase {
    size_t record_index;
    BinaryMask pred_mask;
    data::ExplanationSections gt;
  };
  std::vector<TextCase> text_cases;

  for (size_t i = 0; i < split.records.size(); ++i) {
    const auto& rec = split.records[i];
    ImageTensor img = data::load_image(rec);
    BinaryMask gt_mask = data::load_mask(rec, img.height, img.width);

    SampleEval se;
    se.id = rec.id;
    se.label = rec.label;
    se.pred_label =
        oracle ? rec.label : static_cast<data::Label>(m1.predict_class(img));
    preds.push_back(se.pred_label);
    labels.push_back(rec.label);

    BinaryMask pred_mask;
    std::vector<double> probs;
    if (oracle) {
      pred_mask = gt_mask;
      probs.assign(gt_mask.values.begin(), gt_mask.values.end());
    } else {
      auto fwd = m1.forward(img);
      pred_mask = maskdec::binarize(fwd.mask, threshold);
      probs.resize(pred_mask.values.size());
      for (size_t k = 0; k < probs.size(); ++k)
        probs[k] = 1.0 / (1.0 + std::exp(-fwd.mask.flat->value(
                                    static_cast<long>(k), 0)));
    }

    // Fully synthetic images have no defined tamper region; localization
    // metrics skip them.
    if (rec.label != data::Label::FullySynthetic) {
      se.has_localization = true;
      se.iou = metrics::pixel_iou(pred_mask, gt_mask);
      se.f1 = metrics::pixel_f1(pred_mask, gt_mask);
      se.auc = metrics::pixel_auc(probs, gt_mask);
    }

    if (rec.explanation) {
      text_cases.push_back({i, pred_mask, *rec.explanation});
      se.has_text = true;
    }
    per_sample.push_back(std::move(se));
  }

  auto run_text = [&](double a, const std::string& source, int morph_idx) {
    // returns (per-sample sections+metrics, corpus summary)
    std::vector<json> records;
    std::vector<std::vector<std::string>> cands, refs;
    std::vector<metrics::SectionScores> secs;
    std::vector<double> slots;
    for (const auto& tc : text_cases) {
      const auto& rec = split.records[tc.record_index];
      ImageTensor img = data::load_image(rec);
      BinaryMask mask = source == "predicted"
                            ? tc.pred_mask
                            : data::load_mask(rec, img.height, img.width);
      if (morph_idx >= 0)
        mask = metrics::perturb_mask(mask, morphs[morph_idx].op,
                                     morphs[morph_idx].radius);
      data::ExplanationSections pred;
      if (gen_text) {
        auto vis = m2.visual_tokens(img, mask, a);
        pred = vocab.decode_explanation(
            stage2::generate_explanation(vis, m2.lm, m2.store));
      } else {
        pred = tc.gt;  // oracle pass-through
      }
      cands.push_back(metrics::tokenize(join_sections(pred)));
      refs.push_back(metrics::tokenize(join_sections(tc.gt)));
      secs.push_back(metrics::css_sections(pred, tc.gt, embedder));
      slots.push_back(slot_match(pred, tc.gt));
      json r;
      r["id"] = rec.id;
      r["prediction"] = {{"type", pred.type},
                         {"areas", pred.areas},
                         {"tampered_content", pred.tampered_content},
                         {"visual_inconsistencies", pred.visual_inconsistencies},
                         {"summary", pred.summary}};
      r["bleu1"] = metrics::bleu1(cands.back(), refs.back());
      r["rouge_l"] = metrics::rouge_l(cands.back(), refs.back());
      r["css"] = secs.back().weighted;
      r["slot_accuracy"] = slots.back();
      records.push_back(std::move(r));
    }
    json summary;
    if (!records.empty()) {
      auto cid = metrics::cider(cands, refs);
      double b = 0, rl = 0, w = 0, sl = 0;
      metrics::SectionScores mean_secs;
      for (size_t k = 0; k < records.size(); ++k) {
        records[k]["cider"] = cid.per_sample[k];
        b += records[k]["bleu1"].get<double>();
        rl += records[k]["rouge_l"].get<double>();
        w += secs[k].weighted;
        sl += slots[k];
        mean_secs.type += secs[k].type;
        mean_secs.areas += secs[k].areas;
        mean_secs.tampered_content += secs[k].tampered_content;
        mean_secs.visual_inconsistencies += secs[k].visual_inconsistencies;
        mean_secs.summary += secs[k].summary;
      }
      double n = static_cast<double>(records.size());
      summary["bleu1"] = b / n;
      summary["rouge_l"] = rl / n;
      summary["cider"] = cid.mean;
      summary["css"] = w / n;
      summary["slot_accuracy"] = sl / n;
      summary["css_sections"] = {
          {"type", mean_secs.type / n},
          {"areas", mean_secs.areas / n},
          {"tampered_content", mean_secs.tampered_content / n},
          {"visual_inconsistencies", mean_secs.visual_inconsistencies / n},
          {"summary", mean_secs.summary / n}};
    }
    return std::pair<std::vector<json>, json>(std::move(records),
                                              std::move(summary));
  };

  json out;
  out["split"] = cfg["eval"]["split"];
  metrics::DetectionReport det = metrics::detection_scores(preds, labels);
  json det_j;
  for (const auto& [lbl, sc] : det.per_class)
    det_j["per_class"][data::label_to_string(lbl)] = {
        {"accuracy", sc.accuracy}, {"f1", sc.f1}, {"degenerate", sc.degenerate}};
  det_j["macro_accuracy"] = det.overall_accuracy;
  det_j["macro_f1"] = det.overall_f1;
  out["detection"] = det_j;

  double iou = 0, f1 = 0, auc = 0;
  long nloc = 0, nauc = 0;
  for (const auto& se : per_sample) {
    if (!se.has_localization) continue;
    iou += se.iou;
    f1 += se.f1;
    ++nloc;
    if (se.auc) {
      auc += *se.auc;
      ++nauc;
    }
  }
  if (nloc > 0) {
    out["localization"]["iou"] = iou / nloc;
    out["localization"]["f1"] = f1 / nloc;
    if (nauc > 0)
      out["localization"]["auc"] = auc / nauc;
    else
      out["localization"]["auc"] = nullptr;
  }

  auto [clean_records, clean_summary] = run_text(alpha, mask_source, -1);
  if (!clean_summary.is_null()) out["text"] = clean_summary;

  for (size_t mi = 0; mi < morphs.size(); ++mi) {
    auto [recs, summ] = run_text(alpha, mask_source, static_cast<int>(mi));
    (void)recs;
    if (!summ.is_null()) out["perturbed"][morphs[mi].key] = summ;
  }

  if (alpha_sweep) {
    for (double a : {0.0, 0.3, 0.5, 0.7, 1.0}) {
      auto [recs, summ] = run_text(a, mask_source, -1);
      (void)recs;
      if (summ.is_null()) continue;
      summ["alpha"] = a;
      out["alpha_sweep"].push_back(summ);
    }
  }

  fs::path out_dir = cfg["out_dir"].get<std::string>();
  fs::create_directories(out_dir);
  {
    std::ofstream samples(out_dir / "eval_samples.jsonl", std::ios::trunc);
    std::map<std::string, const json*> text_by_id;
    for (const auto& r : clean_records) text_by_id[r["id"]] = &r;
    for (const auto& se : per_sample) {
      json r;
      r["id"] = se.id;
      r["label"] = data::label_to_string(se.label);
      r["pred_label"] = data::label_to_string(se.pred_label);
      if (se.has_localization) {
        r["iou"] = se.iou;
        r["f1"] = se.f1;
        if (se.auc) r["auc"] = *se.auc;
      }
      auto it = text_by_id.find(se.id);
      if (it != text_by_id.end()) r["text"] = *it->second;
      samples << r.dump() << "\n";
    }
  }
  std::ofstream(out_dir / "eval.json", std::ios::trunc) << out.dump(2) << "\n";
  std::cout << "eval written to " << (out_dir / "eval.json") << "\n";
  return kExitOk;
}

int cmd_judge(const CommonArgs& args) {
  json cfg = load_cfg(args);
  auto splits = load_splits(cfg);
  const data::DatasetManifest& split =
      pick_split(splits, cfg["eval"]["split"].get<std::string>());

  std::string ckpt = cfg["eval"]["checkpoint"].get<std::string>();
  std::string ckpt2 = cfg["eval"]["stage2_checkpoint"].get<std::string>();
  bool oracle = ckpt.empty();

  model::Stage1Model m1;
  if (!oracle) {
    apply_model_config(m1, cfg);
    m1.init(cfg["seed"].get<uint64_t>());
    m1.store.load(ckpt);
  }
  model::Stage2Model m2;
  bool gen_text = !ckpt2.empty();
  if (gen_text) {
    apply_model_config(m2, cfg);
    m2.init(cfg["seed"].get<uint64_t>());
    m2.store.load(ckpt2);
  }
  stage2::Vocabulary vocab;
  double alpha = cfg["blend"]["alpha"].get<double>();

  std::unique_ptr<judge::JudgeClient> client;
  std::string provider = cfg["judge"]["provider"].get<std::string>();
  if (provider == "mock") {
    client = std::make_unique<judge::MockJudgeClient>();
  } else if (provider == "http") {
    judge::HttpJudgeConfig hc;
    hc.endpoint = cfg["judge"]["endpoint"].get<std::string>();
    hc.model = cfg["judge"]["model"].get<std::string>();
    hc.credential_env = cfg["judge"]["api_key_env"].get<std::string>();
    client = std::make_unique<judge::HttpJudgeClient>(hc);
  } else {
    throw std::invalid_argument("unknown judge provider: " + provider);
  }

  fs::path out_dir = cfg["out_dir"].get<std::string>();
  fs::path cache_dir = out_dir / "judge_raw";
  fs::create_directories(cache_dir);

  struct Item {
    std::string id;
    nlohmann::ordered_json payload;
  };
  std::vector<Item> items;
  for (const auto& rec : split.records) {
    if (rec.label != data::Label::Tampered || !rec.explanation) continue;
    ImageTensor img = data::load_image(rec);
    BinaryMask gt_mask = data::load_mask(rec, img.height, img.width);

    judge::JudgeRequest req;
    req.tampered_image = img;
    req.gt_mask = gt_mask;
    req.gt_rationale = join_sections(*rec.explanation);
    req.decoding.temperature = cfg["judge"]["temperature"].get<double>();
    req.decoding.top_p = cfg["judge"]["top_p"].get<double>();
    req.decoding.max_tokens = cfg["judge"]["max_tokens"].get<int>();

    req.predicted_mask_a = oracle ? gt_mask : m1.predict_mask(img);
    if (gen_text) {
      auto vis = m2.visual_tokens(img, req.predicted_mask_a, alpha);
      req.explanation_a = join_sections(vocab.decode_explanation(
          stage2::generate_explanation(vis, m2.lm, m2.store)));
    } else {
      req.explanation_a = req.gt_rationale;
    }
    // B: a do-nothing baseline (empty mask, generic denial).
    req.predicted_mask_b = BinaryMask(img.height, img.width);
    req.explanation_b = "no tampering detected";

    items.push_back({rec.id, judge::build_judge_prompt(req)});
  }
  if (items.empty()) throw std::invalid_argument("no judgeable samples in split");

  std::mutex mu;
  std::vector<std::pair<std::string, judge::JudgeScores>> scored;
  std::vector<std::string> failed;
  std::atomic<size_t> next{0};
  int workers = std::max(1, cfg["judge"]["max_in_flight"].get<int>());

  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      const Item& item = items[i];
      fs::path cache = cache_dir / (item.id + ".json");
      std::string last_error;
      bool ok = false;
      for (int attempt = 0; attempt < 3 && !ok; ++attempt) {
        std::string raw;
        try {
          if (attempt == 0 && fs::exists(cache)) {
            std::ifstream in(cache);
            raw.assign(std::istreambuf_iterator<char>(in), {});
          } else {
            raw = client->evaluate(item.payload);
            std::ofstream(cache, std::ios::trunc) << raw;
          }
          judge::JudgeScores s = judge::parse_judge_response(raw);
          std::lock_guard<std::mutex> lk(mu);
          scored.emplace_back(item.id, s);
          ok = true;
        } catch (const judge::ParseError& e) {
          last_error = e.what();
          std::cerr << "judge parse failure for " << item.id << " (attempt "
                    << attempt + 1 << "): " << e.what()
                    << "; raw: " << e.raw_response << "\n";
          if (!e.retriable) break;
        } catch (const std::exception& e) {
          last_error = e.what();
          break;  // transport failure: mark failed, keep going
        }
      }
      if (!ok) {
        std::lock_guard<std::mutex> lk(mu);
        failed.push_back(item.id);
        std::cerr << "judge failed for " << item.id << ": " << last_error << "\n";
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::sort(failed.begin(), failed.end());

  if (scored.empty()) throw std::runtime_error("every judge request failed");

  judge::JudgeScores mean;
  {
    std::ofstream lines(out_dir / "judge_scores.jsonl", std::ios::trunc);
    for (const auto& [id, s] : scored) {
      json r = {{"id", id},       {"mask", s.mask},     {"type", s.type},
                {"areas", s.areas}, {"tampered", s.tampered},
                {"visual", s.visual}, {"summary", s.summary}};
      judge::AggregateScores a = judge::aggregate_scores(s);
      r["overall_text"] = a.overall_text;
      r["overall"] = a.overall;
      lines << r.dump() << "\n";
      mean.mask += s.mask;
      mean.type += s.type;
      mean.areas += s.areas;
      mean.tampered += s.tampered;
      mean.visual += s.visual;
      mean.summary += s.summary;
    }
  }
  double n = static_cast<double>(scored.size());
  mean.mask /= n;
  mean.type /= n;
  mean.areas /= n;
  mean.tampered /= n;
  mean.visual /= n;
  mean.summary /= n;
  judge::JudgeScores var;  // population variance per dimension
  for (const auto& [id, s] : scored) {
    var.mask += (s.mask - mean.mask) * (s.mask - mean.mask);
    var.type += (s.type - mean.type) * (s.type - mean.type);
    var.areas += (s.areas - mean.areas) * (s.areas - mean.areas);
    var.tampered += (s.tampered - mean.tampered) * (s.tampered - mean.tampered);
    var.visual += (s.visual - mean.visual) * (s.visual - mean.visual);
    var.summary += (s.summary - mean.summary) * (s.summary - mean.summary);
  }
  judge::AggregateScores agg = judge::aggregate_scores(mean);

  json out;
  out["provider"] = client->name();
  out["per_dimension"] = {{"mask", mean.mask},     {"type", mean.type},
                          {"areas", mean.areas},   {"tampered", mean.tampered},
                          {"visual", mean.visual}, {"summary", mean.summary}};
  out["per_dimension_std"] = {
      {"mask", std::sqrt(var.mask / n)},       {"type", std::sqrt(var.type / n)},
      {"areas", std::sqrt(var.areas / n)},
      {"tampered", std::sqrt(var.tampered / n)},
      {"visual", std::sqrt(var.visual / n)},
      {"summary", std::sqrt(var.summary / n)}};
  out["overall_text"] = agg.overall_text;
  out["overall"] = agg.overall;
  out["scored"] = scored.size();
  out["failed"] = failed;
  std::ofstream(out_dir / "judge_aggregate.json", std::ios::trunc)
      << out.dump(2) << "\n";
  std::cout << "judge: " << scored.size() << " scored, " << failed.size()
            << " failed; overall " << agg.overall << "\n";
  return failed.empty() ? kExitOk : kExitPartial;
}

int cmd_report(const std::string& run_dir) {
  report::render_run(run_dir);
  std::cout << "report written to " << (fs::path(run_dir) / "report") << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage forgery detection/localization + explanation pipeline"};
  app.require_subcommand(1);

  CommonArgs common;
  std::vector<std::string> perturbs;
  bool alpha_sweep = false;
  bool resume = false;
  std::string report_dir;
  uint64_t seed_flag = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "run config JSON file");
    sub->add_option("--set", common.overrides,
                    "scalar override key.path=value (repeatable)");
    sub->add_option("--seed", seed_flag, "seed override")
        ->each([&](const std::string&) { seed_set = true; });
  };

  CLI::App* fixture = app.add_subcommand("fixture", "generate the synthetic corpus");
  add_common(fixture);
  CLI::App* t1 = app.add_subcommand("train-stage1", "train detection + localization");
  add_common(t1);
  t1->add_flag("--resume", resume, "continue from the saved state");
  CLI::App* t2 = app.add_subcommand("train-stage2", "train explanation generation");
  add_common(t2);
  t2->add_flag("--resume", resume, "continue from the saved state");
  CLI::App* ev = app.add_subcommand("eval", "detection/localization/text metrics");
  add_common(ev);
  ev->add_option("--perturb", perturbs, "mask perturbation op:radius (repeatable)");
  ev->add_flag("--alpha-sweep", alpha_sweep, "sweep the blend weight grid");
  CLI::App* jd = app.add_subcommand("judge", "score outputs with the judge protocol");
  add_common(jd);
  CLI::App* rp = app.add_subcommand("report", "render tables and plots for a run");
  rp->add_option("run_dir", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  if (seed_set) common.overrides.push_back("seed=" + std::to_string(seed_flag));

  try {
    if (fixture->parsed()) return cmd_fixture(common);
    if (t1->parsed()) return cmd_train_stage1(common, resume);
    if (t2->parsed()) return cmd_train_stage2(common, resume);
    if (ev->parsed()) return cmd_eval(common, perturbs, alpha_sweep);
    if (jd->parsed()) return cmd_judge(common);
    if (rp->parsed()) return cmd_report(report_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    bool validation = what.find("unknown config key") != std::string::npos ||
                      what.find("wrong type") != std::string::npos ||
                      what.find("wrong shape") != std::string::npos ||
                      what.find("cannot open config") != std::string::npos ||
                      what.find("bad value") != std::string::npos ||
                      what.find("override") != std::string::npos;
    return validation ? kExitValidation : kExitRuntime;
  }
  return kExitRuntime;
}
