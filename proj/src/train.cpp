#include "ifdl/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "ifdl/losses.hpp"

#include "json.hpp"

namespace ifdl::train {

using nlohmann::json;

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("lr must be > 0");
  if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1))
    throw std::invalid_argument("betas must be in (0,1)");
  if (weight_decay < 0 || epsilon <= 0)
    throw std::invalid_argument("bad weight_decay/epsilon");
}

void ScheduleConfig::validate() const {
  if (warmup_steps < 0 || warmup_steps >= total_steps)
    throw std::invalid_argument("warmup_steps must be < total_steps");
}

double lr_at(long step, double peak, const ScheduleConfig& schedule) {
  schedule.validate();
  if (step < 0 || step > schedule.total_steps)
    throw std::out_of_range("lr_at: step outside [0, total_steps]");
  if (step <= schedule.warmup_steps) {
    if (schedule.warmup_steps == 0) return peak;
    return peak * static_cast<double>(step) /
           static_cast<double>(schedule.warmup_steps);
  }
  return peak *
         static_cast<double>(schedule.total_steps - step) /
         static_cast<double>(schedule.total_steps - schedule.warmup_steps);
}

double clip_gradients(GradMap& grads, double max_norm) {
  if (!(max_norm > 0)) throw std::invalid_argument("max_norm must be > 0");
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    const double s = g.squaredNorm();
    if (!std::isfinite(s))
      throw std::runtime_error("non-finite gradient in " + name);
    sq += s;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return 1.0;
  const double scale = max_norm / norm;
  for (auto& [name, g] : grads) g *= scale;
  return scale;
}

void AdamW::step(ParamStore& params, const GradMap& grads, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, t_);
  const double bc2 = 1.0 - std::pow(config_.beta2, t_);
  for (const auto& [name, g] : grads) {
    ag::Var p = params.at(name);
    auto it = moments_.find(name);
    if (it == moments_.end())
      it = moments_
               .emplace(name, std::make_pair(ag::Mat::Zero(g.rows(), g.cols()),
                                             ag::Mat::Zero(g.rows(), g.cols())))
               .first;
    auto& [m, v] = it->second;
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    if (config_.weight_decay > 0.0)
      p->value -= lr * config_.weight_decay * p->value;
    p->value.array() -= lr * (m.array() / bc1) /
                        ((v.array() / bc2).sqrt() + config_.epsilon);
  }
}

void AdamW::save(const std::filesystem::path& file) const {
  ParamStore snapshot;
  snapshot.create_const("adamw.t", 1, 1, static_cast<double>(t_));
  for (const auto& [name, mv] : moments_) {
    snapshot.put("adamw.m." + name, mv.first);
    snapshot.put("adamw.v." + name, mv.second);
  }
  snapshot.save(file);
}

void AdamW::load(const std::filesystem::path& file) {
  ParamStore snapshot;
  snapshot.load(file);
  t_ = static_cast<long>(snapshot.at("adamw.t")->value(0, 0));
  moments_.clear();
  for (const auto& [name, v] : snapshot.all()) {
    if (name.rfind("adamw.m.", 0) == 0)
      moments_[name.substr(8)].first = v->value;
    else if (name.rfind("adamw.v.", 0) == 0)
      moments_[name.substr(8)].second = v->value;
  }
}

std::vector<size_t> epoch_order(size_t n, uint64_t seed, long epoch) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL +
                      static_cast<uint64_t>(epoch) + 1);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void save_state(const TrainState& state, const std::filesystem::path& dir) {
  json j;
  j["step"] = state.step;
  j["epoch"] = state.epoch;
  j["cursor"] = state.cursor;
  j["seed"] = state.seed;
  std::ofstream os(dir / "state.json", std::ios::trunc);
  os << j.dump(2) << "\n";
  std::ofstream hist(dir / "loss_history.jsonl", std::ios::trunc);
  for (const auto& r : state.history) {
    json h;
    h["step"] = r.step;
    h["lr"] = r.lr;
    h["total"] = r.total;
    h["bce"] = r.bce;
    h["dice"] = r.dice;
    h["ce"] = r.ce;
    h["clip_scale"] = r.clip_scale;
    hist << h.dump() << "\n";
  }
}

TrainState load_state(const std::filesystem::path& dir) {
  std::ifstream is(dir / "state.json");
  if (!is) throw std::runtime_error("no training state in " + dir.string());
  json j = json::parse(is);
  TrainState state;
  state.step = j.at("step").get<long>();
  state.epoch = j.at("epoch").get<long>();
  state.cursor = j.at("cursor").get<long>();
  state.seed = j.at("seed").get<uint64_t>();
  std::ifstream hist(dir / "loss_history.jsonl");
  std::string line;
  while (std::getline(hist, line)) {
    if (line.empty()) continue;
    json h = json::parse(line);
    LossRecord r;
    r.step = h.at("step").get<long>();
    r.lr = h.at("lr").get<double>();
    r.total = h.at("total").get<double>();
    r.bce = h.value("bce", 0.0);
    r.dice = h.value("dice", 0.0);
    r.ce = h.value("ce", 0.0);
    r.clip_scale = h.value("clip_scale", 1.0);
    state.history.push_back(r);
  }
  return state;
}

namespace {

// Collects gradients of all trainable parameters after backward(), scaled
// by 1/denom, into the accumulation buffer.
void accumulate_grads(const ParamStore& params, GradMap& buffer,
                      double denom) {
  for (const auto& [name, p] : params.all()) {
    if (!p->requires_grad) continue;
    if (p->grad.size() == 0) continue;  // parameter unused by this graph
    auto it = buffer.find(name);
    if (it == buffer.end())
      it = buffer.emplace(name, ag::Mat::Zero(p->rows(), p->cols())).first;
    it->second += p->grad / denom;
  }
}

// Backward() allocates fresh grad buffers per call; parameters keep stale
// grads from previous graphs, so reset them before each micro-item.
void clear_grads(const ParamStore& params) {
  for (const auto& [name, p] : params.all()) p->grad.resize(0, 0);
}

template <typename StepFn>
TrainState run_loop(size_t dataset_size, const LoopConfig& config,
                    const std::filesystem::path& out_dir, bool resume,
                    ParamStore& params, StepFn&& per_item) {
  if (dataset_size == 0)
    throw std::invalid_argument("training dataset is empty");
  std::filesystem::create_directories(out_dir);

  AdamW optimizer(config.optimizer);
  TrainState state;
  state.seed = config.seed;
  if (resume) {
    state = load_state(out_dir);
    params.load(out_dir / "params.ckpt");
    optimizer.load(out_dir / "optim.ckpt");
  }

  std::vector<size_t> order =
      epoch_order(dataset_size, config.seed, state.epoch);
  auto next_index = [&]() {
    if (state.cursor >= static_cast<long>(order.size())) {
      ++state.epoch;
      state.cursor = 0;
      order = epoch_order(dataset_size, config.seed, state.epoch);
    }
    return order[static_cast<size_t>(state.cursor++)];
  };

  const double denom =
      static_cast<double>(config.batch) * static_cast<double>(config.accum);
  while (state.step < config.steps) {
    GradMap grads;
    LossRecord rec;
    std::vector<std::string> batch_ids;
    for (long micro = 0; micro < config.accum; ++micro)
      for (long b = 0; b < config.batch; ++b) {
        clear_grads(params);
        per_item(next_index(), rec, batch_ids);
        accumulate_grads(params, grads, denom);
      }
    if (!std::isfinite(rec.total)) {
      std::string ids;
      for (const auto& id : batch_ids) ids += " " + id;
      throw std::runtime_error("NaN loss at step " +
                               std::to_string(state.step) + "; samples:" + ids);
    }
    rec.total /= denom;
    rec.bce /= denom;
    rec.dice /= denom;
    rec.ce /= denom;
    rec.clip_scale = clip_gradients(grads, config.grad_clip);
    rec.lr = lr_at(std::min(state.step + 1, config.schedule.total_steps),
                   config.optimizer.learning_rate, config.schedule);
    optimizer.step(params, grads, rec.lr);
    ++state.step;
    rec.step = state.step;
    state.history.push_back(rec);
  }

  params.save(out_dir / "params.ckpt");
  optimizer.save(out_dir / "optim.ckpt");
  save_state(state, out_dir);
  std::ofstream shapes(out_dir / "param_shapes.txt", std::ios::trunc);
  shapes << params.shape_table();
  return state;
}

}  // namespace

TrainState train_stage1(const data::DatasetManifest& manifest,
                        model::Stage1Model& model, const LoopConfig& config,
                        const std::filesystem::path& out_dir, bool resume) {
  for (const auto& rec : manifest.records)
    if (rec.label == data::Label::Tampered && !rec.mask_path)
      throw std::invalid_argument("tampered sample without mask: " + rec.id);

  losses::LossWeights weights;
  return run_loop(
      manifest.records.size(), config, out_dir, resume, model.store,
      [&](size_t idx, LossRecord& rec, std::vector<std::string>& ids) {
        const data::SampleRecord& sample = manifest.records[idx];
        ids.push_back(sample.id);
        ImageTensor image = data::load_image(sample);
        BinaryMask mask =
            data::load_mask(sample, image.height, image.width);
        auto fwd = model.forward(image);
        const bool localize = sample.label != data::Label::FullySynthetic;
        losses::Stage1Loss loss = losses::stage1_loss(
            fwd.mask.flat, mask, fwd.class_logits,
            static_cast<long>(sample.label), weights, localize);
        rec.total += loss.total->value(0, 0);
        rec.bce += loss.bce;
        rec.dice += loss.dice;
        rec.ce += loss.ce;
        ag::backward(loss.total);
      });
}

TrainState train_stage2(const data::DatasetManifest& manifest,
                        model::Stage2Model& model,
                        const Stage2LoopConfig& config,
                        const std::filesystem::path& out_dir, bool resume) {
  std::vector<const data::SampleRecord*> annotated;
  for (const auto& rec : manifest.records)
    if (rec.explanation) annotated.push_back(&rec);
  if (annotated.empty())
    throw std::invalid_argument("no records carry explanations");

  stage2::Vocabulary vocab;
  return run_loop(
      annotated.size(), config, out_dir, resume, model.store,
      [&](size_t idx, LossRecord& rec, std::vector<std::string>& ids) {
        const data::SampleRecord& sample = *annotated[idx];
        ids.push_back(sample.id);
        ImageTensor image = data::load_image(sample);
        BinaryMask mask =
            data::load_mask(sample, image.height, image.width);
        stage2::VisualTokens visual =
            model.visual_tokens(image, mask, config.alpha);
        std::vector<long> target = vocab.encode_explanation(*sample.explanation);
        ag::Var loss =
            stage2::stage2_sample_loss(visual, target, model.lm, model.store);
        rec.ce += loss->value(0, 0);
        rec.total += loss->value(0, 0);
        ag::backward(loss);
      });
}

}  // namespace ifdl::train
