#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "ifdl/data.hpp"
#include "ifdl/model.hpp"
#include "ifdl/train.hpp"
#include "testutil.hpp"

using namespace ifdl;
namespace fs = std::filesystem;
using testutil::random_mat;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ifdl_train_" + std::to_string(static_cast<long>(::getpid())) +
            "_" + std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return std::vector<char>(std::istreambuf_iterator<char>(is),
                           std::istreambuf_iterator<char>());
}

model::Stage1Model tiny_stage1(uint64_t seed) {
  model::Stage1Model m;
  m.enc.image_size = 16;
  m.enc.patch_size = 8;
  m.enc.embed_dim = 16;
  m.enc.depth = 1;
  m.enc.heads = 2;
  m.prompt.token_dim = 16;
  m.prompt.prompt_dim = 16;
  m.prompt.heads = 2;
  m.dec.image_size = 16;
  m.dec.feature_channels = 16;
  m.dec.prompt_dim = 16;
  m.dec.heads = 2;
  m.dec.refine_blocks = 1;
  m.dec.up_channels = 4;
  m.init(seed);
  return m;
}

data::DatasetManifest tiny_fixture(const fs::path& dir, uint64_t seed) {
  data::FixtureConfig cfg;
  cfg.image_size = 16;
  cfg.count_real = 2;
  cfg.count_full_synthetic = 2;
  cfg.count_tampered = 2;
  cfg.min_shape = 4;
  cfg.max_shape = 6;
  return data::generate_fixture(cfg, seed, dir);
}

train::LoopConfig quick_loop(long steps) {
  train::LoopConfig lc;
  lc.optimizer.learning_rate = 1e-3;
  lc.schedule.warmup_steps = 2;
  lc.schedule.total_steps = 100;
  lc.steps = steps;
  lc.batch = 2;
  lc.accum = 1;
  lc.seed = 7;
  return lc;
}

}  // namespace

TEST_CASE("learning rate schedule hand values and continuity") {
  train::ScheduleConfig sched;  // warmup 100, total 10000
  const double peak = 1e-5;
  CHECK(train::lr_at(0, peak, sched) == 0.0);
  CHECK(train::lr_at(50, peak, sched) == doctest::Approx(5e-6).epsilon(1e-12));
  CHECK(train::lr_at(100, peak, sched) ==
        doctest::Approx(peak).epsilon(1e-12));
  // Halfway through the decay leg: (10000-5050)/9900 of peak.
  CHECK(train::lr_at(5050, peak, sched) ==
        doctest::Approx(peak * 4950.0 / 9900.0).epsilon(1e-12));
  CHECK(train::lr_at(10000, peak, sched) == 0.0);

  // No jump at the warmup boundary.
  double before = train::lr_at(99, peak, sched);
  double at = train::lr_at(100, peak, sched);
  double after = train::lr_at(101, peak, sched);
  CHECK(at - before > 0.0);
  CHECK(at - after > 0.0);
  CHECK(std::abs((at - before) - (at - after) * 99.0 / 100.0) < peak * 0.01);

  CHECK_THROWS_AS(train::lr_at(-1, peak, sched), std::out_of_range);
  CHECK_THROWS_AS(train::lr_at(10001, peak, sched), std::out_of_range);
  train::ScheduleConfig bad;
  bad.warmup_steps = 10;
  bad.total_steps = 10;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("gradient clipping uses the concatenated global norm") {
  std::mt19937_64 rng(3);
  train::GradMap grads;
  grads["a"] = random_mat(3, 4, rng);
  grads["b"] = random_mat(2, 2, rng);
  double norm = std::sqrt(grads["a"].squaredNorm() + grads["b"].squaredNorm());

  // Comfortably inside the bound: untouched, scale 1.
  train::GradMap loose = grads;
  CHECK(train::clip_gradients(loose, norm + 1.0) == 1.0);
  CHECK((loose["a"] - grads["a"]).cwiseAbs().maxCoeff() == 0.0);

  // Outside the bound: rescaled to the max norm exactly.
  train::GradMap tight = grads;
  double scale = train::clip_gradients(tight, norm / 2.0);
  CHECK(scale == doctest::Approx(0.5).epsilon(1e-12));
  double clipped =
      std::sqrt(tight["a"].squaredNorm() + tight["b"].squaredNorm());
  CHECK(clipped == doctest::Approx(norm / 2.0).epsilon(1e-12));

  train::GradMap nan_grads = grads;
  nan_grads["a"](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train::clip_gradients(nan_grads, 1.0), std::runtime_error);
  CHECK_THROWS_AS(train::clip_gradients(grads, 0.0), std::invalid_argument);
}

TEST_CASE("AdamW first step approximates a signed update") {
  train::OptimizerConfig cfg;
  cfg.learning_rate = 1e-3;
  train::AdamW opt(cfg);
  ParamStore params;
  std::mt19937_64 rng(5);
  params.put("w", random_mat(2, 3, rng));
  ag::Mat before = params.at("w")->value;

  train::GradMap grads;
  grads["w"] = random_mat(2, 3, rng);

  opt.step(params, grads, 1e-3);
  CHECK(opt.steps_taken() == 1);
  // Bias correction makes the first update ~ -lr * sign(grad).
  ag::Mat delta = params.at("w")->value - before;
  for (int i = 0; i < delta.size(); ++i) {
    double g = grads["w"](i);
    CHECK(delta(i) * g < 0.0);
    CHECK(std::abs(delta(i)) == doctest::Approx(1e-3).epsilon(1e-4));
  }
}

TEST_CASE("optimizer state serializes for bit-exact restart") {
  TempDir dir;
  train::OptimizerConfig cfg;
  std::mt19937_64 rng(7);

  auto make_params = [&](ParamStore& p, std::mt19937_64& r) {
    p.put("x.w", random_mat(3, 3, r, 0.5));
    p.put("y.w", random_mat(1, 4, r, 0.5));
  };
  std::mt19937_64 r1(11);
  ParamStore p1;
  make_params(p1, r1);
  std::mt19937_64 r2(11);
  ParamStore p2;
  make_params(p2, r2);

  train::AdamW opt(cfg);
  std::mt19937_64 grng(13);
  std::vector<train::GradMap> steps;
  for (int t = 0; t < 3; ++t) {
    train::GradMap g;
    g["x.w"] = random_mat(3, 3, grng);
    g["y.w"] = random_mat(1, 4, grng);
    steps.push_back(g);
  }

  opt.step(p1, steps[0], 1e-4);
  opt.step(p1, steps[1], 1e-4);
  opt.save(dir.path / "opt.ckpt");
  p1.save(dir.path / "p.ckpt");
  opt.step(p1, steps[2], 1e-4);

  train::AdamW opt2(cfg);
  opt2.load(dir.path / "opt.ckpt");
  CHECK(opt2.steps_taken() == 2);
  p2.load(dir.path / "p.ckpt");
  opt2.step(p2, steps[2], 1e-4);

  for (const char* name : {"x.w", "y.w"}) {
    const ag::Mat& a = p1.at(name)->value;
    const ag::Mat& b = p2.at(name)->value;
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
  }
}

TEST_CASE("epoch ordering is a deterministic permutation per (seed, epoch)") {
  auto a = train::epoch_order(100, 42, 0);
  auto b = train::epoch_order(100, 42, 0);
  CHECK(a == b);
  CHECK(train::epoch_order(100, 42, 1) != a);
  CHECK(train::epoch_order(100, 43, 0) != a);

  std::vector<size_t> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
}

TEST_CASE("stage-1 loop is deterministic and resumes bit-identically") {
  TempDir data_dir, full_dir, half_dir;
  auto manifest = tiny_fixture(data_dir.path / "fx", 3);

  // One uninterrupted run to 4 steps.
  auto m1 = tiny_stage1(5);
  auto full = train::train_stage1(manifest, m1, quick_loop(4),
                                  full_dir.path / "run");
  CHECK(full.step == 4);
  CHECK(full.history.size() == 4);
  for (const auto& rec : full.history) CHECK(std::isfinite(rec.total));

  // The same run interrupted at 2 steps and resumed to 4.
  auto m2 = tiny_stage1(5);
  train::train_stage1(manifest, m2, quick_loop(2), half_dir.path / "run");
  auto m3 = tiny_stage1(5);
  auto resumed = train::train_stage1(manifest, m3, quick_loop(4),
                                     half_dir.path / "run", true);
  CHECK(resumed.step == 4);
  CHECK(resumed.history.size() == 4);

  auto bytes_full = read_bytes(full_dir.path / "run" / "params.ckpt");
  auto bytes_resumed = read_bytes(half_dir.path / "run" / "params.ckpt");
  CHECK(bytes_full == bytes_resumed);

  // Loss history agrees step by step too.
  for (size_t i = 0; i < 4; ++i) {
    CHECK(full.history[i].total == resumed.history[i].total);
    CHECK(full.history[i].lr == resumed.history[i].lr);
  }
}

TEST_CASE("gradient accumulation matches the equivalent larger batch") {
  TempDir data_dir, a_dir, b_dir;
  auto manifest = tiny_fixture(data_dir.path / "fx", 9);

  train::LoopConfig big = quick_loop(2);
  big.batch = 4;
  big.accum = 1;
  train::LoopConfig accum = quick_loop(2);
  accum.batch = 2;
  accum.accum = 2;

  auto ma = tiny_stage1(7);
  train::train_stage1(manifest, ma, big, a_dir.path / "run");
  auto mb = tiny_stage1(7);
  train::train_stage1(manifest, mb, accum, b_dir.path / "run");

  for (const auto& [name, p] : ma.store.all()) {
    const ag::Mat& other = mb.store.at(name)->value;
    CHECK((p->value - other).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("divergence aborts with the offending sample ids") {
  TempDir data_dir, run_dir;
  auto manifest = tiny_fixture(data_dir.path / "fx", 13);

  train::LoopConfig lc = quick_loop(4);

  auto m = tiny_stage1(11);
  // A poisoned weight makes the very first batch loss non-finite.
  m.store.at("head.cls.b")->value(0, 0) =
      std::numeric_limits<double>::quiet_NaN();
  try {
    train::train_stage1(manifest, m, lc, run_dir.path / "run");
    FAIL("expected divergence to abort the loop");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("samples:") != std::string::npos);
    CHECK(msg.find("step") != std::string::npos);
  }
}

TEST_CASE("stage-1 training rejects tampered records without masks") {
  TempDir data_dir, run_dir;
  auto manifest = tiny_fixture(data_dir.path / "fx", 17);
  for (auto& rec : manifest.records)
    if (rec.label == data::Label::Tampered) rec.mask_path.reset();

  auto m = tiny_stage1(19);
  CHECK_THROWS_AS(
      train::train_stage1(manifest, m, quick_loop(1), run_dir.path / "run"),
      std::invalid_argument);
}
