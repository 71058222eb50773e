#include "ifdl/runconfig.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ifdl::cfg {

using nlohmann::json;

json default_config() {
  json c;
  c["seed"] = 11;
  c["out_dir"] = "runs/default";

  c["data"]["manifest"] = "";
  c["data"]["train_frac"] = 0.8;
  c["data"]["val_frac"] = 0.1;
  c["data"]["test_frac"] = 0.1;
  c["data"]["split_seed"] = 7;

  c["fixture"]["out_dir"] = "fixture";
  c["fixture"]["image_size"] = 64;
  c["fixture"]["real_count"] = 120;
  c["fixture"]["synthetic_count"] = 120;
  c["fixture"]["tampered_count"] = 120;
  c["fixture"]["min_shape"] = 20;
  c["fixture"]["max_shape"] = 36;

  c["encoder"]["image_size"] = 64;
  c["encoder"]["patch_size"] = 8;
  c["encoder"]["embed_dim"] = 64;
  c["encoder"]["depth"] = 2;
  c["encoder"]["heads"] = 4;

  c["prompt"]["prompt_dim"] = 256;
  c["prompt"]["heads"] = 4;

  c["mask_decoder"]["feature_channels"] = 64;
  c["mask_decoder"]["heads"] = 4;
  c["mask_decoder"]["refine_blocks"] = 2;
  c["mask_decoder"]["up_channels"] = 32;

  c["lm"]["context"] = 64;
  c["lm"]["dim"] = 64;
  c["lm"]["depth"] = 2;
  c["lm"]["heads"] = 4;

  c["blend"]["alpha"] = 0.5;
  c["blend"]["mask_source"] = "ground_truth";  // or "predicted"

  c["loss"]["lambda_bce"] = 1.0;
  c["loss"]["lambda_dice"] = 1.0;
  c["loss"]["lambda_det"] = 1.0;

  c["train"]["lr"] = 1e-5;
  c["train"]["beta1"] = 0.9;
  c["train"]["beta2"] = 0.95;
  c["train"]["weight_decay"] = 0.0;
  c["train"]["warmup_steps"] = 100;
  c["train"]["total_steps"] = 10000;
  c["train"]["steps"] = 500;
  c["train"]["batch_size"] = 4;
  c["train"]["accum_steps"] = 1;
  c["train"]["clip_norm"] = 1.0;
  c["train"]["stage1_checkpoint"] = "";

  c["judge"]["provider"] = "mock";  // or "http"
  c["judge"]["endpoint"] = "";
  c["judge"]["model"] = "";
  c["judge"]["api_key_env"] = "IFDL_JUDGE_API_KEY";
  c["judge"]["temperature"] = 0.7;
  c["judge"]["top_p"] = 0.95;
  c["judge"]["max_tokens"] = 8000;
  c["judge"]["max_in_flight"] = 4;

  c["eval"]["split"] = "val";
  c["eval"]["mask_threshold"] = 0.5;
  c["eval"]["checkpoint"] = "";
  c["eval"]["stage2_checkpoint"] = "";
  return c;
}

void validate_keys(const json& user, const json& defaults, const std::string& path) {
  if (!user.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    std::string p = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.is_object() || !defaults.contains(it.key()))
      throw std::runtime_error("unknown config key: " + p);
    const json& dv = defaults.at(it.key());
    const json& uv = it.value();
    if (dv.is_object() != uv.is_object())
      throw std::runtime_error("config key has wrong shape: " + p);
    if (uv.is_object()) {
      validate_keys(uv, dv, p);
    } else {
      bool both_num = dv.is_number() && uv.is_number();
      if (!both_num && dv.type() != uv.type())
        throw std::runtime_error("config key has wrong type: " + p);
    }
  }
}

namespace {

void merge_into(json& base, const json& over) {
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (it.value().is_object())
      merge_into(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

void apply_override(json& cfg, const json& defaults, const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("override must look like key.path=value: " + kv);
  std::string key = kv.substr(0, eq);
  std::string raw = kv.substr(eq + 1);

  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string tok;
  while (std::getline(ss, tok, '.')) parts.push_back(tok);
  if (parts.empty()) throw std::runtime_error("empty override key");

  const json* d = &defaults;
  json* c = &cfg;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (!d->is_object() || !d->contains(parts[i]))
      throw std::runtime_error("unknown config key: " + key);
    d = &d->at(parts[i]);
    if (i + 1 < parts.size()) c = &(*c)[parts[i]];
  }
  if (d->is_object()) throw std::runtime_error("override key is not a scalar: " + key);

  json val;
  if (d->is_string()) {
    val = raw;
  } else {
    val = json::parse(raw, nullptr, false);
    if (val.is_discarded() || val.type() != d->type()) {
      bool ok = val.is_number() && d->is_number();
      if (!ok) throw std::runtime_error("bad value for " + key + ": " + raw);
    }
  }
  (*c)[parts.back()] = val;
}

void render_leaves(const json& node, const std::string& path,
                   std::vector<std::string>& out) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it)
      render_leaves(it.value(), path.empty() ? it.key() : path + "." + it.key(), out);
  } else {
    out.push_back(path + " = " + node.dump());
  }
}

}  // namespace

json load_run_config(const std::string& config_path,
                     const std::vector<std::string>& overrides) {
  json defaults = default_config();
  json cfg = defaults;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config file: " + config_path);
    json user = json::parse(in);
    validate_keys(user, defaults);
    merge_into(cfg, user);
  }
  for (const auto& kv : overrides) apply_override(cfg, defaults, kv);
  return cfg;
}

std::string render_effective(const json& cfg) {
  std::vector<std::string> lines;
  render_leaves(cfg, "", lines);
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace ifdl::cfg
