#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "ifdl/autograd.hpp"

namespace ifdl {

// Named parameter tensors. Names are canonical ("encoder.block0.attn.wq")
// and stable across runs; the checkpoint archive is keyed by them.
class ParamStore {
 public:
  ag::Var create(const std::string& name, long rows, long cols,
                 std::mt19937_64& rng, double stddev);
  ag::Var create_zero(const std::string& name, long rows, long cols);
  ag::Var create_const(const std::string& name, long rows, long cols,
                       double value);
  ag::Var put(const std::string& name, ag::Mat value);

  ag::Var at(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::map<std::string, ag::Var>& all() const { return tensors_; }

  // Marks every tensor whose name starts with `prefix` (non-)trainable.
  void set_trainable(const std::string& prefix, bool trainable);

  void save(const std::filesystem::path& file) const;
  // Loads values into existing tensors (shapes must match) and adds any
  // tensors not yet present.
  void load(const std::filesystem::path& file);

  // name -> "RxC" table, one line per tensor.
  std::string shape_table() const;

 private:
  std::map<std::string, ag::Var> tensors_;
};

// N(0, stddev) init helper shared by the model builders.
ag::Mat gaussian(long rows, long cols, std::mt19937_64& rng, double stddev);

}  // namespace ifdl
