#include "ifdl/params.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ifdl {

ag::Mat gaussian(long rows, long cols, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  ag::Mat m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

ag::Var ParamStore::create(const std::string& name, long rows, long cols,
                           std::mt19937_64& rng, double stddev) {
  if (tensors_.count(name))
    throw std::invalid_argument("duplicate parameter name: " + name);
  auto v = ag::leaf(gaussian(rows, cols, rng, stddev));
  tensors_[name] = v;
  return v;
}

ag::Var ParamStore::create_zero(const std::string& name, long rows,
                                long cols) {
  return create_const(name, rows, cols, 0.0);
}

ag::Var ParamStore::create_const(const std::string& name, long rows, long cols,
                                 double value) {
  if (tensors_.count(name))
    throw std::invalid_argument("duplicate parameter name: " + name);
  auto v = ag::leaf(ag::Mat::Constant(rows, cols, value));
  tensors_[name] = v;
  return v;
}

ag::Var ParamStore::put(const std::string& name, ag::Mat value) {
  if (tensors_.count(name))
    throw std::invalid_argument("duplicate parameter name: " + name);
  auto v = ag::leaf(std::move(value));
  tensors_[name] = v;
  return v;
}

ag::Var ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end())
    throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

bool ParamStore::contains(const std::string& name) const {
  return tensors_.count(name) != 0;
}

void ParamStore::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& [name, v] : tensors_)
    if (name.rfind(prefix, 0) == 0) v->requires_grad = trainable;
}

namespace {
constexpr char kMagic[8] = {'I', 'F', 'D', 'L', 'C', 'K', 'P', 'T'};

void write_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
}  // namespace

void ParamStore::save(const std::filesystem::path& file) const {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for write: " +
                                    file.string());
  os.write(kMagic, sizeof kMagic);
  write_u64(os, 1);  // format version
  write_u64(os, tensors_.size());
  for (const auto& [name, v] : tensors_) {
    write_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(os, static_cast<uint64_t>(v->rows()));
    write_u64(os, static_cast<uint64_t>(v->cols()));
    os.write(reinterpret_cast<const char*>(v->value.data()),
             static_cast<std::streamsize>(sizeof(double) * v->value.size()));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " +
                                    file.string());
}

void ParamStore::load(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " +
                                    file.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not a checkpoint file: " + file.string());
  if (read_u64(is) != 1)
    throw std::runtime_error("unsupported checkpoint version");
  const uint64_t count = read_u64(is);
  for (uint64_t i = 0; i < count; ++i) {
    const uint64_t len = read_u64(is);
    std::string name(len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(len));
    const long rows = static_cast<long>(read_u64(is));
    const long cols = static_cast<long>(read_u64(is));
    ag::Mat m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!is) throw std::runtime_error("truncated checkpoint: " +
                                      file.string());
    auto it = tensors_.find(name);
    if (it == tensors_.end()) {
      tensors_[name] = ag::leaf(std::move(m));
    } else {
      if (it->second->rows() != rows || it->second->cols() != cols)
        throw std::runtime_error("checkpoint shape mismatch for " + name);
      it->second->value = std::move(m);
    }
  }
}

std::string ParamStore::shape_table() const {
  std::ostringstream os;
  for (const auto& [name, v] : tensors_)
    os << name << " " << v->rows() << "x" << v->cols() << "\n";
  return os.str();
}

}  // namespace ifdl
