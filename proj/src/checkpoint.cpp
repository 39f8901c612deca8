#include "rotdiff/checkpoint.hpp"

#include <cstring>
#include <stdexcept>

#include "rotdiff/util.hpp"

namespace rotdiff {

namespace {

constexpr char kMagic[8] = {'R', 'O', 'T', 'D', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

// x86-64 is little-endian; raw byte copies of the fixed-width fields below
// are the on-disk format.
void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(static_cast<const char*>(p), n);
}

template <typename T>
void put(std::string& out, T v) {
  put_bytes(out, &v, sizeof(T));
}

void put_str(std::string& out, const std::string& s) {
  put<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out += s;
}

void put_tensor_data(std::string& out, const Tensor2& t) {
  put_bytes(out, t.data(), t.size() * sizeof(double));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_str() {
    uint32_t n = get<uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void get_tensor_data(Tensor2& t) {
    need(t.size() * sizeof(double));
    std::memcpy(t.data(), bytes_.data() + pos_, t.size() * sizeof(double));
    pos_ += t.size() * sizeof(double);
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  size_t pos_ = 0;

  void need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: truncated file");
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& ps, const CheckpointData& meta) {
  std::string out;
  put_bytes(out, kMagic, sizeof(kMagic));
  put<uint32_t>(out, kVersion);
  put<uint64_t>(out, meta.skeleton_hash);
  put<int64_t>(out, meta.step);
  put_str(out, meta.rng_state);
  put<uint32_t>(out, static_cast<uint32_t>(meta.hyper.size()));
  for (const auto& [key, value] : meta.hyper) {
    put_str(out, key);
    put_str(out, value);
  }
  put<uint32_t>(out, static_cast<uint32_t>(ps.count()));
  for (const auto& [name, entry] : ps.entries()) {
    put_str(out, name);
    put<uint32_t>(out, static_cast<uint32_t>(entry.value.rows()));
    put<uint32_t>(out, static_cast<uint32_t>(entry.value.cols()));
    put_tensor_data(out, entry.value);
    put_tensor_data(out, entry.m);
    put_tensor_data(out, entry.v);
  }
  write_file(path, out);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  Reader r(read_file(path));
  char magic[8];
  for (char& c : magic) c = r.get<char>();
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  uint32_t version = r.get<uint32_t>();
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported format version " +
                             std::to_string(version));
  LoadedCheckpoint out;
  out.meta.skeleton_hash = r.get<uint64_t>();
  out.meta.step = r.get<int64_t>();
  out.meta.rng_state = r.get_str();
  uint32_t nh = r.get<uint32_t>();
  for (uint32_t i = 0; i < nh; ++i) {
    std::string key = r.get_str();
    out.meta.hyper[key] = r.get_str();
  }
  uint32_t np = r.get<uint32_t>();
  for (uint32_t i = 0; i < np; ++i) {
    std::string name = r.get_str();
    int rows = static_cast<int>(r.get<uint32_t>());
    int cols = static_cast<int>(r.get<uint32_t>());
    out.ps.create(name, rows, cols);
    ParamStore::Entry& e = out.ps.entry(name);
    r.get_tensor_data(e.value);
    r.get_tensor_data(e.m);
    r.get_tensor_data(e.v);
  }
  if (!r.at_end()) throw std::runtime_error("checkpoint: trailing bytes in " + path);
  return out;
}

}  // namespace rotdiff
