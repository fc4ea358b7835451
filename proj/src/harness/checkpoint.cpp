#include "vino/harness/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace vino {

namespace {

constexpr char kMagic[8] = {'V', 'I', 'N', 'O', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void write_vec(std::ofstream& f, const Eigen::VectorXd& v) {
  uint64_t n = static_cast<uint64_t>(v.size());
  f.write(reinterpret_cast<const char*>(&n), 8);
  f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * 8));
}

Eigen::VectorXd read_vec(std::ifstream& f, const std::string& path) {
  uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&n), 8);
  if (!f || n > (1ULL << 32)) throw DataError("corrupt checkpoint: " + path);
  Eigen::VectorXd v(static_cast<long>(n));
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8));
  if (!f) throw DataError("truncated checkpoint: " + path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for write: " + path);
  f.write(kMagic, 8);
  f.write(reinterpret_cast<const char*>(&kVersion), 4);
  f.write(reinterpret_cast<const char*>(&c.config_hash), 8);
  f.write(reinterpret_cast<const char*>(&c.step), 8);
  f.write(reinterpret_cast<const char*>(&c.tube_counter), 8);
  f.write(reinterpret_cast<const char*>(&c.adam_steps), 8);
  write_vec(f, c.student);
  write_vec(f, c.teacher);
  write_vec(f, c.center);
  write_vec(f, c.adam_m);
  write_vec(f, c.adam_v);
  uint64_t rn = c.rng_state.size();
  f.write(reinterpret_cast<const char*>(&rn), 8);
  f.write(c.rng_state.data(), static_cast<std::streamsize>(rn));
  if (!f) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a checkpoint file: " + path);
  uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  Checkpoint c;
  f.read(reinterpret_cast<char*>(&c.config_hash), 8);
  f.read(reinterpret_cast<char*>(&c.step), 8);
  f.read(reinterpret_cast<char*>(&c.tube_counter), 8);
  f.read(reinterpret_cast<char*>(&c.adam_steps), 8);
  c.student = read_vec(f, path);
  c.teacher = read_vec(f, path);
  c.center = read_vec(f, path);
  c.adam_m = read_vec(f, path);
  c.adam_v = read_vec(f, path);
  uint64_t rn = 0;
  f.read(reinterpret_cast<char*>(&rn), 8);
  if (!f || rn > 4096) throw DataError("corrupt checkpoint rng state: " + path);
  c.rng_state.resize(rn);
  f.read(c.rng_state.data(), static_cast<std::streamsize>(rn));
  if (!f) throw DataError("truncated checkpoint: " + path);
  return c;
}

}  // namespace vino
