// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <zlib.h>

#include "ssodlab/errors.hpp"

namespace ssod {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'O', 'D', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  std::vector<char>& buffer() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<char>& buf, std::size_t end) : buf_(buf), end_(end) {}
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  void bytes(void* out, std::size_t n) {
    if (n > end_ - pos_) throw IntegrityError("checkpoint truncated");
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return end_ - pos_; }

 private:
  const std::vector<char>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void put_params(std::map<std::string, const Tensor*>& arrays, const std::string& prefix,
                const ParameterSet& ps) {
  for (const auto& p : ps.items()) arrays[prefix + p.name] = &p.value;
}

struct Loaded {
  nlohmann::json header;
  std::map<std::string, Tensor> arrays;
};

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(f), {});
}

Loaded parse(const std::filesystem::path& path, bool with_arrays) {
  const std::vector<char> buf = read_file(path);
  const std::string where = path.string();
  if (buf.size() < sizeof(kMagic) + 4 + 8 + 4 + 4 ||
      std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IntegrityError(where + ": not a checkpoint");
  }
  const std::size_t body = buf.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, buf.data() + body, 4);
  if (crc_of(buf.data(), body) != stored) {
    throw IntegrityError(where + ": checksum mismatch");
  }
  Reader r(buf, body);
  char magic[8];
  r.bytes(magic, 8);
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IntegrityError(where + ": unsupported version " + std::to_string(version));
  }
  const auto hlen = r.pod<std::uint64_t>();
  if (hlen > r.remaining()) throw IntegrityError(where + ": header truncated");
  std::string htext(hlen, '\0');
  r.bytes(htext.data(), hlen);
  Loaded out;
  try {
    out.header = nlohmann::json::parse(htext);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(where + ": bad header: " + e.what());
  }
  if (!with_arrays) return out;
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto nlen = r.pod<std::uint32_t>();
    if (nlen > r.remaining()) throw IntegrityError(where + ": array name truncated");
    std::string name(nlen, '\0');
    r.bytes(name.data(), nlen);
    Shape4 s;
    s.n = r.pod<std::int32_t>();
    s.c = r.pod<std::int32_t>();
    s.h = r.pod<std::int32_t>();
    s.w = r.pod<std::int32_t>();
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0 ||
        s.numel() * sizeof(double) > r.remaining()) {
      throw IntegrityError(where + ": array " + name + " has a bad shape");
    }
    Tensor t(s);
    r.bytes(t.data(), t.size() * sizeof(double));
    out.arrays.emplace(std::move(name), std::move(t));
  }
  if (r.remaining() != 0) throw IntegrityError(where + ": trailing bytes");
  return out;
}

CheckpointMeta meta_from(const nlohmann::json& h) {
  CheckpointMeta m;
  m.version = kCheckpointVersion;
  m.config_hash = h.at("config_hash").get<std::uint64_t>();
  m.epoch = h.at("epoch").get<int>();
  m.step = h.at("step").get<std::int64_t>();
  m.phase = h.at("phase").get<std::string>();
  m.has_teacher = h.at("has_teacher").get<bool>();
  m.config = h.at("config");
  return m;
}

DetectorParams restore_params(const Loaded& ld, const std::string& prefix,
                              const DetectorConfig& dcfg) {
  DetectorParams ps = make_detector_params(dcfg, 0);
  for (auto& p : ps.items()) {
    auto it = ld.arrays.find(prefix + p.name);
    if (it == ld.arrays.end()) {
      throw ShapeError("checkpoint lacks array " + prefix + p.name);
    }
    if (!(it->second.shape() == p.value.shape())) {
      throw ShapeError("checkpoint array " + prefix + p.name + " has shape " +
                       it->second.shape().str() + ", expected " + p.value.shape().str());
    }
    p.value = it->second;
  }
  return ps;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainerState& state,
                     const TrainConfig& cfg) {
  nlohmann::json h;
  h["config_hash"] = cfg.hash();
  h["config"] = cfg.to_flat();
  h["epoch"] = state.epoch;
  h["step"] = state.step;
  h["phase"] = phase_name(state.phase);
  h["has_teacher"] = state.has_teacher;
  h["ema"] = state.has_teacher;
  h["stats"] = state.stats;
  h["schedule"] = {{"epoch", state.schedule.epoch},
                   {"tau1", state.schedule.tau1},
                   {"tau2", state.schedule.tau2},
                   {"alpha", state.schedule.alpha}};
  h["schedule_sealed"] = state.schedule_sealed;
  h["rng_state"] = state.rng_state;
  h["metrics"] = state.metrics;
  const std::string htext = h.dump();

  std::map<std::string, const Tensor*> arrays;
  put_params(arrays, "student.", state.student);
  if (state.has_teacher) put_params(arrays, "teacher.", state.teacher);
  for (std::size_t i = 0; i < state.velocity.size(); ++i) {
    arrays["velocity." + state.student.items().at(i).name] = &state.velocity[i];
  }

  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.pod(kCheckpointVersion);
  w.pod(static_cast<std::uint64_t>(htext.size()));
  w.bytes(htext.data(), htext.size());
  w.pod(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, t] : arrays) {
    w.pod(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    const Shape4& s = t->shape();
    for (int d : {s.n, s.c, s.h, s.w}) w.pod(static_cast<std::int32_t>(d));
    w.bytes(t->data(), t->size() * sizeof(double));
  }
  const std::uint32_t crc = crc_of(w.buffer().data(), w.buffer().size());
  w.pod(crc);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    f.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!f) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  return meta_from(parse(path, false).header);
}

TrainerState load_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg,
                             const DetectorConfig& dcfg) {
  const Loaded ld = parse(path, true);
  const CheckpointMeta meta = meta_from(ld.header);
  if (meta.config_hash != cfg.hash()) {
    throw ConfigError(path.string() + " was written under config hash " +
                      std::to_string(meta.config_hash) + ", current config hashes to " +
                      std::to_string(cfg.hash()));
  }
  TrainerState s;
  s.student = restore_params(ld, "student.", dcfg);
  s.has_teacher = meta.has_teacher;
  if (s.has_teacher) s.teacher = restore_params(ld, "teacher.", dcfg);
  for (const auto& p : s.student.items()) {
    auto it = ld.arrays.find("velocity." + p.name);
    if (it == ld.arrays.end()) throw ShapeError("checkpoint lacks velocity for " + p.name);
    s.velocity.push_back(it->second);
  }
  s.epoch = meta.epoch;
  s.step = meta.step;
  if (meta.phase == "burnin") {
    s.phase = Phase::kBurnin;
  } else if (meta.phase == "ssod") {
    s.phase = Phase::kSsod;
  } else {
    throw IntegrityError(path.string() + ": unknown phase " + meta.phase);
  }
  const auto& h = ld.header;
  h.at("stats").get_to(s.stats);
  const auto& sch = h.at("schedule");
  sch.at("epoch").get_to(s.schedule.epoch);
  sch.at("tau1").get_to(s.schedule.tau1);
  sch.at("tau2").get_to(s.schedule.tau2);
  sch.at("alpha").get_to(s.schedule.alpha);
  h.at("schedule_sealed").get_to(s.schedule_sealed);
  h.at("rng_state").get_to(s.rng_state);
  h.at("metrics").get_to(s.metrics);
  return s;
}

TrainConfig checkpoint_config(const std::filesystem::path& path) {
  return TrainConfig::from_flat(read_checkpoint_meta(path).config);
}

DetectorParams checkpoint_eval_params(const std::filesystem::path& path,
                                      const DetectorConfig& dcfg) {
  const Loaded ld = parse(path, true);
  const bool teacher = ld.header.at("has_teacher").get<bool>();
  return restore_params(ld, teacher ? "teacher." : "student.", dcfg);
}

}  // namespace ssod
