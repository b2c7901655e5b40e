// Copyright 2026 The semiasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "semiasr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "semiasr/errors.hpp"

namespace semiasr {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'A', 'S', 'R', 'C', 'K', 'P', 'T'};
constexpr const char* kOptGrad = "opt.sq_grad.";
constexpr const char* kOptDelta = "opt.sq_delta.";

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void pod(T v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string where) : in_(in), where_(std::move(where)) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) fail("truncated");
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    if (n > (1u << 20)) fail("implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) fail("truncated");
    return s;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw IoError("checkpoint " + where_ + ": " + what);
  }

 private:
  std::istream& in_;
  std::string where_;
};

std::string arch_string(const ArchConfig& a) {
  return std::to_string(a.feat_dim) + " " + std::to_string(a.hidden) + " " +
         std::to_string(a.shared_layers) + " " + std::to_string(a.decoder_layers) + " " +
         std::to_string(a.vocab_size) + " " + std::to_string(a.subsample);
}

std::size_t parse_size(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw IoError("checkpoint field '" + key + "' is not a count: " + s);
  }
}

const std::string& meta_at(const Checkpoint& c, const std::string& key) {
  auto it = c.meta.find(key);
  if (it == c.meta.end()) throw IoError("checkpoint lacks field '" + key + "'");
  return it->second;
}

void expect_kind(const Checkpoint& c, const std::string& kind,
                 const std::filesystem::path& path) {
  if (c.kind != kind)
    throw IoError(path.string() + " is a '" + c.kind + "' checkpoint, expected '" + kind + "'");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    Writer w(out);
    out.write(kMagic, sizeof kMagic);
    w.pod(kCheckpointVersion);
    w.str(ckpt.kind);
    w.pod(static_cast<std::uint32_t>(ckpt.meta.size()));
    for (const auto& [k, v] : ckpt.meta) {
      w.str(k);
      w.str(v);
    }
    w.pod(static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
      w.str(name);
      w.pod(static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) w.pod(static_cast<std::uint64_t>(d));
      out.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw IoError("failed writing checkpoint " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("not a checkpoint file");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  Checkpoint c;
  c.kind = r.str();
  const auto n = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string k = r.str();
    c.meta[k] = r.str();
  }
  const auto m = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < m; ++i) {
    std::string name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    if (rank > 2) r.fail("tensor '" + name + "' has rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = r.pod<std::uint64_t>();
      if (d > (1ull << 28)) r.fail("tensor '" + name + "' is implausibly large");
      shape.push_back(static_cast<std::size_t>(d));
      count *= d;
    }
    Tensor t = Tensor::zeros(shape);
    if (t.size() != count) r.fail("tensor '" + name + "' size mismatch");
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) r.fail("truncated tensor '" + name + "'");
    c.tensors.emplace(std::move(name), std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes");
  return c;
}

void save_asr(const std::filesystem::path& path, const AsrCheckpoint& ckpt) {
  ckpt.params.validate();
  Checkpoint c;
  c.kind = "asr";
  c.meta = ckpt.info;
  c.meta["arch"] = arch_string(ckpt.params.arch());
  c.meta["vocab"] = ckpt.vocab.characters();
  c.tensors = ckpt.params.tensors();
  if (!ckpt.optimizer.sq_grad.empty()) {
    ckpt.optimizer.validate(ckpt.params.tensors());
    for (const auto& [name, t] : ckpt.optimizer.sq_grad) c.tensors.emplace(kOptGrad + name, t);
    for (const auto& [name, t] : ckpt.optimizer.sq_delta) c.tensors.emplace(kOptDelta + name, t);
    c.meta["opt.steps"] = std::to_string(ckpt.optimizer.steps);
  }
  save_checkpoint(path, c);
}

AsrCheckpoint load_asr(const std::filesystem::path& path) {
  Checkpoint c = load_checkpoint(path);
  expect_kind(c, "asr", path);
  AsrCheckpoint out;
  std::istringstream arch_in(meta_at(c, "arch"));
  ArchConfig arch;
  if (!(arch_in >> arch.feat_dim >> arch.hidden >> arch.shared_layers >> arch.decoder_layers >>
        arch.vocab_size >> arch.subsample))
    throw IoError("checkpoint " + path.string() + " has a malformed architecture");
  out.vocab = Vocabulary::from_characters(meta_at(c, "vocab"));
  if (out.vocab.size() != arch.vocab_size)
    throw IoError("checkpoint " + path.string() + ": vocabulary size disagrees with model");
  ParamMap params;
  for (auto& [name, t] : c.tensors) {
    if (name.rfind(kOptGrad, 0) == 0)
      out.optimizer.sq_grad.emplace(name.substr(std::strlen(kOptGrad)), std::move(t));
    else if (name.rfind(kOptDelta, 0) == 0)
      out.optimizer.sq_delta.emplace(name.substr(std::strlen(kOptDelta)), std::move(t));
    else
      params.emplace(name, std::move(t));
  }
  try {
    out.params = ModelParams::from_tensors(arch, std::move(params));
  } catch (const Error& e) {
    throw IoError("checkpoint " + path.string() + ": " + e.what());
  }
  if (!out.optimizer.sq_grad.empty() || !out.optimizer.sq_delta.empty()) {
    out.optimizer.validate(out.params.tensors());
    out.optimizer.steps = parse_size(meta_at(c, "opt.steps"), "opt.steps");
  }
  for (auto& [k, v] : c.meta)
    if (k != "arch" && k != "vocab" && k != "opt.steps") out.info[k] = v;
  return out;
}

void save_lm(const std::filesystem::path& path, const LmCheckpoint& ckpt) {
  ckpt.params.validate();
  Checkpoint c;
  c.kind = "lm";
  c.meta = ckpt.info;
  c.meta["arch"] = std::to_string(ckpt.params.arch().vocab_size) + " " +
                   std::to_string(ckpt.params.arch().hidden);
  c.meta["vocab"] = ckpt.vocab.characters();
  c.tensors = ckpt.params.tensors();
  save_checkpoint(path, c);
}

LmCheckpoint load_lm(const std::filesystem::path& path) {
  Checkpoint c = load_checkpoint(path);
  expect_kind(c, "lm", path);
  LmCheckpoint out;
  std::istringstream arch_in(meta_at(c, "arch"));
  LmArch arch;
  if (!(arch_in >> arch.vocab_size >> arch.hidden))
    throw IoError("checkpoint " + path.string() + " has a malformed architecture");
  out.vocab = Vocabulary::from_characters(meta_at(c, "vocab"));
  try {
    out.params = LmParams::from_tensors(arch, std::move(c.tensors));
  } catch (const Error& e) {
    throw IoError("checkpoint " + path.string() + ": " + e.what());
  }
  for (auto& [k, v] : c.meta)
    if (k != "arch" && k != "vocab") out.info[k] = v;
  return out;
}

}  // namespace semiasr
