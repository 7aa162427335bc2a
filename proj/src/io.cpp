// Copyright 2026 The ebmrec Authors
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
#include "ebmrec/io.hpp"

#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace ebmrec {

namespace {

class Writer {
 public:
  void magic(const char* m) { out_.append(m, 5); }
  void u8(std::uint8_t v) { out_.push_back(char(v)); }
  void u32(std::uint32_t v) { put(v); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) { out_ += s; }
  std::string take() { return std::move(out_); }

 private:
  template <class U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(char((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& s, const char* what) : s_(s), what_(what) {}
  void magic(const char* m) {
    if (s_.size() < 5 || s_.compare(0, 5, m) != 0)
      throw FormatError(std::string(what_) + ": bad magic, expected " + m);
    pos_ = 5;
  }
  std::uint8_t u8() { return std::uint8_t(take(1)[0]); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string bytes(std::size_t n) { return std::string(take(n), n); }
  bool done() const { return pos_ == s_.size(); }
  void expect_end() {
    if (!done()) throw FormatError(std::string(what_) + ": trailing bytes");
  }

 private:
  const char* take(std::size_t n) {
    if (s_.size() - pos_ < n) throw FormatError(std::string(what_) + ": truncated");
    const char* p = s_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <class U>
  U get() {
    const auto* p = reinterpret_cast<const unsigned char*>(take(sizeof(U)));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(p[i]) << (8 * i);
    return v;
  }
  const std::string& s_;
  const char* what_;
  std::size_t pos_ = 0;
};

std::uint32_t narrow(std::size_t v) {
  if (v > 0xffffffffu) throw FormatError("value does not fit in u32");
  return std::uint32_t(v);
}

void write_tensor(Writer& w, const std::string& name, const RealTensor& t) {
  w.u32(narrow(name.size()));
  w.bytes(name);
  w.u32(narrow(t.rank()));
  for (auto d : t.shape()) w.u32(narrow(d));
  for (double v : t.values()) w.f64(v);
}

}  // namespace

std::string encode_cimg(const ComplexImage& img) {
  Writer w;
  w.magic("CIMG1");
  w.u32(narrow(img.height()));
  w.u32(narrow(img.width()));
  w.u32(narrow(img.coils()));
  w.u8(1);
  for (const auto& v : img.values()) {
    w.f64(v.real());
    w.f64(v.imag());
  }
  return w.take();
}

ComplexImage decode_cimg(const std::string& bytes) {
  Reader r(bytes, "CIMG");
  r.magic("CIMG1");
  const std::uint32_t h = r.u32(), w = r.u32(), c = r.u32();
  if (r.u8() != 1) throw FormatError("CIMG: unsupported dtype");
  if (std::uint64_t(h) * w * c * 16 != bytes.size() - 18)
    throw FormatError("CIMG: payload size does not match header");
  ComplexImage img(h, w, c);
  for (auto& v : img.values()) {
    const double re = r.f64();
    const double im = r.f64();
    v = {re, im};
  }
  r.expect_end();
  return img;
}

std::string encode_mask(const SamplingMask& m) {
  Writer w;
  w.magic("MASK1");
  w.u32(narrow(m.height));
  w.u32(narrow(m.width));
  w.u8(std::uint8_t(m.pattern));
  w.f64(m.acceleration);
  for (auto k : m.keep) w.u8(k ? 1 : 0);
  return w.take();
}

SamplingMask decode_mask(const std::string& bytes) {
  Reader r(bytes, "MASK");
  r.magic("MASK1");
  SamplingMask m;
  m.height = r.u32();
  m.width = r.u32();
  const std::uint8_t code = r.u8();
  if (code > 3) throw FormatError("MASK: unknown pattern code");
  m.pattern = MaskPattern(code);
  m.acceleration = r.f64();
  if (bytes.size() - 22 != m.height * m.width) throw FormatError("MASK: payload size mismatch");
  m.keep.resize(m.height * m.width);
  for (auto& k : m.keep) {
    k = r.u8();
    if (k > 1) throw FormatError("MASK: entries must be 0 or 1");
  }
  r.expect_end();
  return m;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const EnergyParams& p = ckpt.params;
  Writer w;
  w.magic("EBMW1");
  w.u32(narrow(p.arch.in_channels));
  w.u32(narrow(p.arch.stem_width));
  w.u32(narrow(p.arch.blocks.size()));
  for (const auto& b : p.arch.blocks) {
    w.u32(narrow(b.width));
    w.u8(b.downsample ? 1 : 0);
  }
  std::size_t count = p.weights.tensors.size() + p.sn_u.size() + 1;
  if (ckpt.adam) count += 2 + 2 * p.weights.tensors.size();
  w.u32(narrow(count));
  for (std::size_t i = 0; i < p.weights.tensors.size(); ++i)
    write_tensor(w, p.names[i], p.weights.tensors[i]);
  for (std::size_t i = 0; i < p.sn_u.size(); ++i)
    write_tensor(w, "sn.u." + std::to_string(i), p.sn_u[i]);
  write_tensor(w, "train.iteration", RealTensor({1}, {double(ckpt.iteration)}));
  if (ckpt.adam) {
    const AdamState& a = *ckpt.adam;
    write_tensor(w, "adam.t", RealTensor({1}, {double(a.t)}));
    write_tensor(w, "adam.hyper",
                 RealTensor({4}, {a.learning_rate, a.beta1, a.beta2, a.epsilon}));
    for (std::size_t i = 0; i < p.weights.tensors.size(); ++i) {
      write_tensor(w, "adam.m." + p.names[i], a.m.tensors[i]);
      write_tensor(w, "adam.v." + p.names[i], a.v.tensors[i]);
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes, "EBMW");
  r.magic("EBMW1");
  Architecture arch;
  arch.in_channels = r.u32();
  arch.stem_width = r.u32();
  arch.blocks.resize(r.u32());
  for (auto& b : arch.blocks) {
    b.width = r.u32();
    b.downsample = r.u8() != 0;
  }
  try {
    arch.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("EBMW: invalid architecture: ") + e.what());
  }
  std::map<std::string, RealTensor> tensors;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u32());
    std::vector<std::size_t> shape(r.u32());
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.u32();
      n *= d;
    }
    if (shape.empty() || n == 0 || n > bytes.size()) throw FormatError("EBMW: bad tensor shape");
    std::vector<double> values(n);
    for (auto& v : values) v = r.f64();
    tensors.emplace(std::move(name), RealTensor(std::move(shape), std::move(values)));
  }
  r.expect_end();

  auto fetch = [&](const std::string& name, const std::vector<std::size_t>& shape) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("EBMW: missing tensor " + name);
    if (it->second.shape() != shape)
      throw FormatError("EBMW: tensor " + name + " has shape " + shape_string(it->second.shape()));
    return it->second;
  };

  Checkpoint ck;
  ck.params = zero_params(arch);
  for (std::size_t i = 0; i < ck.params.names.size(); ++i)
    ck.params.weights.tensors[i] =
        fetch(ck.params.names[i], ck.params.weights.tensors[i].shape());
  for (std::size_t i = 0; i < ck.params.sn_u.size(); ++i)
    ck.params.sn_u[i] = fetch("sn.u." + std::to_string(i), ck.params.sn_u[i].shape());
  if (tensors.count("train.iteration"))
    ck.iteration = std::size_t(fetch("train.iteration", {1})[0]);
  if (tensors.count("adam.t")) {
    AdamState a = AdamState::for_params(ck.params.weights);
    a.t = std::size_t(fetch("adam.t", {1})[0]);
    const RealTensor hyper = fetch("adam.hyper", {4});
    a.learning_rate = hyper[0];
    a.beta1 = hyper[1];
    a.beta2 = hyper[2];
    a.epsilon = hyper[3];
    for (std::size_t i = 0; i < ck.params.names.size(); ++i) {
      const auto& shape = ck.params.weights.tensors[i].shape();
      a.m.tensors[i] = fetch("adam.m." + ck.params.names[i], shape);
      a.v.tensors[i] = fetch("adam.v." + ck.params.names[i], shape);
    }
    ck.adam = std::move(a);
  }
  return ck;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("write failed for " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

void save_cimg(const std::filesystem::path& path, const ComplexImage& img) {
  write_file_atomic(path, encode_cimg(img));
}
ComplexImage load_cimg(const std::filesystem::path& path) { return decode_cimg(read_file(path)); }

void save_mask(const std::filesystem::path& path, const SamplingMask& mask) {
  write_file_atomic(path, encode_mask(mask));
}
SamplingMask load_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}
Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace ebmrec
