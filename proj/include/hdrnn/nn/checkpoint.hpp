#pragma once

// Binary checkpoint, all fields little-endian:
//   "HDRNN1"
//   u64 seed, u32 layer count, per layer {u8 kind, u32 in, u32 out, u8 bn, f64 dropout_p}
//   u8 flags (bit 0: trained)
//   u32 metadata length, metadata bytes (free-form text, JSON by convention)
//   u32 tensor count, per tensor {u32 rank, u32 dims[rank], f32 data[...]}
// Tensors are the parameters in declaration order followed by the running
// mean/variance of every BN layer.

#include <cstdint>
#include <cstring>
#include <string>

#include "hdrnn/error.hpp"
#include "hdrnn/image_io.hpp"
#include "hdrnn/nn/network.hpp"

namespace hdrnn::nn {

inline constexpr char kCheckpointMagic[] = "HDRNN1";

template <typename T>
struct Checkpoint {
  Network<T> net;
  std::string metadata;
  bool trained = false;
};

namespace detail {

inline void put_u8(Bytes& b, std::uint8_t v) { b.push_back(v); }
inline void put_u32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64(Bytes& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_f32(Bytes& b, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(b, u);
}
inline void put_f64(Bytes& b, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  put_u64(b, u);
}

class Reader {
 public:
  explicit Reader(ByteView b) : b_(b) {}
  const std::uint8_t* take(std::size_t n) {
    if (b_.size() - pos_ < n) fail(ErrorCategory::truncation, "checkpoint truncated at byte " + std::to_string(pos_));
    const std::uint8_t* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return *take(1); }
  std::uint32_t u32() {
    const auto* p = take(4);
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (std::uint64_t(u32()) << 32);
  }
  float f32() {
    const std::uint32_t u = u32();
    float f;
    std::memcpy(&f, &u, 4);
    return f;
  }
  double f64() {
    const std::uint64_t u = u64();
    double d;
    std::memcpy(&d, &u, 8);
    return d;
  }

 private:
  ByteView b_;
  std::size_t pos_ = 0;
};

template <typename T>
void put_tensor(Bytes& out, const Tensor4<T>& t) {
  put_u32(out, 4);
  for (auto d : {t.n(), t.c(), t.h(), t.w()}) put_u32(out, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < t.size(); ++i) put_f32(out, static_cast<float>(t[i]));
}

template <typename T>
void get_tensor(Reader& in, Tensor4<T>& t, const std::string& what) {
  const std::uint32_t rank = in.u32();
  require(rank == 4, ErrorCategory::format, "checkpoint: tensor '" + what + "' has rank " + std::to_string(rank));
  Dims d{in.u32(), in.u32(), in.u32(), in.u32()};
  require(d == t.dims(), ErrorCategory::shape, "checkpoint: tensor '" + what + "' has dims " + d.str() + ", expected " + t.dims().str());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(in.f32());
}

}  // namespace detail

template <typename T>
Bytes save_checkpoint(const Network<T>& net, const std::string& metadata = {}, bool trained = true) {
  using namespace detail;
  Bytes out(kCheckpointMagic, kCheckpointMagic + 6);
  const auto& spec = net.spec();
  put_u64(out, spec.seed);
  put_u32(out, static_cast<std::uint32_t>(spec.layers.size()));
  for (const auto& l : spec.layers) {
    put_u8(out, static_cast<std::uint8_t>(l.kind));
    put_u32(out, static_cast<std::uint32_t>(l.in_depth));
    put_u32(out, static_cast<std::uint32_t>(l.out_depth));
    put_u8(out, l.batchnorm ? 1 : 0);
    put_f64(out, l.dropout_p);
  }
  put_u8(out, trained ? 1 : 0);
  put_u32(out, static_cast<std::uint32_t>(metadata.size()));
  out.insert(out.end(), metadata.begin(), metadata.end());

  std::uint32_t count = static_cast<std::uint32_t>(net.params().size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
    if (spec.layers[i].batchnorm) count += 2;
  put_u32(out, count);
  for (const auto& p : net.params()) put_tensor(out, p.value);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (!spec.layers[i].batchnorm) continue;
    const auto& r = net.running_stats(i);
    Tensor4<T> m(r.mean.size(), 1, 1, 1), v(r.var.size(), 1, 1, 1);
    std::copy(r.mean.begin(), r.mean.end(), m.vec().begin());
    std::copy(r.var.begin(), r.var.end(), v.vec().begin());
    put_tensor(out, m);
    put_tensor(out, v);
  }
  return out;
}

template <typename T>
Checkpoint<T> load_checkpoint(ByteView bytes) {
  using namespace detail;
  Reader in(bytes);
  const auto* magic = in.take(6);
  if (std::memcmp(magic, kCheckpointMagic, 6) != 0) fail(ErrorCategory::format, "not an HDRNN1 checkpoint");
  NetworkSpec spec;
  spec.seed = in.u64();
  const std::uint32_t nlayers = in.u32();
  require(nlayers > 0 && nlayers < 4096, ErrorCategory::format, "checkpoint: implausible layer count");
  for (std::uint32_t i = 0; i < nlayers; ++i) {
    LayerSpec l;
    const std::uint8_t kind = in.u8();
    require(kind <= 2, ErrorCategory::format, "checkpoint: unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.in_depth = in.u32();
    l.out_depth = in.u32();
    l.batchnorm = in.u8() != 0;
    l.dropout_p = in.f64();
    spec.layers.push_back(l);
  }
  Checkpoint<T> ck;
  ck.trained = (in.u8() & 1) != 0;
  const std::uint32_t mlen = in.u32();
  const auto* m = in.take(mlen);
  ck.metadata.assign(reinterpret_cast<const char*>(m), mlen);
  ck.net = Network<T>(spec);

  std::uint32_t expected = static_cast<std::uint32_t>(ck.net.params().size());
  for (const auto& l : spec.layers)
    if (l.batchnorm) expected += 2;
  require(in.u32() == expected, ErrorCategory::format, "checkpoint: tensor count mismatch");
  for (auto& p : ck.net.params()) get_tensor(in, p.value, p.name);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (!spec.layers[i].batchnorm) continue;
    auto& r = ck.net.running_stats(i);
    Tensor4<T> mt(r.mean.size(), 1, 1, 1), vt(r.var.size(), 1, 1, 1);
    get_tensor(in, mt, "running_mean");
    get_tensor(in, vt, "running_var");
    r.mean = mt.vec();
    r.var = vt.vec();
  }
  return ck;
}

}  // namespace hdrnn::nn
