// Copyright 2026 The descnet Authors.
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

// Checkpoint layout (all integers and floats little-endian):
//
//   "DSCNETCK"  u32 version  u64 vocab_hash
//   u32 n + n bytes of config JSON
//   u8 trainable  u64 oov_seed
//   tensors: u64 rows, u64 cols, rows*cols f64 in row-major order, for
//     words, pos, each name bank (kernel, bias), each description bank
//     (kernel, bias), dense1, dense1_bias, dense2, dense2_bias
//   u64 FNV-1a of every preceding byte

#include <bit>
#include <cstring>

#include "descnet/nnet.h"
#include "descnet/text.h"

namespace descnet::nnet {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'C', 'N', 'E', 'T', 'C', 'K'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(b[i], b[sizeof(T) - 1 - i]);
    }
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    v = to_little(v);
    const auto* p = reinterpret_cast<const char*>(&v);
    out_.append(p, sizeof(T));
  }
  void bytes(std::string_view s) { out_.append(s); }

  template <typename Matrix>
  void tensor(const Matrix& m) {
    put<uint64_t>(static_cast<uint64_t>(m.rows()));
    put<uint64_t>(static_cast<uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(m(i, j));
    }
  }

  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  template <typename Matrix>
  void tensor(Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
    const auto r = get<uint64_t>();
    const auto c = get<uint64_t>();
    if (r != static_cast<uint64_t>(rows) || c != static_cast<uint64_t>(cols)) {
      throw Error(std::string("checkpoint: unexpected shape for ") + what);
    }
    m.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = get<double>();
    }
  }
  // Tensor whose shape is only known from the file.
  template <typename Matrix>
  void tensor_any(Matrix& m, const char* what) {
    const auto r = get<uint64_t>();
    const auto c = get<uint64_t>();
    if (r > (1ULL << 32) || c > (1ULL << 20) || r * c * 8 > data_.size()) {
      throw Error(std::string("checkpoint: implausible shape for ") + what);
    }
    m.resize(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>();
    }
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw Error("checkpoint: truncated file");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const CnnModel& m) {
  Writer w;
  w.bytes(std::string_view(kMagic, sizeof(kMagic)));
  w.put<uint32_t>(kVersion);
  w.put<uint64_t>(m.vocab_hash);
  const std::string config = config_to_json(m.config);
  w.put<uint32_t>(static_cast<uint32_t>(config.size()));
  w.bytes(config);
  w.put<uint8_t>(m.embeddings.trainable ? 1 : 0);
  w.put<uint64_t>(m.embeddings.oov_seed);
  w.tensor(m.embeddings.words);
  w.tensor(m.embeddings.pos);
  for (const auto* banks : {&m.name_convs, &m.desc_convs}) {
    for (const ConvBank& b : *banks) {
      w.tensor(b.kernel);
      w.tensor(b.bias);
    }
  }
  w.tensor(m.dense1);
  w.tensor(m.dense1_bias);
  w.tensor(m.dense2);
  w.tensor(m.dense2_bias);
  const uint64_t sum = fnv1a64(w.str());
  w.put<uint64_t>(sum);
  return std::move(w.str());
}

CnnModel deserialize_model(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw Error("checkpoint: bad magic bytes");
  }
  const auto version = r.get<uint32_t>();
  if (version != kVersion) {
    throw Error("checkpoint: unsupported format version " +
                std::to_string(version));
  }
  CnnModel m;
  m.vocab_hash = r.get<uint64_t>();
  const auto config_len = r.get<uint32_t>();
  m.config = config_from_json(r.bytes(config_len));
  m.config.validate();
  m.embeddings.trainable = r.get<uint8_t>() != 0;
  m.embeddings.oov_seed = r.get<uint64_t>();
  r.tensor_any(m.embeddings.words, "word embeddings");
  r.tensor_any(m.embeddings.pos, "POS embeddings");
  if (m.embeddings.words.cols() < 1) {
    throw Error("checkpoint: empty word embeddings");
  }
  const auto D = m.embeddings.words.cols();
  const auto d_desc = D + m.embeddings.pos.cols();
  const int F = m.config.feature_maps;
  for (int pass = 0; pass < 2; ++pass) {
    auto& banks = pass == 0 ? m.name_convs : m.desc_convs;
    const auto d_in = pass == 0 ? D : d_desc;
    for (int w : m.config.window_sizes) {
      ConvBank b;
      b.window = w;
      r.tensor(b.kernel, w * d_in, F, "convolution kernel");
      r.tensor(b.bias, F, 1, "convolution bias");
      banks.push_back(std::move(b));
    }
  }
  const int R = m.config.representation_dim();
  const int H = m.config.hidden_dim;
  const int C = m.config.class_count;
  r.tensor(m.dense1, R, H, "dense1");
  r.tensor(m.dense1_bias, H, 1, "dense1 bias");
  r.tensor(m.dense2, H, C, "dense2");
  r.tensor(m.dense2_bias, C, 1, "dense2 bias");
  const uint64_t expected = fnv1a64(bytes.substr(0, r.pos()));
  if (r.get<uint64_t>() != expected) throw Error("checkpoint: checksum mismatch");
  if (!r.done()) throw Error("checkpoint: trailing bytes");
  return m;
}

void save_model(const CnnModel& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

CnnModel load_model(const std::filesystem::path& path) {
  try {
    return deserialize_model(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace descnet::nnet
