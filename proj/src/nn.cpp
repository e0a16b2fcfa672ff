// SPDX-License-Identifier: Apache-2.0
#include "reorient/nn.hpp"

#include <cstring>
#include <fstream>

namespace reorient::nn {

namespace {

constexpr char kMagic[4] = {'R', 'O', 'R', 'I'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw std::runtime_error(std::string("checkpoint: truncated file while reading ") + what);
  }
  return value;
}

}  // namespace

void Checkpoint::put(const std::string& name, const MatX<float>& tensor) {
  Entry entry;
  entry.dims = {std::uint32_t(tensor.rows()), std::uint32_t(tensor.cols())};
  entry.data.assign(tensor.data(), tensor.data() + tensor.size());
  tensors_[name] = std::move(entry);
}

void Checkpoint::put(const std::string& name, const std::vector<float>& data,
                     const std::vector<std::uint32_t>& dims) {
  std::size_t expected = 1;
  for (auto d : dims) expected *= d;
  if (expected != data.size()) {
    throw std::invalid_argument("checkpoint: dims do not match payload size");
  }
  tensors_[name] = Entry{dims, data};
}

bool Checkpoint::contains(const std::string& name) const {
  return tensors_.count(name) > 0;
}

MatX<float> Checkpoint::get_matrix(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw std::runtime_error("checkpoint: missing tensor " + name);
  }
  const auto& entry = it->second;
  if (entry.dims.size() != 2) {
    throw std::runtime_error("checkpoint: tensor " + name + " is not 2-D");
  }
  MatX<float> m(entry.dims[0], entry.dims[1]);
  std::copy(entry.data.begin(), entry.data.end(), m.data());
  return m;
}

const std::vector<float>& Checkpoint::get_raw(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw std::runtime_error("checkpoint: missing tensor " + name);
  }
  return it->second.data;
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, entry] : tensors_) out.push_back(name);
  return out;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  const std::string meta_str = meta.dump();
  write_pod(out, std::uint32_t(meta_str.size()));
  out.write(meta_str.data(), std::streamsize(meta_str.size()));
  write_pod(out, std::uint32_t(tensors_.size()));
  for (const auto& [name, entry] : tensors_) {
    write_pod(out, std::uint16_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    write_pod(out, std::uint8_t(entry.dims.size()));
    for (auto d : entry.dims) write_pod(out, d);
    out.write(reinterpret_cast<const char*>(entry.data.data()),
              std::streamsize(entry.data.size() * sizeof(float)));
  }
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic bytes in " + path);
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw std::runtime_error(
        "checkpoint: incompatible version " + std::to_string(version) +
        " (expected " + std::to_string(kVersion) + ")");
  }
  Checkpoint ck;
  const auto meta_len = read_pod<std::uint32_t>(in, "metadata length");
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), meta_len);
  if (!in) throw std::runtime_error("checkpoint: truncated metadata");
  ck.meta = meta_len > 0 ? nlohmann::json::parse(meta_str)
                         : nlohmann::json::object();
  const auto count = read_pod<std::uint32_t>(in, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint16_t>(in, "tensor name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = read_pod<std::uint8_t>(in, "tensor rank");
    Entry entry;
    std::size_t total = 1;
    for (int d = 0; d < rank; ++d) {
      entry.dims.push_back(read_pod<std::uint32_t>(in, "tensor dim"));
      total *= entry.dims.back();
    }
    entry.data.resize(total);
    in.read(reinterpret_cast<char*>(entry.data.data()),
            std::streamsize(total * sizeof(float)));
    if (!in) {
      throw std::runtime_error("checkpoint: truncated tensor payload for " +
                               name);
    }
    ck.tensors_[name] = std::move(entry);
  }
  return ck;
}

}  // namespace reorient::nn
