// Copyright 2026 The Fisher Probe Authors
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

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fisher_probe/error.hpp"
#include "fisher_probe/models.hpp"

namespace fisher_probe::models {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& offset) {
  if (offset + sizeof(T) > bytes.size()) throw ParseError("checkpoint truncated");
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  const Model& model = checkpoint.model;
  nlohmann::json header;
  header["spec"] = to_json(model.spec);
  header["vocab_hash"] = checkpoint.vocab_hash ? nlohmann::json(hex64(*checkpoint.vocab_hash)) : nlohmann::json();
  header["metadata"] = checkpoint.metadata;
  auto& tensors = header["tensors"] = nlohmann::json::array();
  for (const auto& p : model.params) tensors.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  const std::string header_text = header.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  for (const auto& p : model.params) {
    const auto data = p.value.data();
    out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw ParseError("not a fisher-probe checkpoint (bad magic)");
  }
  std::size_t offset = sizeof(kCheckpointMagic);
  const auto version = take<std::uint32_t>(bytes, offset);
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = take<std::uint64_t>(bytes, offset);
  if (header_len > bytes.size() - offset) throw ParseError("checkpoint truncated in header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(offset, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  offset += header_len;

  Checkpoint ck;
  autograd::ParamSet params;
  ModelSpec spec;
  try {
    spec = spec_from_json(header.at("spec"));
    if (!header["vocab_hash"].is_null()) {
      ck.vocab_hash = std::stoull(header["vocab_hash"].get<std::string>(), nullptr, 16);
    }
    if (header.contains("metadata")) ck.metadata = header["metadata"];

    for (const auto& t : header.at("tensors")) {
      Tensor::Shape shape = t.at("shape").get<Tensor::Shape>();
      const std::size_t n = shape_size(shape);
      if (n > (bytes.size() - offset) / sizeof(double)) throw ParseError("checkpoint truncated in tensor data");
      std::vector<double> values(n);
      std::memcpy(values.data(), bytes.data() + offset, n * sizeof(double));
      offset += n * sizeof(double);
      params.add(t.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid checkpoint header: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ParseError(std::string("invalid checkpoint header: ") + e.what());
  }
  if (offset != bytes.size()) throw ParseError("checkpoint has trailing bytes");
  try {
    ck.model = assemble_model(spec, std::move(params));
  } catch (const ShapeError& e) {
    throw ParseError(std::string("checkpoint tensors do not fit the model spec: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace fisher_probe::models
