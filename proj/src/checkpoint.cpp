// SPDX-License-Identifier: Apache-2.0
#include "recap/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace recap {

namespace {

constexpr char kMagic[8] = {'R', 'E', 'C', 'A', 'P', 'C', 'K', 'P'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CheckpointError("checkpoint truncated");
  return v;
}

}  // namespace

Checkpoint make_checkpoint(const nn::ParameterStore& params, std::string fingerprint,
                           nlohmann::json metadata) {
  Checkpoint c;
  c.fingerprint = std::move(fingerprint);
  c.metadata = std::move(metadata);
  for (const auto& p : params.all()) {
    c.names.push_back(p.name);
    c.tensors.push_back(p.var.value());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  nlohmann::json header;
  header["fingerprint"] = ckpt.fingerprint;
  header["metadata"] = ckpt.metadata;
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < ckpt.names.size(); ++i)
    tensors.push_back({{"name", ckpt.names[i]}, {"rows", ckpt.tensors[i].rows()}, {"cols", ckpt.tensors[i].cols()}});
  header["tensors"] = tensors;
  const std::string text = header.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + tmp);
    out.write(kMagic, sizeof kMagic);
    write_pod(out, kCheckpointVersion);
    write_pod(out, static_cast<std::uint64_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : ckpt.tensors)
      out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!out) throw CheckpointError("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CheckpointError(path.string() + " is not a checkpoint");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto len = read_pod<std::uint64_t>(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw CheckpointError("checkpoint truncated");

  Checkpoint c;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    c.fingerprint = header.at("fingerprint").get<std::string>();
    c.metadata = header.at("metadata");
    for (const auto& t : header.at("tensors")) {
      c.names.push_back(t.at("name").get<std::string>());
      ag::Matrix m(t.at("rows").get<ag::Index>(), t.at("cols").get<ag::Index>());
      c.tensors.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  for (auto& t : c.tensors) {
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw CheckpointError("checkpoint truncated");
  }
  return c;
}

void restore_parameters(nn::ParameterStore& params, const Checkpoint& ckpt) {
  auto& all = params.all();
  if (all.size() != ckpt.names.size())
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.names.size()) + " tensors, model has " +
                          std::to_string(all.size()));
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& t = ckpt.tensors[i];
    if (all[i].name != ckpt.names[i] || all[i].var.rows() != t.rows() || all[i].var.cols() != t.cols())
      throw CheckpointError("checkpoint tensor '" + ckpt.names[i] + "' does not match model parameter '" +
                            all[i].name + "'");
  }
  for (std::size_t i = 0; i < all.size(); ++i) all[i].var.mutable_value() = ckpt.tensors[i];
}

}  // namespace recap
