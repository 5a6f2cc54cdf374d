#include "spad/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <zlib.h>

namespace spad {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'P', 'A', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint32_t crc_of(const std::string& payload) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
}

template <typename U>
void put(std::ostream& out, U value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <typename U>
bool get(std::istream& in, U& value) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof(U)));
}

std::string array_bytes(const std::vector<float>& values) {
  std::string s(values.size() * sizeof(float), '\0');
  std::memcpy(s.data(), values.data(), s.size());
  return s;
}

nlohmann::json layout_json(const ParamSet<float>& p) {
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& a : p) arrays.push_back({{"name", a.name}, {"dtype", "float32"}, {"shape", a.shape}});
  return arrays;
}

}  // namespace

ConvAutoencoder<float> Checkpoint::model() const {
  ConvAutoencoder<float> m(architecture);
  m.set_params(params);
  return m;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> members;
  nlohmann::json meta = {{"schema_version", ck.schema_version},
                         {"epoch", ck.epoch},
                         {"global_step", ck.global_step},
                         {"seed", ck.seed},
                         {"config", ck.config.to_json()},
                         {"spl_state", ck.spl.to_json()},
                         {"optimizer", {{"type", "sgd_momentum"}, {"buffers", "momentum/"}}},
                         {"arrays", layout_json(ck.params)}};
  members.emplace_back("meta.json", meta.dump(2));
  members.emplace_back("architecture.json", ck.architecture.to_json().dump(2));
  for (const auto& a : ck.params) members.emplace_back("params/" + a.name, array_bytes(a.values));
  for (const auto& a : ck.momentum) members.emplace_back("momentum/" + a.name, array_bytes(a.values));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kFormatVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(members.size()));
    for (const auto& [name, payload] : members) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint64_t>(out, payload.size());
      out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
      put<std::uint32_t>(out, crc_of(payload));
    }
    if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string where = "checkpoint " + path.string();

  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw CheckpointError(where + ": not a checkpoint archive (bad magic)");
  std::uint32_t version = 0, count = 0;
  if (!get(in, version) || !get(in, count)) throw CheckpointError(where + ": truncated header");
  if (version != kFormatVersion)
    throw CheckpointError(where + ": unsupported archive format version " + std::to_string(version));

  std::map<std::string, std::string> members;
  std::string previous = "<header>";
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    if (!get(in, name_len) || name_len > 4096)
      throw CheckpointError(where + ": corrupted member table after '" + previous + "'");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len))
      throw CheckpointError(where + ": truncated member name after '" + previous + "'");
    std::uint64_t size = 0;
    if (!get(in, size) || size > (std::uint64_t{1} << 34))
      throw CheckpointError(where + ": corrupted length of member '" + name + "'");
    std::string payload(size, '\0');
    std::uint32_t crc = 0;
    if (!in.read(payload.data(), static_cast<std::streamsize>(size)) || !get(in, crc))
      throw CheckpointError(where + ": truncated member '" + name + "'");
    if (crc != crc_of(payload)) throw CheckpointError(where + ": checksum mismatch in member '" + name + "'");
    members.emplace(name, std::move(payload));
    previous = name;
  }

  auto member = [&](const std::string& name) -> const std::string& {
    auto it = members.find(name);
    if (it == members.end()) throw CheckpointError(where + ": missing member '" + name + "'");
    return it->second;
  };

  Checkpoint ck;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(member("meta.json"));
    ck.schema_version = meta.at("schema_version").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(where + ": malformed member 'meta.json': " + e.what());
  }
  if (ck.schema_version != kCheckpointSchemaVersion)
    throw CheckpointError(where + ": schema version " + std::to_string(ck.schema_version) + " but expected " +
                          std::to_string(kCheckpointSchemaVersion));
  try {
    ck.epoch = meta.at("epoch").get<std::int64_t>();
    ck.global_step = meta.at("global_step").get<std::int64_t>();
    ck.seed = meta.at("seed").get<std::uint64_t>();
    ck.config = TrainConfig::from_json(meta.at("config"));
    ck.spl = SplState::from_json(meta.at("spl_state"));
  } catch (const std::exception& e) {
    throw CheckpointError(where + ": malformed member 'meta.json': " + e.what());
  }
  try {
    ck.architecture = ArchitectureDescriptor::from_json(nlohmann::json::parse(member("architecture.json")));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(where + ": malformed member 'architecture.json': " + e.what());
  }

  ConvAutoencoder<float> skeleton(ck.architecture);
  ck.params = skeleton.params();
  ck.momentum = skeleton.params();
  const auto& arrays = meta.at("arrays");
  if (arrays.size() != ck.params.size())
    throw CheckpointError(where + ": member 'meta.json' lists " + std::to_string(arrays.size()) +
                          " arrays, architecture needs " + std::to_string(ck.params.size()));
  for (std::size_t i = 0; i < ck.params.size(); ++i) {
    const auto& entry = arrays[i];
    if (entry.at("name").get<std::string>() != ck.params[i].name ||
        entry.at("shape").get<std::vector<int>>() != ck.params[i].shape ||
        entry.at("dtype").get<std::string>() != "float32")
      throw CheckpointError(where + ": array '" + ck.params[i].name + "' does not match the architecture");
    for (auto* set : {&ck.params, &ck.momentum}) {
      auto& a = (*set)[i];
      const std::string name = (set == &ck.params ? "params/" : "momentum/") + a.name;
      const std::string& bytes = member(name);
      if (bytes.size() != a.values.size() * sizeof(float))
        throw CheckpointError(where + ": member '" + name + "' has wrong size");
      std::memcpy(a.values.data(), bytes.data(), bytes.size());
    }
  }
  return ck;
}

}  // namespace spad
