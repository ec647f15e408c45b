#include "unireid/train/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "unireid/config/run_config.h"
#include "unireid/errors.h"

namespace unireid {
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "tensor blobs are written in native little-endian order");

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("short write to " + path.string());
}

nlohmann::json parse_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& ex) {
    throw IoError("malformed " + path.string() + ": " + ex.what());
  }
}

}  // namespace

nlohmann::json CheckpointMeta::to_json() const {
  return {{"config", config},
          {"model_config", model_config},
          {"config_hash", config_hash},
          {"stage", stage},
          {"epoch", epoch},
          {"step", step},
          {"step_in_epoch", step_in_epoch},
          {"sampler", sampler},
          {"history", history},
          {"vocab", vocab},
          {"identities", identities}};
}

CheckpointMeta CheckpointMeta::from_json(const nlohmann::json& j) {
  CheckpointMeta m;
  try {
    m.config = j.at("config");
    m.model_config = j.at("model_config");
    m.config_hash = j.at("config_hash").get<std::string>();
    m.stage = j.at("stage").get<int>();
    m.epoch = j.at("epoch").get<int64_t>();
    m.step = j.at("step").get<int64_t>();
    m.step_in_epoch = j.at("step_in_epoch").get<int64_t>();
    m.sampler = j.at("sampler");
    m.history = j.at("history");
    m.vocab = j.at("vocab");
    m.identities = j.at("identities");
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("malformed checkpoint metadata: ") + ex.what());
  }
  return m;
}

const torch::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [key, t] : tensors) {
    if (key == name) return &t;
  }
  return nullptr;
}

ModelConfig Checkpoint::model_config() const { return meta.model_config.get<ModelConfig>(); }

void write_tensor_blobs(const fs::path& dir, const NamedTensors& tensors) {
  std::ofstream out(dir / "tensors.bin", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "tensors.bin").string());
  nlohmann::json manifest = nlohmann::json::array();
  int64_t offset = 0;
  for (const auto& [name, tensor] : tensors) {
    auto t = tensor.detach().to(torch::kFloat32).contiguous();
    const auto bytes = t.numel() * static_cast<int64_t>(sizeof(float));
    out.write(reinterpret_cast<const char*>(t.data_ptr<float>()), bytes);
    manifest.push_back({{"name", name}, {"shape", tensor.sizes().vec()}, {"offset", offset}});
    offset += bytes;
  }
  if (!out) throw IoError("short write to " + (dir / "tensors.bin").string());
  write_file(dir / "blobs.json", manifest.dump(1) + "\n");
}

NamedTensors read_tensor_blobs(const fs::path& dir) {
  const auto manifest = parse_json_file(dir / "blobs.json");
  const auto data = read_file(dir / "tensors.bin");
  NamedTensors out;
  try {
    for (const auto& entry : manifest) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<int64_t>>();
      const auto offset = entry.at("offset").get<int64_t>();
      auto t = torch::empty(shape, torch::kFloat32);
      const auto bytes = t.numel() * static_cast<int64_t>(sizeof(float));
      if (offset < 0 || offset + bytes > static_cast<int64_t>(data.size())) {
        throw IoError("blob '" + name + "' lies outside tensors.bin in " + dir.string());
      }
      std::memcpy(t.data_ptr<float>(), data.data() + offset, static_cast<size_t>(bytes));
      out.emplace_back(name, t);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw IoError("malformed blobs.json in " + dir.string() + ": " + ex.what());
  }
  return out;
}

void save_checkpoint(const fs::path& dir, const Checkpoint& checkpoint) {
  const auto tmp = fs::path(dir.string() + ".tmp");
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp, ec);
  if (ec) throw IoError("cannot create " + tmp.string() + ": " + ec.message());
  write_tensor_blobs(tmp, checkpoint.tensors);
  write_file(tmp / "metadata.json", checkpoint.meta.to_json().dump(2) + "\n");
  fs::remove_all(dir, ec);
  fs::rename(tmp, dir, ec);
  if (ec) throw IoError("cannot move checkpoint into " + dir.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("checkpoint directory " + dir.string() + " not found");
  Checkpoint c;
  c.meta = CheckpointMeta::from_json(parse_json_file(dir / "metadata.json"));
  c.tensors = read_tensor_blobs(dir);
  return c;
}

void check_config_hash(const Checkpoint& checkpoint, const ModelConfig& expected,
                       bool allow_mismatch) {
  const auto want = model_config_hash(expected);
  if (checkpoint.meta.config_hash != want && !allow_mismatch) {
    throw ConfigError("checkpoint config hash " + checkpoint.meta.config_hash +
                      " does not match the model config (" + want +
                      "); pass the override to load anyway");
  }
}

NamedTensors module_tensors(const torch::nn::Module& module) {
  NamedTensors out;
  for (const auto& item : module.named_parameters()) {
    out.emplace_back("model/" + item.key(), item.value());
  }
  for (const auto& item : module.named_buffers()) {
    out.emplace_back("model/" + item.key(), item.value());
  }
  return out;
}

void load_module_tensors(torch::nn::Module& module, const Checkpoint& checkpoint) {
  torch::NoGradGuard no_grad;
  auto assign = [&](const std::string& name, torch::Tensor& dst) {
    const auto* src = checkpoint.find("model/" + name);
    if (src == nullptr) throw ConfigError("checkpoint lacks tensor '" + name + "'");
    if (src->sizes() != dst.sizes()) {
      std::ostringstream msg;
      msg << "checkpoint tensor '" << name << "' has shape " << src->sizes()
          << ", the model expects " << dst.sizes();
      throw ConfigError(msg.str());
    }
    dst.copy_(src->to(dst.dtype()));
  };
  for (auto& item : module.named_parameters()) assign(item.key(), item.value());
  for (auto& item : module.named_buffers()) assign(item.key(), item.value());
}

}  // namespace unireid
