#include "barkour/nn.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace barkour::nn {

TensorRef ParamMap::at(const std::string& name) const {
  for (const auto& [n, t] : entries)
    if (n == name) return t;
  throw SchemaError("no parameter named " + name);
}

std::vector<TensorRef> ParamMap::tensors() const {
  std::vector<TensorRef> out;
  out.reserve(entries.size());
  for (const auto& [n, t] : entries) out.push_back(t);
  return out;
}

int64_t ParamMap::total_params() const {
  int64_t n = 0;
  for (const auto& [name, t] : entries) n += t->size();
  return n;
}

void save_checkpoint(const std::string& dir, const ParamMap& params, int64_t step,
                     const std::string& arch_json) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["dtype"] = "f32";
  manifest["step"] = step;
  manifest["arch"] =
      arch_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(arch_json);
  manifest["tensors"] = nlohmann::json::array();
  std::ofstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  int64_t offset = 0;
  for (const auto& [name, t] : params.entries) {
    manifest["tensors"].push_back(
        {{"name", name}, {"shape", t->shape}, {"offset", offset}, {"count", t->size()}});
    bin.write(reinterpret_cast<const char*>(t->val.data()),
              static_cast<std::streamsize>(t->val.size() * sizeof(float)));
    offset += t->size();
  }
  bin.close();
  std::ofstream mf(fs::path(dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
}

namespace {
nlohmann::json read_manifest(const std::string& dir) {
  std::ifstream mf(std::filesystem::path(dir) / "manifest.json");
  if (!mf) throw SchemaError("no checkpoint manifest in " + dir);
  nlohmann::json j;
  mf >> j;
  return j;
}
}  // namespace

void load_checkpoint(const std::string& dir, ParamMap& params) {
  const auto manifest = read_manifest(dir);
  std::ifstream bin(std::filesystem::path(dir) / "params.bin", std::ios::binary);
  if (!bin) throw SchemaError("no checkpoint blob in " + dir);
  std::map<std::string, std::pair<int64_t, std::vector<int>>> index;
  for (const auto& e : manifest.at("tensors"))
    index[e.at("name")] = {e.at("offset").get<int64_t>(),
                           e.at("shape").get<std::vector<int>>()};
  for (auto& [name, t] : params.entries) {
    auto it = index.find(name);
    if (it == index.end()) throw SchemaError("checkpoint is missing tensor " + name);
    if (it->second.second != t->shape)
      throw SchemaError("checkpoint shape mismatch for " + name);
    bin.seekg(it->second.first * static_cast<int64_t>(sizeof(float)));
    bin.read(reinterpret_cast<char*>(t->val.data()),
             static_cast<std::streamsize>(t->val.size() * sizeof(float)));
    if (!bin) throw SchemaError("checkpoint blob truncated at " + name);
  }
}

std::string checkpoint_arch(const std::string& dir) {
  return read_manifest(dir).at("arch").dump();
}

int64_t checkpoint_step(const std::string& dir) {
  return read_manifest(dir).at("step").get<int64_t>();
}

}  // namespace barkour::nn
