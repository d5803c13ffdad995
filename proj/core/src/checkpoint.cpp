#include "sami/checkpoint.hpp"

#include <stdexcept>

#include "json.hpp"

#include "sami/io.hpp"

namespace sami {

using nlohmann::json;

void save_checkpoint(const std::string& path, const std::vector<NamedParam>& params,
                     const std::map<std::string, std::string>& meta) {
  json tensors = json::object();
  for (const auto& p : params) {
    if (tensors.contains(p.name))
      throw std::invalid_argument("duplicate parameter name: " + p.name);
    json shape = json::array();
    for (std::size_t d = 0; d < p.tensor->rank(); ++d) shape.push_back(p.tensor->dim(d));
    json data = json::array();
    for (std::size_t i = 0; i < p.tensor->numel(); ++i) data.push_back((*p.tensor)[i]);
    tensors[p.name] = {{"shape", shape}, {"data", data}};
  }
  const json j{{"version", kCheckpointVersion}, {"meta", meta}, {"tensors", tensors}};
  atomic_write_file(path, j.dump());
}

namespace {

json parse_checkpoint(const std::string& path) {
  json j = json::parse(read_file(path));
  if (!j.is_object() || j.value("version", "") != kCheckpointVersion)
    throw std::runtime_error("not a compatible checkpoint: " + path);
  return j;
}

}  // namespace

void load_checkpoint(const std::string& path, const std::vector<NamedParam>& params,
                     std::map<std::string, std::string>* meta_out) {
  const json j = parse_checkpoint(path);
  const json& tensors = j.at("tensors");
  if (tensors.size() != params.size())
    throw std::runtime_error("checkpoint parameter count mismatch");
  for (const auto& p : params) {
    if (!tensors.contains(p.name))
      throw std::runtime_error("checkpoint missing parameter: " + p.name);
    const json& rec = tensors.at(p.name);
    const auto shape = rec.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != p.tensor->rank())
      throw std::runtime_error("checkpoint rank mismatch for " + p.name);
    for (std::size_t d = 0; d < shape.size(); ++d)
      if (shape[d] != p.tensor->dim(d))
        throw std::runtime_error("checkpoint shape mismatch for " + p.name);
    const auto data = rec.at("data").get<std::vector<double>>();
    if (data.size() != p.tensor->numel())
      throw std::runtime_error("checkpoint data size mismatch for " + p.name);
    for (std::size_t i = 0; i < data.size(); ++i) (*p.tensor)[i] = data[i];
  }
  if (meta_out) *meta_out = j.at("meta").get<std::map<std::string, std::string>>();
}

std::map<std::string, std::string> checkpoint_meta(const std::string& path) {
  return parse_checkpoint(path).at("meta").get<std::map<std::string, std::string>>();
}

}  // namespace sami
