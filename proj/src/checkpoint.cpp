#include "fragq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "fragq/errors.hpp"

namespace fragq {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'F', 'R', 'G', 'Q', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::string& what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw DecodeError("checkpoint truncated while reading " + what);
  return v;
}

json dims(Dims3 d) { return json::array({d.t, d.h, d.w}); }

Dims3 dims_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a [t, h, w] triple");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

struct RawCheckpoint {
  json header;
  std::map<std::string, nn::Mat> tensors;
  std::vector<std::string> order;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DecodeError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw DecodeError(path.string() + " is not a fragq checkpoint");
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kVersion) throw DecodeError("unsupported checkpoint version " + std::to_string(version));
  const auto n = get<std::uint64_t>(is, "header length");
  if (n > (1u << 28)) throw DecodeError("checkpoint header length is implausible");
  std::string text(n, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(n))) throw DecodeError("checkpoint truncated in header");
  RawCheckpoint raw;
  try {
    raw.header = json::parse(text);
  } catch (const json::exception& e) {
    throw DecodeError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (!raw.header.is_object() || !raw.header.contains("tensors") || !raw.header["tensors"].is_array() ||
      !raw.header.contains("config"))
    throw DecodeError("checkpoint header lacks config or tensor table");
  for (const auto& t : raw.header["tensors"]) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    try {
      name = t.at("name").get<std::string>();
      rows = t.at("rows").get<Eigen::Index>();
      cols = t.at("cols").get<Eigen::Index>();
    } catch (const json::exception& e) {
      throw DecodeError(std::string("malformed tensor entry in checkpoint header: ") + e.what());
    }
    if (rows < 0 || cols < 0 || rows * cols > (Eigen::Index{1} << 32))
      throw DecodeError("implausible tensor shape for " + name);
    nn::Mat m(rows, cols);
    if (!is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size())))
      throw DecodeError("checkpoint truncated in tensor " + name);
    raw.order.push_back(name);
    raw.tensors.emplace(name, std::move(m));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw DecodeError("trailing bytes after checkpoint tensors");
  return raw;
}

void assign(const RawCheckpoint& raw, Fanet& model, const std::string& path) {
  std::vector<std::string> diff;
  std::map<std::string, bool> seen;
  for (nn::Param* p : model.parameters()) {
    seen[p->name] = true;
    auto it = raw.tensors.find(p->name);
    if (it == raw.tensors.end()) {
      diff.push_back("missing " + p->name);
    } else if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      diff.push_back("shape " + p->name + ": checkpoint " + std::to_string(it->second.rows()) + "x" +
                     std::to_string(it->second.cols()) + ", model " + std::to_string(p->value.rows()) + "x" +
                     std::to_string(p->value.cols()));
    }
  }
  for (const auto& name : raw.order)
    if (!seen.count(name)) diff.push_back("unexpected " + name);
  if (!diff.empty()) {
    std::string msg = "checkpoint " + path + " does not match the model:";
    for (const auto& d : diff) msg += "\n  " + d;
    throw ConfigError(msg);
  }
  for (nn::Param* p : model.parameters()) p->value = raw.tensors.at(p->name);
}

}  // namespace

json config_to_json(const FanetConfig& c) {
  return json{{"preset", c.preset},
              {"in_channels", c.in_channels},
              {"embed_dim", c.embed_dim},
              {"depths", c.depths},
              {"heads", c.heads},
              {"window", dims(c.window)},
              {"patch_stride", dims(c.patch_stride)},
              {"mlp_ratio", c.mlp_ratio},
              {"fragment_patch", c.fragment_patch},
              {"grpb_stages", c.grpb_stages},
              {"head_hidden", c.head_hidden},
              {"patch_norm", c.patch_norm},
              {"final_norm", c.final_norm},
              {"init", c.init},
              {"patch_init", c.patch_init}};
}

FanetConfig config_from_json(const json& j) {
  try {
    FanetConfig c;
    c.preset = j.at("preset").get<std::string>();
    c.in_channels = j.at("in_channels").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.depths = j.at("depths").get<std::array<int, kStages>>();
    c.heads = j.at("heads").get<std::array<int, kStages>>();
    c.window = dims_from(j.at("window"));
    c.patch_stride = dims_from(j.at("patch_stride"));
    c.mlp_ratio = j.at("mlp_ratio").get<int>();
    c.fragment_patch = j.at("fragment_patch").get<int>();
    c.grpb_stages = j.at("grpb_stages").get<std::array<bool, kStages>>();
    c.head_hidden = j.at("head_hidden").get<int>();
    c.patch_norm = j.at("patch_norm").get<bool>();
    c.final_norm = j.at("final_norm").get<bool>();
    c.init = j.at("init").get<std::string>();
    c.patch_init = j.at("patch_init").get<std::string>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Fanet& model, const json& extra) {
  json header{{"config", config_to_json(model.config())}, {"tensors", json::array()}, {"extra", extra}};
  const auto params = model.parameters();
  for (const nn::Param* p : params)
    header["tensors"].push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kMagic, 8);
  put(os, kVersion);
  put(os, static_cast<std::uint64_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const nn::Param* p : params)
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(sizeof(double) * p->value.size()));
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  RawCheckpoint raw = read_raw(path);
  LoadedCheckpoint out{Fanet(config_from_json(raw.header.at("config")), 0), raw.header.value("extra", json::object())};
  assign(raw, out.model, path.string());
  return out;
}

void load_parameters(const std::filesystem::path& path, Fanet& model) {
  assign(read_raw(path), model, path.string());
}

}  // namespace fragq
