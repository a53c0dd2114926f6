#include "navmem/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "navmem/json_io.hpp"

namespace navmem {

using nlohmann::json;

void to_json(json& j, const CuldesacSpec& s) {
  j = json{{"pocket_length", s.pocket_length},
           {"pocket_width", s.pocket_width},
           {"margin", s.margin},
           {"approach", s.approach},
           {"orientation", std::string(orientation_name(s.orientation))}};
}

void from_json(const json& j, CuldesacSpec& s) {
  reject_unknown_keys(j, {"pocket_length", "pocket_width", "margin", "approach", "orientation"}, "culdesac");
  s.pocket_length = j.value("pocket_length", s.pocket_length);
  s.pocket_width = j.value("pocket_width", s.pocket_width);
  s.margin = j.value("margin", s.margin);
  s.approach = j.value("approach", s.approach);
  if (j.contains("orientation")) s.orientation = parse_orientation(j.at("orientation").get<std::string>());
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"kind", std::string(model_kind_name(c.kind))},
           {"vi_iterations", c.vi_iterations ? json(*c.vi_iterations) : json("auto")},
           {"q_channels", c.q_channels},
           {"hidden_size", c.hidden_size},
           {"conv_widths", {c.conv_widths[0], c.conv_widths[1]}},
           {"fc_width", c.fc_width},
           {"sensor_radius", c.sensor_radius},
           {"seed", c.seed}};
}

void from_json(const json& j, ModelConfig& c) {
  reject_unknown_keys(j, {"kind", "vi_iterations", "q_channels", "hidden_size", "conv_widths", "fc_width",
                          "sensor_radius", "seed"},
                      "model");
  if (j.contains("kind")) c.kind = parse_model_kind(j.at("kind").get<std::string>());
  if (j.contains("vi_iterations")) {
    const json& k = j.at("vi_iterations");
    if (k.is_string()) {
      if (k.get<std::string>() != "auto") throw std::invalid_argument("vi_iterations must be an integer or \"auto\"");
      c.vi_iterations.reset();
    } else {
      c.vi_iterations = k.get<int>();
    }
  }
  c.q_channels = j.value("q_channels", c.q_channels);
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  if (j.contains("conv_widths")) {
    const auto widths = j.at("conv_widths").get<std::vector<int>>();
    if (widths.size() != 2) throw std::invalid_argument("conv_widths needs two entries");
    c.conv_widths = {widths[0], widths[1]};
  }
  c.fc_width = j.value("fc_width", c.fc_width);
  c.sensor_radius = j.value("sensor_radius", c.sensor_radius);
  c.seed = j.value("seed", c.seed);
  c.validate();
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw std::invalid_argument(std::string(where) + ": unknown key '" + key + "'");
  }
}

namespace {

void put_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void check_layout(const Checkpoint& ck) {
  const auto layout = parameter_layout(ck.config);
  if (layout.size() != ck.params.size()) throw std::invalid_argument("checkpoint: parameter set does not match model");
  for (const auto& [name, shape] : layout) {
    const auto it = ck.params.find(name);
    if (it == ck.params.end() || it->second.shape() != shape) {
      throw std::invalid_argument("checkpoint: parameter '" + name + "' missing or misshapen");
    }
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  check_layout(checkpoint);
  json table = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : checkpoint.params) {
    table.push_back(json{{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * 8;
  }
  const json header{{"format_version", kCheckpointVersion}, {"model", checkpoint.config}, {"tensors", table},
                    {"data_bytes", offset}};
  std::string out(kCheckpointMagic, 8);
  out += header.dump();
  out += '\n';
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : checkpoint.params) {
    for (double v : t.data()) put_le(out, v);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 8, kCheckpointMagic) != 0) throw std::invalid_argument("checkpoint: bad magic");
  const std::size_t newline = bytes.find('\n', 8);
  if (newline == std::string::npos) throw std::invalid_argument("checkpoint: truncated header");
  const json header = json::parse(bytes.begin() + 8, bytes.begin() + static_cast<std::ptrdiff_t>(newline));
  if (header.at("format_version").get<int>() != kCheckpointVersion) {
    throw std::invalid_argument("checkpoint: unsupported format version");
  }
  Checkpoint ck;
  ck.config = header.at("model").get<ModelConfig>();
  const std::size_t data_start = newline + 1;
  const auto data_bytes = header.at("data_bytes").get<std::size_t>();
  if (bytes.size() != data_start + data_bytes) throw std::invalid_argument("checkpoint: data length mismatch");
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + data_start);
  for (const auto& entry : header.at("tensors")) {
    Shape shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::size_t>();
    Tensor t(shape);
    if (offset + t.size() * 8 > data_bytes) throw std::invalid_argument("checkpoint: tensor outside data block");
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_le(data + offset + 8 * i);
    ck.params.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  check_layout(ck);
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << serialize_checkpoint(checkpoint);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

}  // namespace navmem
