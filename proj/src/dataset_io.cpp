#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "navmem/expert.hpp"

namespace navmem {

using nlohmann::json;

namespace {

constexpr const char* kDatasetFormat = "navmem-dataset";
constexpr int kDatasetFormatVersion = 1;

json spec_to_json(const CuldesacSpec& s) {
  return json{{"pocket_length", s.pocket_length},
              {"pocket_width", s.pocket_width},
              {"margin", s.margin},
              {"approach", s.approach},
              {"orientation", std::string(orientation_name(s.orientation))}};
}

CuldesacSpec spec_from_json(const json& j) {
  CuldesacSpec s;
  s.pocket_length = j.at("pocket_length").get<int>();
  s.pocket_width = j.at("pocket_width").get<int>();
  s.margin = j.at("margin").get<int>();
  s.approach = j.at("approach").get<int>();
  s.orientation = parse_orientation(j.at("orientation").get<std::string>());
  return s;
}

}  // namespace

std::string write_dataset(const Dataset& dataset) {
  std::string out;
  const json header{{"format", kDatasetFormat},
                    {"version", kDatasetFormatVersion},
                    {"radius", dataset.radius},
                    {"encoder_version", dataset.encoder_version},
                    {"budget_multiplier", dataset.config.budget_multiplier},
                    {"budget_offset", dataset.config.budget_offset},
                    {"trajectories", dataset.trajectories.size()}};
  out += header.dump();
  out += '\n';
  for (const auto& t : dataset.trajectories) {
    json steps = json::array();
    for (const auto& s : t.steps) {
      steps.push_back(json{{"row", s.pose.row}, {"col", s.pose.col}, {"action", std::string(action_name(s.expert_action))}});
    }
    const json record{{"spec", spec_to_json(t.spec)},
                      {"seed", t.seed},
                      {"success", t.success},
                      {"final", json{{"row", t.final_pose.row}, {"col", t.final_pose.col}}},
                      {"steps", std::move(steps)}};
    out += record.dump();
    out += '\n';
  }
  return out;
}

Dataset parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset: missing header");
  const json header = json::parse(line);
  if (header.at("format").get<std::string>() != kDatasetFormat) throw std::invalid_argument("dataset: wrong format tag");
  if (header.at("version").get<int>() != kDatasetFormatVersion) throw std::invalid_argument("dataset: unsupported version");
  Dataset dataset;
  dataset.radius = header.at("radius").get<int>();
  dataset.encoder_version = header.at("encoder_version").get<int>();
  if (dataset.encoder_version != kEncoderVersion) throw std::invalid_argument("dataset: encoder version mismatch");
  dataset.config.budget_multiplier = header.at("budget_multiplier").get<int>();
  dataset.config.budget_offset = header.at("budget_offset").get<int>();
  const auto expected = header.at("trajectories").get<std::size_t>();

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json record = json::parse(line);
    Trajectory t;
    t.spec = spec_from_json(record.at("spec"));
    t.seed = record.at("seed").get<std::uint64_t>();
    t.success = record.at("success").get<bool>();
    t.final_pose = {record.at("final").at("row").get<int>(), record.at("final").at("col").get<int>()};
    for (const auto& s : record.at("steps")) {
      TrajectoryStep step;
      step.pose = {s.at("row").get<int>(), s.at("col").get<int>()};
      step.expert_action = parse_action(s.at("action").get<std::string>());
      t.steps.push_back(std::move(step));
    }
    rederive_inputs(t, dataset.radius);
    dataset.trajectories.push_back(std::move(t));
  }
  if (dataset.trajectories.size() != expected) throw std::invalid_argument("dataset: trajectory count mismatch");
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << write_dataset(dataset);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str());
}

}  // namespace navmem
