#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "navmem/checkpoint.hpp"
#include "navmem/eval.hpp"
#include "navmem/expert.hpp"

namespace fs = std::filesystem;
using namespace navmem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Workspace {
 public:
  Workspace() : root_(fs::temp_directory_path() / ("navmem_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() { fs::remove_all(root_); }

  fs::path path(const std::string& name) const { return root_ / name; }

  fs::path write(const std::string& name, const std::string& content) const {
    std::ofstream(path(name), std::ios::binary) << content;
    return path(name);
  }

  Run run(const std::string& args) const {
    const fs::path o = root_ / "stdout.txt";
    const fs::path e = root_ / "stderr.txt";
    const std::string cmd = std::string(NAVMEM_CLI_PATH) + " " + args + " >" + o.string() + " 2>" + e.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
  }

 private:
  fs::path root_;
};

/// Value printed after "key: " on stdout.
double field(const std::string& out, const std::string& key) {
  const auto at = out.find(key + ": ");
  REQUIRE_MESSAGE(at != std::string::npos, "missing " << key << " in:\n" << out);
  return std::stod(out.substr(at + key.size() + 2));
}

constexpr const char* kSmallModel =
    R"("conv_widths": [4, 8], "fc_width": 16, "q_channels": 4, "hidden_size": 8, "vi_iterations": 10)";

}  // namespace

TEST_CASE("gen: defaults, errors, byte-identical reruns") {
  Workspace ws;
  const Run a = ws.run("gen --out " + ws.path("a").string());
  REQUIRE_MESSAGE(a.code == 0, a.err);
  CHECK(field(a.out, "trajectories") == 100);
  CHECK(field(a.out, "alias_pairs") >= 1);
  CHECK(field(a.out, "memoryless_error_lower_bound") > 0);
  CHECK(fs::exists(ws.path("a") / "maps" / "train_99.txt"));
  CHECK(load_dataset((ws.path("a") / "dataset.jsonl").string()).trajectories.size() == 100);

  const Run b = ws.run("gen --out " + ws.path("b").string());
  REQUIRE(b.code == 0);
  CHECK(slurp(ws.path("a") / "dataset.jsonl") == slurp(ws.path("b") / "dataset.jsonl"));
  CHECK(slurp(ws.path("a") / "holdout.jsonl") == slurp(ws.path("b") / "holdout.jsonl"));
  CHECK(a.out == b.out);

  const Run c = ws.run("gen --seed 1 --traj 5 --out " + ws.path("c").string());
  REQUIRE(c.code == 0);
  CHECK(slurp(ws.path("a") / "dataset.jsonl") != slurp(ws.path("c") / "dataset.jsonl"));

  const Run zero = ws.run("gen --traj 0 --out " + ws.path("z").string());
  CHECK(zero.code != 0);
  CHECK(zero.err.find("error") != std::string::npos);
}

TEST_CASE("train: checkpoint round trip and reproducibility") {
  Workspace ws;
  const fs::path cfg = ws.write("cfg.json", std::string(R"({"data": {"trajectories": 3, "holdout_trajectories": 1},
      "train": {"epochs": 2, "batch_size": 16}, "model": {)") + kSmallModel + "}}");
  REQUIRE(ws.run("gen --config " + cfg.string() + " --out " + ws.path("d").string()).code == 0);
  const std::string args = "train --config " + cfg.string() + " --dataset " + (ws.path("d") / "dataset.jsonl").string();
  const Run a = ws.run(args + " --out " + ws.path("a").string());
  REQUIRE_MESSAGE(a.code == 0, a.err);
  const Run b = ws.run(args + " --out " + ws.path("b").string());
  REQUIRE(b.code == 0);

  const std::string bytes = slurp(ws.path("a") / "checkpoint.ckpt");
  CHECK(bytes == slurp(ws.path("b") / "checkpoint.ckpt"));
  const Checkpoint ck = load_checkpoint((ws.path("a") / "checkpoint.ckpt").string());
  CHECK(ck.config.kind == ModelKind::VIN_PARTIALMAP);
  CHECK(serialize_checkpoint(ck) == bytes);

  const std::string curve = slurp(ws.path("a") / "curves.csv");
  CHECK(curve.rfind("epoch,train_error,test_error\n", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 3);
  CHECK(a.err.find("epoch 1") != std::string::npos);
}

TEST_CASE("train: CNN error sits above the aliasing bound it reports") {
  Workspace ws;
  const fs::path cfg = ws.write("cfg.json", std::string(R"({"data": {"trajectories": 4, "holdout_trajectories": 0},
      "train": {"epochs": 3, "batch_size": 16, "learning_rate": 0.01}, "model": {"kind": "CNN", )") +
                                                 kSmallModel + "}}");
  REQUIRE(ws.run("gen --config " + cfg.string() + " --out " + ws.path("d").string()).code == 0);
  const Run r = ws.run("train --config " + cfg.string() + " --out " + ws.path("d").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const double bound = field(r.out, "memoryless_error_lower_bound");
  CHECK(bound > 0.0);
  CHECK(field(r.out, "final_train_error") > bound);
}

TEST_CASE("train: DQN writes a reward curve") {
  Workspace ws;
  const fs::path cfg = ws.write("cfg.json", std::string(R"({"model": {"kind": "DQN", )") + kSmallModel + "}}");
  const Run r = ws.run("train --budget 1000 --config " + cfg.string() + " --out " + ws.path("q").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(ws.path("q") / "rewards.csv").rfind("episode,return\n", 0) == 0);
  CHECK(field(r.out, "episodes") >= 1);
  CHECK(fs::exists(ws.path("q") / "checkpoint.ckpt"));
  CHECK(ws.run("train --budget 999 --config " + cfg.string() + " --out " + ws.path("q").string()).code != 0);
}

TEST_CASE("train: incompatible dataset is rejected") {
  Workspace ws;
  const fs::path r2 = ws.write("r2.json", R"({"sensor_radius": 2, "model": {"sensor_radius": 2},
      "data": {"trajectories": 2, "holdout_trajectories": 0}})");
  REQUIRE(ws.run("gen --config " + r2.string() + " --out " + ws.path("d").string()).code == 0);
  const Run r = ws.run("train --model CNN --dataset " + (ws.path("d") / "dataset.jsonl").string() + " --out " +
                       ws.path("t").string());
  CHECK(r.code != 0);
  CHECK(r.err.find("error") != std::string::npos);
  CHECK(ws.run("train --out " + ws.path("empty").string()).code != 0);
}

TEST_CASE("eval: oracle succeeds everywhere, missing checkpoint fails") {
  Workspace ws;
  const Run r = ws.run("eval --oracle --out " + ws.path("e").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(field(r.out, "success_percentage") == 100.0);
  const EvalReport report = parse_report(slurp(ws.path("e") / "report.json"));
  CHECK(report.maps.size() == 100);
  CHECK(report.success_percentage == 100.0);

  CHECK(ws.run("eval --checkpoint " + ws.path("nope.ckpt").string() + " --out " + ws.path("e").string()).code != 0);
  CHECK(ws.run("eval --out " + ws.path("e").string()).code != 0);
}

TEST_CASE("eval: a trained checkpoint is loaded and evaluated") {
  Workspace ws;
  const fs::path cfg = ws.write("cfg.json", std::string(R"({"eval": {"maps": 4}, "model": {"kind": "VIN", )") +
                                                 kSmallModel + "}}");
  ModelConfig m;
  m.kind = ModelKind::VIN;
  m.q_channels = 4;
  m.vi_iterations = 10;
  save_checkpoint({m, init_params(m, 1)}, ws.path("m.ckpt").string());
  const Run r = ws.run("eval --config " + cfg.string() + " --checkpoint " + ws.path("m.ckpt").string() + " --out " +
                       ws.path("e").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(parse_report(slurp(ws.path("e") / "report.json")).maps.size() == 4);
}

TEST_CASE("sweep: oracle generalizes to 500, length lists are validated") {
  Workspace ws;
  const Run r = ws.run("sweep --oracle --lengths 20,50,100,200,500 --out " + ws.path("s").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(field(r.out, "max_generalization_length") == 500);
  CHECK(slurp(ws.path("s") / "sweep.csv") == "length,success_fraction\n20,1\n50,1\n100,1\n200,1\n500,1\n");

  CHECK(ws.run("sweep --oracle --lengths '' --out " + ws.path("s").string()).code != 0);
  CHECK(ws.run("sweep --oracle --lengths 50,20 --out " + ws.path("s").string()).code != 0);
  CHECK(ws.run("sweep --oracle --lengths 20,20 --out " + ws.path("s").string()).code != 0);
  CHECK(ws.run("sweep --oracle --lengths 20,x --out " + ws.path("s").string()).code != 0);
}

TEST_CASE("config: unknown keys rejected, help lists defaults") {
  Workspace ws;
  const Run bad = ws.run("gen --config " + ws.write("bad.json", R"({"culdesac": {"pocket_lenght": 20}})").string() +
                         " --out " + ws.path("g").string());
  CHECK(bad.code != 0);
  CHECK(bad.err.find("pocket_lenght") != std::string::npos);
  CHECK(ws.run("gen --config " + ws.write("top.json", R"({"epochs": 3})").string()).code != 0);
  CHECK(ws.run("gen --config " + ws.path("missing.json").string()).code != 0);
  CHECK(ws.run("frobnicate").code != 0);
  CHECK(ws.run("").code != 0);

  const Run help = ws.run("--help");
  CHECK(help.code == 0);
  for (const char* needle : {"gen", "train", "eval", "sweep", "--config", "\"budget\": 200000", "\"epochs\": 30",
                             "VIN_PARTIALMAP", "NAV_THREADS", "\"pocket_length\": 20"}) {
    CHECK_MESSAGE(help.out.find(needle) != std::string::npos, needle);
  }
  const Run sub = ws.run("sweep --help");
  CHECK(sub.out.find("--lengths") != std::string::npos);
  CHECK(sub.out.find("--oracle") != std::string::npos);
}
