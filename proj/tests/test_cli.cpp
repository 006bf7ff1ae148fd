/* Copyright 2026 The qcep authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// End-to-end run of the qcep binary on a small dataset. QCEP_BIN is injected
// by CMake as the path to the built executable.

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(QCEP_BIN) + " " + args + " >>" +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("qcep_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("cli pipeline: synth, extract, train, evaluate, report") {
  TempDir tmp;
  const fs::path log = tmp.path / "cli.log";
  const fs::path config = tmp.path / "config.json";
  {
    std::ofstream out(config);
    out << R"({
      "synth.gm_count": 13,
      "synth.duration_s": 12.0,
      "synth.angles_deg": [0, 90],
      "synth.scale_factors": [1.0],
      "train.max_epochs": 2,
      "train.patience": 10
    })";
  }
  const std::string common = " --config " + config.string();

  // synth
  const fs::path data = tmp.path / "data";
  REQUIRE(run("synth --seed 5 --out " + data.string() + common, log) == 0);
  REQUIRE(fs::exists(data / "manifest.json"));
  REQUIRE(fs::exists(data / "run_config.json"));
  const json manifest = json::parse(slurp(data / "manifest.json"));
  CHECK(manifest.at("events").size() == 26);  // 13 GMs x 2 angles x 1 scale

  // same seed reruns byte-identically
  const fs::path data2 = tmp.path / "data2";
  REQUIRE(run("synth --seed 5 --out " + data2.string() + common, log) == 0);
  CHECK(slurp(data / "manifest.json") == slurp(data2 / "manifest.json"));
  CHECK(slurp(data / "records" / manifest.at("events")[0].at("record")
                         .get<std::string>().substr(8)) ==
        slurp(data2 / "records" / manifest.at("events")[0].at("record")
                          .get<std::string>().substr(8)));

  // extract all three kinds
  for (const char* kind : {"mfb", "mfcc", "intensity"}) {
    const int rc = run("extract --manifest " + (data / "manifest.json").string() +
                           " --feature " + kind + " --out " +
                           (tmp.path / ("feat_" + std::string(kind))).string() +
                           common,
                       log);
    REQUIRE(rc == 0);
  }
  CHECK(fs::exists(tmp.path / "feat_mfb" / "index.json"));
  CHECK(fs::exists(tmp.path / "feat_intensity" / "intensity.csv"));

  // extracting twice yields identical tensor bytes
  const fs::path feat_again = tmp.path / "feat_mfb_again";
  REQUIRE(run("extract --manifest " + (data / "manifest.json").string() +
                  " --feature mfb --out " + feat_again.string() + common,
              log) == 0);
  const std::string some_tensor =
      json::parse(slurp(tmp.path / "feat_mfb" / "index.json"))
          .at("events")[0].at("tensor").get<std::string>();
  CHECK(slurp(tmp.path / "feat_mfb" / some_tensor) ==
        slurp(feat_again / some_tensor));

  // train + evaluate each kind
  for (const char* kind : {"mfb", "mfcc", "intensity"}) {
    const std::string feat = (tmp.path / ("feat_" + std::string(kind))).string();
    const std::string train_out = (tmp.path / ("train_" + std::string(kind))).string();
    REQUIRE(run("train --features " + feat + " --seed 5 --out " + train_out + common,
                log) == 0);
    REQUIRE(fs::exists(fs::path(train_out) / "checkpoint.qnn1"));
    REQUIRE(fs::exists(fs::path(train_out) / "history.csv"));

    const std::string eval_out = (tmp.path / ("eval_" + std::string(kind))).string();
    REQUIRE(run("evaluate --features " + feat + " --checkpoint " + train_out +
                    " --out " + eval_out + common,
                log) == 0);
    REQUIRE(fs::exists(fs::path(eval_out) /
                       ("eval_" + std::string(kind) + ".json")));
    REQUIRE(fs::exists(fs::path(eval_out) /
                       ("scatter_" + std::string(kind) + ".svg")));
  }

  // mismatched checkpoint/features is a data error (exit 2)
  CHECK(run("evaluate --features " + (tmp.path / "feat_mfcc").string() +
                " --checkpoint " + (tmp.path / "train_mfb").string() + " --out " +
                (tmp.path / "eval_bad").string(),
            log) == 2);

  // report aggregates exactly the three kinds
  const fs::path report_out = tmp.path / "report";
  REQUIRE(run("report --out " + report_out.string() + " --eval " +
                  (tmp.path / "eval_mfb").string() + " --eval " +
                  (tmp.path / "eval_mfcc").string() + " --eval " +
                  (tmp.path / "eval_intensity").string(),
              log) == 0);
  const json report = json::parse(slurp(report_out / "report.json"));
  REQUIRE(report.at("features").size() == 3);
  for (const char* kind : {"mfb", "mfcc", "intensity"}) {
    CHECK(report.at("features").contains(kind));
    CHECK(report.at("features").at(kind).at("test_mae_percent").get<double>() >= 0.0);
  }

  // report.json MAE matches a recomputation from the emitted scatter CSV
  {
    std::ifstream csv(tmp.path / "eval_mfb" / "scatter_mfb.csv");
    std::string line;
    std::getline(csv, line);  // header
    double sum = 0.0;
    std::size_t n = 0;
    while (std::getline(csv, line)) {
      const auto comma = line.find(',');
      REQUIRE(comma != std::string::npos);
      sum += std::stod(line.substr(comma + 1));
      ++n;
    }
    REQUIRE(n > 0);
    const double mae = report.at("features").at("mfb").at("test_mae_percent");
    CHECK(mae == doctest::Approx(sum / static_cast<double>(n)).epsilon(1e-9));
  }

  // a missing report input is rejected
  CHECK(run("report --out " + (tmp.path / "report_bad").string() + " --eval " +
                (tmp.path / "eval_mfb").string(),
            log) == 2);
}

TEST_CASE("cli error paths and exit codes") {
  TempDir tmp;
  const fs::path log = tmp.path / "cli_err.log";

  // usage error: unknown flag
  CHECK(run("synth --nonsense", log) == 1);
  // usage error: unknown feature kind
  CHECK(run("extract --manifest x.json --feature wavelet --out " +
                (tmp.path / "o").string(),
            log) == 1);
  // data error: manifest does not exist
  CHECK(run("extract --manifest " + (tmp.path / "missing.json").string() +
                " --feature mfb --out " + (tmp.path / "o2").string(),
            log) == 2);
  // data error on stderr with a diagnostic
  const std::string text = slurp(log);
  CHECK(text.find("error:") != std::string::npos);
}
