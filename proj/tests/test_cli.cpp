#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mono/checkpoint.hpp"
#include "mono/cli.hpp"
#include "mono/common.hpp"

using namespace mono;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const { return (path / sub).string(); }
};

void write_tiny_config(const std::string& path, const std::string& data_dir,
                       const std::string& ffn_mode) {
  std::ofstream out(path);
  out << "[model]\n"
         "d = 16\np = 4\nheads = 2\nenc_layers = 1\ndec_layers = 1\n"
         "g_hidden = 16\nffn_hidden = 16\nmax_len = 40\nffn_mode = " +
             ffn_mode +
             "\n"
             "[train]\nlr = 3e-3\nepochs = 2\nbatch_size = 4\nval_fraction = 0.2\n"
             "[data]\ndataset = " +
             data_dir + "/data.jsonl\nvocab = " + data_dir +
             "/vocab.txt\n"
             "[semorder]\nmode = probe\nprobe_pairs = 100\n"
             "[attack]\nkind = hotflip\nk = 2\nexamples = 10\nmax_len = 10\n";
}

}  // namespace

TEST_CASE("cli: config parser rejects unknown keys naming the valid ones") {
  TempDir tmp("mono_cli_cfg");
  const std::string cfg = tmp.str("bad.cfg");
  {
    std::ofstream out(cfg);
    out << "[model]\nd = 16\nwith_cheese = 1\n";
  }
  try {
    parse_config_file(cfg);
    FAIL("unknown key accepted");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("with_cheese") != std::string::npos);
    CHECK(msg.find("g_hidden") != std::string::npos);  // lists the valid keys
  }

  const std::string cfg2 = tmp.str("bad2.cfg");
  {
    std::ofstream out(cfg2);
    out << "[nosuch]\nx = 1\n";
  }
  CHECK_THROWS_AS(parse_config_file(cfg2), Error);
}

TEST_CASE("cli: missing dataset path is an explicit usage error") {
  TempDir tmp("mono_cli_missing");
  const std::string cfg = tmp.str("cfg.cfg");
  write_tiny_config(cfg, tmp.str("nowhere"), "monotone");
  const int rc = run_cli({"train", "--config", cfg, "--out", tmp.str("out"), "--seed", "42"});
  CHECK(rc == 1);
}

TEST_CASE("cli pipeline: gendata, deterministic train, verify, attack, eval, report") {
  TempDir tmp("mono_cli_pipe");
  REQUIRE(run_cli({"gendata", "--out", tmp.str("data"), "--task", "firstclause", "--n", "60",
                   "--seed", "7"}) == 0);
  CHECK(fs::exists(tmp.str("data/vocab.txt")));
  CHECK(fs::exists(tmp.str("data/data.jsonl")));
  CHECK(fs::exists(tmp.str("data/manifest.json")));

  const std::string cfg = tmp.str("toy.cfg");
  write_tiny_config(cfg, tmp.str("data"), "monotone");

  // identical seeds give identical checkpoint hashes
  REQUIRE(run_cli({"train", "--config", cfg, "--out", tmp.str("m1"), "--seed", "42"}) == 0);
  REQUIRE(run_cli({"train", "--config", cfg, "--out", tmp.str("m2"), "--seed", "42"}) == 0);
  CHECK(checkpoint_hash_hex(tmp.str("m1/checkpoint.bin")) ==
        checkpoint_hash_hex(tmp.str("m2/checkpoint.bin")));
  REQUIRE(run_cli({"train", "--config", cfg, "--out", tmp.str("m3"), "--seed", "43"}) == 0);
  CHECK(checkpoint_hash_hex(tmp.str("m1/checkpoint.bin")) !=
        checkpoint_hash_hex(tmp.str("m3/checkpoint.bin")));

  // manifest lists every artifact
  {
    std::ifstream in(tmp.str("m1/manifest.json"));
    nlohmann::json man = nlohmann::json::parse(in);
    CHECK(man["command"] == "train");
    CHECK(man["seed"] == 42);
    bool has_ckpt = false;
    for (const auto& a : man["artifacts"])
      if (a.get<std::string>().find("checkpoint.bin") != std::string::npos) has_ckpt = true;
    CHECK(has_ckpt);
  }

  // verification passes on the monotone checkpoint and fails under the
  // negative control, with matching exit codes
  CHECK(run_cli({"verify", "--checkpoint", tmp.str("m1/checkpoint.bin"), "--out",
                 tmp.str("v1"), "--order-samples", "500", "--jacobian-samples", "100",
                 "--persistence-samples", "100"}) == 0);
  CHECK(run_cli({"verify", "--checkpoint", tmp.str("m1/checkpoint.bin"), "--out",
                 tmp.str("v2"), "--order-samples", "500", "--jacobian-samples", "100",
                 "--persistence-samples", "100", "--negative-control"}) == 2);

  // zero-budget attack: degradation column is all zero
  const std::string cfg0 = tmp.str("k0.cfg");
  {
    std::ifstream in(cfg);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string s = ss.str();
    const size_t pos = s.find("k = 2");
    s.replace(pos, 5, "k = 0");
    std::ofstream out(cfg0);
    out << s;
  }
  REQUIRE(run_cli({"attack", "--config", cfg0, "--checkpoint", tmp.str("m1/checkpoint.bin"),
                   "--out", tmp.str("a0"), "--seed", "42"}) == 0);
  {
    std::ifstream in(tmp.str("a0/hotflip_report.csv"));
    std::string line;
    std::getline(in, line);
    size_t rows = 0;
    while (std::getline(in, line) && line[0] != '#') {
      ++rows;
      const size_t last_comma = line.rfind(',');
      const size_t prev_comma = line.rfind(',', last_comma - 1);
      CHECK(std::stod(line.substr(prev_comma + 1, last_comma - prev_comma - 1)) == 0.0);
    }
    CHECK(rows > 0);
  }

  // real attacks on both models plus the paired report
  write_tiny_config(tmp.str("base.cfg"), tmp.str("data"), "unconstrained");
  REQUIRE(run_cli({"train", "--config", tmp.str("base.cfg"), "--out", tmp.str("b1"), "--seed",
                   "42"}) == 0);
  REQUIRE(run_cli({"attack", "--config", cfg, "--checkpoint", tmp.str("m1/checkpoint.bin"),
                   "--out", tmp.str("am"), "--seed", "42"}) == 0);
  REQUIRE(run_cli({"attack", "--config", cfg, "--checkpoint", tmp.str("b1/checkpoint.bin"),
                   "--out", tmp.str("ab"), "--seed", "42"}) == 0);
  REQUIRE(run_cli({"report", "--attack-csv", tmp.str("ab/hotflip_report.csv"), "--attack-csv",
                   tmp.str("am/hotflip_report.csv"), "--out", tmp.str("cmp")}) == 0);
  {
    std::ifstream in(tmp.str("cmp/comparison.csv"));
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str().find("paired_t") != std::string::npos);
    CHECK(ss.str().find("test_kind,paired") != std::string::npos);
  }

  // eval is deterministic for a fixed checkpoint and seed
  REQUIRE(run_cli({"eval", "--config", cfg, "--checkpoint", tmp.str("m1/checkpoint.bin"),
                   "--out", tmp.str("e1"), "--seed", "42"}) == 0);
  REQUIRE(run_cli({"eval", "--config", cfg, "--checkpoint", tmp.str("m1/checkpoint.bin"),
                   "--out", tmp.str("e2"), "--seed", "42"}) == 0);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp(tmp.str("e1/eval.csv")) == slurp(tmp.str("e2/eval.csv")));
  CHECK(slurp(tmp.str("e1/eval_summary.txt")) == slurp(tmp.str("e2/eval_summary.txt")));
}

TEST_CASE("cli: uat attack produces a trigger and a report") {
  TempDir tmp("mono_cli_uat");
  REQUIRE(run_cli({"gendata", "--out", tmp.str("data"), "--task", "firstclause", "--n", "50",
                   "--seed", "11"}) == 0);
  const std::string cfg = tmp.str("toy.cfg");
  {
    std::ofstream out(cfg);
    out << "[model]\nd = 16\np = 4\nheads = 2\nenc_layers = 1\ndec_layers = 1\n"
           "g_hidden = 16\nffn_hidden = 16\nmax_len = 40\nffn_mode = unconstrained\n"
           "[train]\nlr = 3e-3\nepochs = 1\nbatch_size = 4\n"
           "[data]\ndataset = "
        << tmp.str("data/data.jsonl") << "\nvocab = " << tmp.str("data/vocab.txt")
        << "\n[attack]\nkind = uat\ntrigger_length = 2\nrestarts = 1\niterations = 2\n"
           "uat_train_n = 4\nuat_test_n = 4\n";
  }
  REQUIRE(run_cli({"train", "--config", cfg, "--out", tmp.str("m"), "--seed", "42"}) == 0);
  REQUIRE(run_cli({"attack", "--config", cfg, "--checkpoint", tmp.str("m/checkpoint.bin"),
                   "--out", tmp.str("u"), "--seed", "42"}) == 0);
  CHECK(fs::exists(tmp.str("u/trigger.txt")));
  CHECK(fs::exists(tmp.str("u/uat_report.csv")));
}

TEST_CASE("cli: transfer matrix from two checkpoints and triggers") {
  TempDir tmp("mono_cli_transfer");
  REQUIRE(run_cli({"gendata", "--out", tmp.str("data"), "--task", "firstclause", "--n", "50",
                   "--seed", "11"}) == 0);
  const std::string cfg = tmp.str("toy.cfg");
  {
    std::ofstream out(cfg);
    out << "[model]\nd = 16\np = 4\nheads = 2\nenc_layers = 1\ndec_layers = 1\n"
           "g_hidden = 16\nffn_hidden = 16\nmax_len = 40\nffn_mode = unconstrained\n"
           "[train]\nlr = 3e-3\nepochs = 1\nbatch_size = 4\n"
           "[data]\ndataset = "
        << tmp.str("data/data.jsonl") << "\nvocab = " << tmp.str("data/vocab.txt")
        << "\n[attack]\nkind = uat\ntrigger_length = 2\nrestarts = 1\niterations = 2\n"
           "uat_train_n = 4\nuat_test_n = 4\n";
  }
  REQUIRE(run_cli({"train", "--config", cfg, "--out", tmp.str("m1"), "--seed", "42"}) == 0);
  REQUIRE(run_cli({"train", "--config", cfg, "--out", tmp.str("m2"), "--seed", "43"}) == 0);
  REQUIRE(run_cli({"attack", "--config", cfg, "--checkpoint", tmp.str("m1/checkpoint.bin"),
                   "--out", tmp.str("u1"), "--seed", "42"}) == 0);
  REQUIRE(run_cli({"attack", "--config", cfg, "--checkpoint", tmp.str("m2/checkpoint.bin"),
                   "--out", tmp.str("u2"), "--seed", "42"}) == 0);
  REQUIRE(run_cli({"report", "--config", cfg, "--checkpoint", tmp.str("m1/checkpoint.bin"),
                   "--checkpoint", tmp.str("m2/checkpoint.bin"), "--trigger",
                   tmp.str("u1/trigger.txt"), "--trigger", tmp.str("u2/trigger.txt"), "--out",
                   tmp.str("tr"), "--seed", "42"}) == 0);
  std::ifstream in(tmp.str("tr/transfer.csv"));
  REQUIRE(in.good());
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  CHECK(header == "model,trigger0,trigger1");
  CHECK(row0.substr(0, 6) == "model0");
  CHECK(row1.substr(0, 6) == "model1");
}

TEST_CASE("cli: training divergence exits with the numerical-failure code") {
  TempDir tmp("mono_cli_div");
  REQUIRE(run_cli({"gendata", "--out", tmp.str("data"), "--task", "copy", "--n", "30", "--seed",
                   "3"}) == 0);
  const std::string cfg = tmp.str("cfg.cfg");
  {
    std::ofstream out(cfg);
    out << "[model]\nd = 16\np = 4\nheads = 2\nenc_layers = 1\ndec_layers = 1\n"
           "g_hidden = 16\nffn_hidden = 16\nmax_len = 40\nffn_mode = unconstrained\n"
           "[train]\nlr = 1e6\nepochs = 3\nbatch_size = 4\n"
           "[data]\ndataset = "
        << tmp.str("data/data.jsonl") << "\nvocab = " << tmp.str("data/vocab.txt") << "\n";
  }
  CHECK(run_cli({"train", "--config", cfg, "--out", tmp.str("out"), "--seed", "1"}) == 3);
}

TEST_CASE("cli: unknown subcommand and bad flags exit with a usage error") {
  CHECK(run_cli({"frobnicate"}) == 1);
  CHECK(run_cli({}) == 1);
}
