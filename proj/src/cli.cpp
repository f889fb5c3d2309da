#include "mono/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cctype>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "mono/attacks.hpp"
#include "mono/checkpoint.hpp"
#include "mono/decode.hpp"
#include "mono/metrics.hpp"
#include "mono/train.hpp"
#include "mono/verify.hpp"

namespace mono {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::map<std::string, std::vector<std::string>> kKnownKeys = {
    {"model",
     {"d", "p", "heads", "enc_layers", "dec_layers", "g_hidden", "ffn_hidden", "max_len",
      "ffn_mode", "g_act", "ffn_act"}},
    {"train",
     {"lr", "weight_decay", "batch_size", "epochs", "warmup_fraction", "clip_norm", "lambda",
      "temperature", "val_fraction"}},
    {"data", {"dataset", "vocab"}},
    {"semorder", {"mode", "file", "probe_pairs"}},
    {"attack",
     {"kind", "k", "greedy", "candidates", "threshold", "trigger_length", "restarts",
      "iterations", "shortlist", "uat_train_n", "uat_test_n", "generation", "beam",
      "length_penalty", "min_len", "max_len", "no_repeat_ngram", "examples"}},
};

std::string known_keys_for(const std::string& section) {
  auto it = kKnownKeys.find(section);
  if (it == kKnownKeys.end()) {
    std::string all;
    for (const auto& [s, k] : kKnownKeys) all += (all.empty() ? "" : ", ") + s;
    return "valid sections: " + all;
  }
  std::string keys;
  for (const auto& k : it->second) keys += (keys.empty() ? "" : ", ") + k;
  return "valid keys in [" + section + "]: " + keys;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "config: cannot open ", path);
  std::map<std::string, std::string> kv;
  std::string line, section;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    size_t e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    if (line.front() == '[') {
      check(line.back() == ']', "config: bad section header at ", path, ":", lineno);
      section = line.substr(1, line.size() - 2);
      check(kKnownKeys.count(section), "config: unknown section [", section, "] at ", path, ":",
            lineno, "; ", known_keys_for(""));
      continue;
    }
    const size_t eq = line.find('=');
    check(eq != std::string::npos, "config: expected key=value at ", path, ":", lineno);
    check(!section.empty(), "config: key before any [section] at ", path, ":", lineno);
    std::string key = line.substr(0, eq);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::string value = line.substr(eq + 1);
    while (!value.empty() && (value.front() == ' ' || value.front() == '\t'))
      value.erase(value.begin());
    const auto& known = kKnownKeys.at(section);
    check(std::find(known.begin(), known.end(), key) != known.end(), "config: unknown key '",
          key, "' in [", section, "] at ", path, ":", lineno, "; ", known_keys_for(section));
    kv[section + "." + key] = value;
  }
  return kv;
}

namespace {

std::string cfg_str(const std::map<std::string, std::string>& kv, const std::string& key,
                    const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

double cfg_num(const std::map<std::string, std::string>& kv, const std::string& key,
               double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (...) {
    fail("config: bad numeric value '", it->second, "' for ", key);
  }
}

std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// One manifest per run: the command, every resolved setting, the seed, input
// and output checkpoint hashes, and every artifact written.
struct Manifest {
  std::string command;
  std::map<std::string, std::string> config;
  uint64_t seed = 0;
  std::map<std::string, std::string> checkpoint_hashes;
  std::vector<std::string> artifacts;
  std::string started = iso_now();

  void add_checkpoint(const std::string& path) {
    checkpoint_hashes[path] = checkpoint_hash_hex(path);
  }
  void write(const fs::path& out_dir) {
    json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["checkpoint_hashes"] = checkpoint_hashes;
    j["artifacts"] = artifacts;
    j["started"] = started;
    j["finished"] = iso_now();
    std::ofstream out(out_dir / "manifest.json");
    check(out.good(), "manifest: cannot write ", (out_dir / "manifest.json").string());
    out << j.dump(2) << "\n";
  }
};

ModelConfig model_config_from_file(const std::map<std::string, std::string>& kv, size_t vocab,
                                   const std::string& ffn_mode_override) {
  ModelConfig cfg;
  cfg.vocab = vocab;
  cfg.d_model = size_t(cfg_num(kv, "model.d", 64));
  cfg.p_sem = size_t(cfg_num(kv, "model.p", 16));
  cfg.heads = size_t(cfg_num(kv, "model.heads", 4));
  cfg.enc_layers = size_t(cfg_num(kv, "model.enc_layers", 2));
  cfg.dec_layers = size_t(cfg_num(kv, "model.dec_layers", 2));
  cfg.g_hidden = size_t(cfg_num(kv, "model.g_hidden", 64));
  cfg.ffn_hidden = size_t(cfg_num(kv, "model.ffn_hidden", 4 * cfg.d_model));
  cfg.max_len = size_t(cfg_num(kv, "model.max_len", 64));
  cfg.ffn_mode = ffn_mode_from_name(
      !ffn_mode_override.empty() ? ffn_mode_override : cfg_str(kv, "model.ffn_mode", "monotone"));
  cfg.g_act = activation_from_name(cfg_str(kv, "model.g_act", "sigmoid"));
  cfg.ffn_act = activation_from_name(cfg_str(kv, "model.ffn_act", "relu"));
  cfg.validate();
  return cfg;
}

TrainConfig train_config_from_file(const std::map<std::string, std::string>& kv, uint64_t seed) {
  TrainConfig tc;
  tc.lr = cfg_num(kv, "train.lr", 1e-3);
  tc.weight_decay = cfg_num(kv, "train.weight_decay", 0.01);
  tc.batch_size = size_t(cfg_num(kv, "train.batch_size", 4));
  tc.epochs = size_t(cfg_num(kv, "train.epochs", 5));
  tc.warmup_fraction = cfg_num(kv, "train.warmup_fraction", 0.10);
  tc.clip_norm = cfg_num(kv, "train.clip_norm", 1.0);
  tc.lambda = cfg_num(kv, "train.lambda", 1.0);
  tc.temperature = cfg_num(kv, "train.temperature", 2.0);
  tc.val_fraction = cfg_num(kv, "train.val_fraction", 0.2);
  tc.seed = seed;
  tc.validate();
  return tc;
}

std::vector<std::shared_ptr<const SemanticOrder>> build_orders(
    const std::map<std::string, std::string>& kv, const ModelConfig& cfg, uint64_t seed) {
  const std::string mode = cfg_str(kv, "semorder.mode", "probe");
  auto one = [&]() -> SemanticOrder {
    if (mode == "identity") {
      check(cfg.p_sem == cfg.d_model, "semorder: identity mode requires p == d (got ", cfg.p_sem,
            " vs ", cfg.d_model, ")");
      return SemanticOrder::identity(cfg.d_model);
    }
    if (mode == "file") {
      const std::string file = cfg_str(kv, "semorder.file", "");
      check(!file.empty(), "semorder: file mode needs semorder.file");
      SemanticOrder so = SemanticOrder::load(file);
      check(so.p() == cfg.p_sem && so.d() == cfg.d_model, "semorder: file is ", so.p(), "x",
            so.d(), ", config wants ", cfg.p_sem, "x", cfg.d_model);
      return so;
    }
    if (mode == "probe") {
      Rng rng = Rng(seed).split("semorder");
      const size_t n_pairs = size_t(cfg_num(kv, "semorder.probe_pairs", 200));
      SyntheticPairs sp = make_synthetic_ordered_pairs(cfg.p_sem, cfg.d_model, n_pairs, rng);
      return SemanticOrder::fit_axes(sp.pairs, cfg.p_sem, cfg.d_model);
    }
    fail("semorder: unknown mode '", mode, "' (identity, file or probe)");
  };
  return {std::make_shared<const SemanticOrder>(one())};
}

void write_runlog(const RunLog& log, const fs::path& path) {
  json j;
  j["initial_loss"] = log.initial_loss;
  j["train_loss"] = log.train_loss;
  j["val_loss"] = log.val_loss;
  j["lr_by_step"] = log.lr_by_step;
  j["wall_seconds"] = log.wall_seconds;
  j["best_epoch"] = log.best_epoch;
  j["best_val"] = log.best_val;
  j["adam"] = {{"beta1", log.adam_beta1}, {"beta2", log.adam_beta2}, {"eps", log.adam_eps}};
  std::ofstream out(path);
  check(out.good(), "runlog: cannot write ", path.string());
  out << j.dump(2) << "\n";
}

DecodeConfig decode_config_from_file(const std::map<std::string, std::string>& kv) {
  DecodeConfig dc;
  dc.beam = size_t(cfg_num(kv, "attack.beam", 4));
  dc.length_penalty = cfg_num(kv, "attack.length_penalty", 1.2);
  dc.min_len = size_t(cfg_num(kv, "attack.min_len", 1));
  dc.max_len = size_t(cfg_num(kv, "attack.max_len", 16));
  dc.no_repeat_ngram = size_t(cfg_num(kv, "attack.no_repeat_ngram", 3));
  return dc;
}

struct LoadedData {
  Tokenizer tok;
  Dataset data;
  std::vector<EncodedExample> encoded;
  Split split;
};

LoadedData load_data(const std::map<std::string, std::string>& kv, size_t max_len,
                     uint64_t seed, double val_fraction) {
  const std::string vocab_path = cfg_str(kv, "data.vocab", "");
  const std::string data_path = cfg_str(kv, "data.dataset", "");
  check(!vocab_path.empty(), "config: [data] vocab is required");
  check(!data_path.empty(), "config: [data] dataset is required");
  LoadedData ld{Tokenizer::load(vocab_path), load_jsonl(data_path), {}, {}};
  check(ld.data.size() > 0, "dataset ", data_path, " is empty");
  ld.encoded = encode_dataset(ld.data, ld.tok, max_len);
  ld.split = split_indices(ld.encoded.size(), val_fraction, seed);
  return ld;
}

int cmd_gendata(const std::string& out, const std::string& task, size_t n, uint64_t seed,
                size_t min_clauses, size_t max_clauses, bool style_tail) {
  fs::create_directories(out);
  Manifest man;
  man.command = "gendata";
  man.seed = seed;
  man.config = {{"task", task},
                {"n", std::to_string(n)},
                {"min_clauses", std::to_string(min_clauses)},
                {"max_clauses", std::to_string(max_clauses)},
                {"style_tail", style_tail ? "1" : "0"}};

  Rng rng(seed);
  Dataset data;
  if (task == "copy")
    data = make_copy_dataset(n, rng);
  else if (task == "firstclause")
    data = make_firstclause_dataset(n, rng, min_clauses, max_clauses, style_tail);
  else
    fail("gendata: unknown task '", task, "' (copy or firstclause)");

  Tokenizer tok = Tokenizer::from_tokens(toy_vocabulary());
  const std::string vocab_path = (fs::path(out) / "vocab.txt").string();
  const std::string data_path = (fs::path(out) / "data.jsonl").string();
  tok.save(vocab_path);
  save_jsonl(data, data_path);
  man.artifacts = {vocab_path, data_path};
  man.write(out);
  std::cout << "wrote " << data.size() << " examples to " << data_path << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out, uint64_t seed,
              const std::string& ffn_mode_override, const std::string& init_checkpoint) {
  fs::create_directories(out);
  auto kv = parse_config_file(config_path);
  TrainConfig tc = train_config_from_file(kv, seed);
  LoadedData ld = load_data(kv, size_t(cfg_num(kv, "model.max_len", 64)), seed, tc.val_fraction);

  Manifest man;
  man.command = "train";
  man.seed = seed;
  man.config = kv;
  man.config["resolved.ffn_mode"] =
      !ffn_mode_override.empty() ? ffn_mode_override : cfg_str(kv, "model.ffn_mode", "monotone");

  ModelGraph model = [&]() {
    if (!init_checkpoint.empty()) {
      man.add_checkpoint(init_checkpoint);
      return load_checkpoint(init_checkpoint);
    }
    ModelConfig mc = model_config_from_file(kv, ld.tok.vocab(), ffn_mode_override);
    Rng rng(seed);
    if (mc.ffn_mode == FfnMode::Monotone) {
      ModelGraph m(mc, build_orders(kv, mc, seed));
      Rng init = rng.split("init");
      m.init_params(init);
      return m;
    }
    ModelGraph m(mc);
    Rng init = rng.split("init");
    m.init_params(init);
    return m;
  }();
  check(model.config().vocab == ld.tok.vocab(), "train: checkpoint vocab ", model.config().vocab,
        " differs from vocabulary file (", ld.tok.vocab(), ")");

  RunLog log = train_model(model, ld.data, ld.tok, tc);

  const std::string ckpt = (fs::path(out) / "checkpoint.bin").string();
  const std::string runlog = (fs::path(out) / "runlog.json").string();
  save_checkpoint(model, ckpt);
  write_runlog(log, runlog);
  man.add_checkpoint(ckpt);
  man.artifacts = {ckpt, runlog};
  man.write(out);

  std::cout << "initial loss " << log.initial_loss << ", best val " << log.best_val
            << " at epoch " << log.best_epoch << ", checkpoint " << ckpt << "\n";
  return 0;
}

int cmd_distill(const std::string& config_path, const std::string& out, uint64_t seed,
                const std::string& teacher_path) {
  fs::create_directories(out);
  auto kv = parse_config_file(config_path);
  check(!teacher_path.empty(), "distill: --checkpoint (teacher) is required");

  TrainConfig tc = train_config_from_file(kv, seed);
  if (!kv.count("train.lambda")) tc.lambda = 0.5;  // distillation default mix

  ModelGraph teacher = load_checkpoint(teacher_path);
  check(teacher.config().ffn_mode == FfnMode::Unconstrained,
        "distill: teacher checkpoint must be unconstrained");
  LoadedData ld = load_data(kv, teacher.config().max_len, seed, tc.val_fraction);
  check(teacher.config().vocab == ld.tok.vocab(), "distill: teacher vocab mismatch");

  ModelConfig mc = teacher.config();
  mc.ffn_mode = FfnMode::Monotone;
  mc.p_sem = size_t(cfg_num(kv, "model.p", 16));
  mc.g_hidden = size_t(cfg_num(kv, "model.g_hidden", 64));
  mc.g_act = activation_from_name(cfg_str(kv, "model.g_act", "sigmoid"));
  mc.validate();

  ModelGraph student = make_monotone_student(teacher, build_orders(kv, mc, seed), mc.p_sem,
                                             mc.g_hidden, mc.g_act, seed);
  RunLog log = distill(teacher, student, ld.data, ld.tok, tc);

  Manifest man;
  man.command = "distill";
  man.seed = seed;
  man.config = kv;
  man.config["resolved.lambda"] = std::to_string(tc.lambda);
  man.add_checkpoint(teacher_path);
  const std::string ckpt = (fs::path(out) / "student.bin").string();
  const std::string runlog = (fs::path(out) / "runlog.json").string();
  save_checkpoint(student, ckpt);
  write_runlog(log, runlog);
  man.add_checkpoint(ckpt);
  man.artifacts = {ckpt, runlog};
  man.write(out);

  std::cout << "student initial loss " << log.initial_loss << ", best val " << log.best_val
            << ", checkpoint " << ckpt << "\n";
  return 0;
}

int cmd_attack(const std::string& config_path, const std::string& out, uint64_t seed,
               const std::string& checkpoint) {
  fs::create_directories(out);
  auto kv = parse_config_file(config_path);
  check(!checkpoint.empty(), "attack: --checkpoint is required");
  ModelGraph model = load_checkpoint(checkpoint);
  LoadedData ld = load_data(kv, model.config().max_len, seed,
                            cfg_num(kv, "train.val_fraction", 0.2));
  check(model.config().vocab == ld.tok.vocab(), "attack: checkpoint vocab mismatch");

  Manifest man;
  man.command = "attack";
  man.seed = seed;
  man.config = kv;
  man.add_checkpoint(checkpoint);

  const std::string kind = cfg_str(kv, "attack.kind", "hotflip");
  const double threshold = cfg_num(kv, "attack.threshold", 0.10);

  if (kind == "hotflip") {
    HotFlipConfig hc;
    hc.max_replacements = size_t(cfg_num(kv, "attack.k", 5));
    hc.greedy = cfg_num(kv, "attack.greedy", 0) != 0;
    const std::string cand = cfg_str(kv, "attack.candidates", "all");
    if (cand == "punct") {
      hc.candidate_mask.assign(ld.tok.vocab(), false);
      for (size_t id = kUnkId + 1; id < ld.tok.vocab(); ++id) {
        bool has_alnum = false;
        for (char c : ld.tok.token(id))
          if (std::isalnum(static_cast<unsigned char>(c))) has_alnum = true;
        if (!has_alnum) hc.candidate_mask[id] = true;
      }
    } else {
      check(cand == "all", "attack: candidates must be all or punct, got '", cand, "'");
    }
    const bool with_gen = cfg_num(kv, "attack.generation", 0) != 0;
    const size_t cap = size_t(cfg_num(kv, "attack.examples", 0));

    std::vector<AttackOutcome> outcomes;
    size_t used = 0;
    for (size_t idx : ld.split.val) {
      if (cap && used >= cap) break;
      ++used;
      const EncodedExample& e = ld.encoded[idx];
      AttackOutcome o;
      if (with_gen) {
        GenerationEval gen;
        gen.tok = &ld.tok;
        gen.reference_text = ld.data.examples[idx].target;
        gen.decode = decode_config_from_file(kv);
        o = hotflip(model, e, hc, &gen);
      } else {
        o = hotflip(model, e, hc);
      }
      o.example_id = idx;
      outcomes.push_back(std::move(o));
    }
    check(!outcomes.empty(), "attack: no validation examples to attack");
    RobustnessSummary sum = robustness_summary(outcomes, threshold, seed);
    const std::string report = (fs::path(out) / "hotflip_report.csv").string();
    write_attack_report_csv(outcomes, sum, report);
    man.artifacts = {report};
    man.write(out);
    std::cout << "hotflip on " << outcomes.size() << " examples: mean degradation "
              << sum.degradation.mean << ", success rate " << sum.success_rate << " -> " << report
              << "\n";
    return 0;
  }

  if (kind == "uat") {
    TriggerConfig tcfg;
    tcfg.length = size_t(cfg_num(kv, "attack.trigger_length", 3));
    tcfg.restarts = size_t(cfg_num(kv, "attack.restarts", 3));
    tcfg.iterations = size_t(cfg_num(kv, "attack.iterations", 50));
    tcfg.shortlist = size_t(cfg_num(kv, "attack.shortlist", 20));
    tcfg.seed = seed;

    const size_t want_train = size_t(cfg_num(kv, "attack.uat_train_n", 80));
    const size_t want_test = size_t(cfg_num(kv, "attack.uat_test_n", 120));
    std::vector<EncodedExample> opt_set, test_set;
    for (size_t i = 0; i < ld.split.val.size(); ++i) {
      const EncodedExample& e = ld.encoded[ld.split.val[i]];
      if (opt_set.size() < want_train)
        opt_set.push_back(e);
      else if (test_set.size() < want_test)
        test_set.push_back(e);
    }
    check(!opt_set.empty(), "attack: no examples to optimize the trigger on");
    check(!test_set.empty(), "attack: no disjoint test examples; lower uat_train_n");
    tcfg.candidate_mask = biased_candidate_vocabulary(ld.tok, opt_set);

    TriggerResult res = uat_search(model, opt_set, tcfg);

    std::vector<AttackOutcome> outcomes;
    for (size_t i = 0; i < test_set.size(); ++i) {
      AttackOutcome o;
      o.example_id = i;
      o.clean_loss = model.sequence_nll(test_set[i].src, test_set[i].tgt);
      std::vector<size_t> src = res.tokens;
      src.insert(src.end(), test_set[i].src.begin(), test_set[i].src.end());
      o.attacked_loss = model.sequence_nll(src, test_set[i].tgt);
      o.trigger = res.tokens;
      outcomes.push_back(std::move(o));
    }
    RobustnessSummary sum = robustness_summary(outcomes, threshold, seed);

    const std::string trig_path = (fs::path(out) / "trigger.txt").string();
    {
      std::ofstream tout(trig_path);
      for (size_t i = 0; i < res.tokens.size(); ++i)
        tout << (i ? " " : "") << res.tokens[i];
      tout << "\n";
      for (size_t i = 0; i < res.tokens.size(); ++i)
        tout << (i ? " " : "") << ld.tok.token(res.tokens[i]);
      tout << "\n";
    }
    const std::string report = (fs::path(out) / "uat_report.csv").string();
    write_attack_report_csv(outcomes, sum, report);
    man.artifacts = {trig_path, report};
    man.write(out);
    std::cout << "trigger [";
    for (size_t i = 0; i < res.tokens.size(); ++i)
      std::cout << (i ? " " : "") << ld.tok.token(res.tokens[i]);
    std::cout << "] train-set loss " << res.train_loss << " (clean " << res.clean_loss
              << "), test mean NLL increase " << 100.0 * sum.degradation.mean << "% -> " << report
              << "\n";
    return 0;
  }

  fail("attack: unknown kind '", kind, "' (hotflip or uat)");
}

int cmd_verify(const std::string& checkpoint, const std::string& out, uint64_t seed,
               size_t order_samples, size_t jacobian_samples, size_t persistence_samples,
               bool negative_control) {
  fs::create_directories(out);
  check(!checkpoint.empty(), "verify: --checkpoint is required");
  ModelGraph model = load_checkpoint(checkpoint);
  VerificationReport rep = verify_model(model, order_samples, jacobian_samples,
                                        persistence_samples, seed, negative_control);
  write_report_text(rep, std::cout);

  Manifest man;
  man.command = "verify";
  man.seed = seed;
  man.add_checkpoint(checkpoint);
  man.config = {{"order_samples", std::to_string(order_samples)},
                {"jacobian_samples", std::to_string(jacobian_samples)},
                {"persistence_samples", std::to_string(persistence_samples)},
                {"negative_control", negative_control ? "1" : "0"}};
  const std::string csv = (fs::path(out) / "verify_report.csv").string();
  const std::string txt = (fs::path(out) / "verify_report.txt").string();
  write_report_csv(rep, csv);
  {
    std::ofstream tout(txt);
    write_report_text(rep, tout);
  }
  man.artifacts = {csv, txt};
  man.write(out);
  return rep.all_pass() ? 0 : 2;
}

int cmd_eval(const std::string& config_path, const std::string& out, uint64_t seed,
             const std::string& checkpoint) {
  fs::create_directories(out);
  auto kv = parse_config_file(config_path);
  check(!checkpoint.empty(), "eval: --checkpoint is required");
  ModelGraph model = load_checkpoint(checkpoint);
  LoadedData ld = load_data(kv, model.config().max_len, seed,
                            cfg_num(kv, "train.val_fraction", 0.2));
  check(model.config().vocab == ld.tok.vocab(), "eval: checkpoint vocab mismatch");
  check(!ld.split.val.empty(), "eval: validation split is empty");
  DecodeConfig dc = decode_config_from_file(kv);

  std::vector<double> nlls, r1s, r2s, rls;
  const std::string csv_path = (fs::path(out) / "eval.csv").string();
  std::ofstream csv(csv_path);
  check(csv.good(), "eval: cannot write ", csv_path);
  csv << "id,nll,rouge1,rouge2,rougeL\n";
  for (size_t idx : ld.split.val) {
    const EncodedExample& e = ld.encoded[idx];
    const double nll = model.sequence_nll(e.src, e.tgt);
    const std::string hyp = ld.tok.decode(decode(model, e.src, dc).tokens);
    RougeScores rs = rouge_all(hyp, ld.data.examples[idx].target);
    nlls.push_back(nll);
    r1s.push_back(rs.rouge1.f1);
    r2s.push_back(rs.rouge2.f1);
    rls.push_back(rs.rougeL.f1);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", idx, nll, rs.rouge1.f1,
                  rs.rouge2.f1, rs.rougeL.f1);
    csv << buf;
  }

  auto line = [&](const char* name, const std::vector<double>& vals, uint64_t s) {
    StatSummary st = summarize_mean(vals, 1000, s);
    std::ostringstream os;
    os.precision(6);
    os << name << ": mean " << st.mean << " [" << st.lo << ", " << st.hi << "] (n=" << st.n
       << ", 95% bootstrap)";
    return os.str();
  };
  const std::string sum_path = (fs::path(out) / "eval_summary.txt").string();
  {
    std::ofstream sum(sum_path);
    sum << line("nll", nlls, seed) << "\n"
        << line("rouge1_f1", r1s, seed + 1) << "\n"
        << line("rouge2_f1", r2s, seed + 2) << "\n"
        << line("rougeL_f1", rls, seed + 3) << "\n";
  }
  std::cout << line("nll", nlls, seed) << "\n" << line("rougeL_f1", rls, seed + 3) << "\n";

  Manifest man;
  man.command = "eval";
  man.seed = seed;
  man.config = kv;
  man.add_checkpoint(checkpoint);
  man.artifacts = {csv_path, sum_path};
  man.write(out);
  return 0;
}

struct CsvAttackRow {
  size_t id;
  double clean, attacked, degradation;
};

std::vector<CsvAttackRow> read_attack_csv(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "report: cannot open ", path);
  std::vector<CsvAttackRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string f;
    CsvAttackRow r{};
    std::getline(ls, f, ',');
    r.id = std::stoul(f);
    std::getline(ls, f, ',');
    r.clean = std::stod(f);
    std::getline(ls, f, ',');
    r.attacked = std::stod(f);
    std::getline(ls, f, ',');
    r.degradation = std::stod(f);
    rows.push_back(r);
  }
  check(!rows.empty(), "report: no data rows in ", path);
  return rows;
}

int cmd_transfer(const std::string& config_path, const std::vector<std::string>& checkpoints,
                 const std::vector<std::string>& trigger_files, const std::string& out,
                 uint64_t seed) {
  fs::create_directories(out);
  check(checkpoints.size() >= 1 && trigger_files.size() >= 1,
        "report: transfer mode needs at least one checkpoint and one trigger file");
  auto kv = parse_config_file(config_path);

  std::vector<ModelGraph> models;
  Manifest man;
  man.command = "report-transfer";
  man.seed = seed;
  man.config = kv;
  for (const auto& c : checkpoints) {
    models.push_back(load_checkpoint(c));
    man.add_checkpoint(c);
  }
  std::vector<const ModelGraph*> model_ptrs;
  for (const auto& m : models) model_ptrs.push_back(&m);

  std::vector<std::vector<size_t>> triggers;
  for (const auto& tf : trigger_files) {
    std::ifstream in(tf);
    check(in.good(), "report: cannot open trigger file ", tf);
    std::string first_line;
    std::getline(in, first_line);
    std::istringstream ls(first_line);
    std::vector<size_t> trig;
    size_t id;
    while (ls >> id) trig.push_back(id);
    check(!trig.empty(), "report: no trigger ids in ", tf);
    triggers.push_back(std::move(trig));
  }

  LoadedData ld = load_data(kv, models[0].config().max_len, seed,
                            cfg_num(kv, "train.val_fraction", 0.2));
  std::vector<EncodedExample> test_set;
  for (size_t idx : ld.split.val) test_set.push_back(ld.encoded[idx]);
  check(!test_set.empty(), "report: empty evaluation split");

  Tensor matrix = transfer_matrix(model_ptrs, triggers, test_set);
  const std::string path = (fs::path(out) / "transfer.csv").string();
  write_transfer_csv(matrix, path);
  man.artifacts = {path};
  man.write(out);
  std::cout << "transfer matrix (" << matrix.shape[0] << "x" << matrix.shape[1]
            << ", percent NLL increase) -> " << path << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& attack_csvs, const std::string& out,
               double threshold) {
  fs::create_directories(out);
  check(attack_csvs.size() == 2, "report: exactly two attack CSVs are required");
  auto a = read_attack_csv(attack_csvs[0]);
  auto b = read_attack_csv(attack_csvs[1]);

  // pair rows by example id
  std::map<size_t, CsvAttackRow> bm;
  for (const auto& r : b) bm[r.id] = r;
  std::vector<double> deg_a, deg_b;
  size_t succ_a = 0, succ_b = 0;
  for (const auto& r : a) {
    auto it = bm.find(r.id);
    if (it == bm.end()) continue;
    deg_a.push_back(r.degradation);
    deg_b.push_back(it->second.degradation);
    if (r.degradation > threshold) ++succ_a;
    if (it->second.degradation > threshold) ++succ_b;
  }
  check(deg_a.size() >= 2, "report: fewer than two shared example ids");
  TTest t = paired_t(deg_a, deg_b);

  const std::string path = (fs::path(out) / "comparison.csv").string();
  {
    std::ofstream c(path);
    c << "metric,run_a,run_b\n";
    char buf[256];
    double mean_a = 0, mean_b = 0;
    for (double v : deg_a) mean_a += v;
    for (double v : deg_b) mean_b += v;
    mean_a /= double(deg_a.size());
    mean_b /= double(deg_b.size());
    std::snprintf(buf, sizeof buf, "mean_degradation,%.8g,%.8g\n", mean_a, mean_b);
    c << buf;
    std::snprintf(buf, sizeof buf, "success_rate,%.8g,%.8g\n",
                  double(succ_a) / double(deg_a.size()), double(succ_b) / double(deg_b.size()));
    c << buf;
    std::snprintf(buf, sizeof buf, "paired_t,%.8g,\npaired_p,%.8g,\ncohen_d,%.8g,\nn,%zu,\n",
                  t.t, t.p, t.cohen_d, deg_a.size());
    c << buf;
    c << "test_kind,paired,\n";
  }
  std::cout << "paired comparison over " << deg_a.size() << " shared examples: t = " << t.t
            << ", p = " << t.p << ", d = " << t.cohen_d << " -> " << path << "\n";

  Manifest man;
  man.command = "report";
  man.config = {{"a", attack_csvs[0]},
                {"b", attack_csvs[1]},
                {"threshold", std::to_string(threshold)},
                {"test_kind", "paired"}};
  man.artifacts = {path};
  man.write(out);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"monoformer: monotone-feed-forward transformer toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "runs/out", ffn_mode, checkpoint, task = "firstclause";
  uint64_t seed = 42;
  size_t n_examples = 600, min_clauses = 2, max_clauses = 4;
  bool style_tail = false;
  size_t order_samples = 10000, jacobian_samples = 1000, persistence_samples = 1000;
  bool negative_control = false;
  double threshold = 0.10;
  std::vector<std::string> attack_csvs;

  auto* gen = app.add_subcommand("gendata", "generate a toy dataset and vocabulary");
  gen->add_option("--out", out_dir, "output directory");
  gen->add_option("--task", task, "copy or firstclause");
  gen->add_option("--n", n_examples, "number of examples");
  gen->add_option("--seed", seed, "rng seed");
  gen->add_option("--min-clauses", min_clauses, "firstclause: fewest clauses per source");
  gen->add_option("--max-clauses", max_clauses, "firstclause: most clauses per source");
  gen->add_flag("--style-tail", style_tail, "firstclause: end targets with a random style word");

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--seed", seed, "rng seed");
  train->add_option("--ffn-mode", ffn_mode, "monotone or unconstrained (overrides config)");
  train->add_option("--checkpoint", checkpoint, "optional starting checkpoint");

  auto* dist = app.add_subcommand("distill", "distill a teacher into a monotone student");
  dist->add_option("--config", config_path, "config file")->required();
  dist->add_option("--checkpoint", checkpoint, "teacher checkpoint")->required();
  dist->add_option("--out", out_dir, "output directory");
  dist->add_option("--seed", seed, "rng seed");

  auto* atk = app.add_subcommand("attack", "run hotflip or trigger attacks on a checkpoint");
  atk->add_option("--config", config_path, "config file")->required();
  atk->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  atk->add_option("--out", out_dir, "output directory");
  atk->add_option("--seed", seed, "rng seed");

  auto* ver = app.add_subcommand("verify", "run the monotonicity property checks");
  ver->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  ver->add_option("--out", out_dir, "output directory");
  ver->add_option("--seed", seed, "rng seed");
  ver->add_option("--order-samples", order_samples, "order-preservation samples per sublayer");
  ver->add_option("--jacobian-samples", jacobian_samples, "jacobian samples per sublayer");
  ver->add_option("--persistence-samples", persistence_samples, "persistence samples");
  ver->add_flag("--negative-control", negative_control,
                "inject a negative weight to prove the checks can fail");

  auto* ev = app.add_subcommand("eval", "evaluate NLL and ROUGE with bootstrap intervals");
  ev->add_option("--config", config_path, "config file")->required();
  ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  ev->add_option("--out", out_dir, "output directory");
  ev->add_option("--seed", seed, "rng seed");

  auto* rep = app.add_subcommand("report",
                                 "compare two attack reports, or build a trigger transfer matrix");
  std::vector<std::string> rep_checkpoints, rep_triggers;
  rep->add_option("--attack-csv", attack_csvs, "two attack report CSVs")->expected(2);
  rep->add_option("--out", out_dir, "output directory");
  rep->add_option("--threshold", threshold, "success threshold on degradation");
  rep->add_option("--config", config_path, "config file (transfer mode)");
  rep->add_option("--checkpoint", rep_checkpoints, "model checkpoints (transfer mode)");
  rep->add_option("--trigger", rep_triggers, "trigger files from uat attacks (transfer mode)");
  rep->add_option("--seed", seed, "rng seed (transfer mode)");

  std::vector<const char*> argv;
  argv.push_back("mono");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed())
      return cmd_gendata(out_dir, task, n_examples, seed, min_clauses, max_clauses, style_tail);
    if (train->parsed()) return cmd_train(config_path, out_dir, seed, ffn_mode, checkpoint);
    if (dist->parsed()) return cmd_distill(config_path, out_dir, seed, checkpoint);
    if (atk->parsed()) return cmd_attack(config_path, out_dir, seed, checkpoint);
    if (ver->parsed())
      return cmd_verify(checkpoint, out_dir, seed, order_samples, jacobian_samples,
                        persistence_samples, negative_control);
    if (ev->parsed()) return cmd_eval(config_path, out_dir, seed, checkpoint);
    if (rep->parsed()) {
      if (!rep_checkpoints.empty() || !rep_triggers.empty())
        return cmd_transfer(config_path, rep_checkpoints, rep_triggers, out_dir, seed);
      return cmd_report(attack_csvs, out_dir, threshold);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string msg = e.what();
    const bool numerical = msg.find("divergence") != std::string::npos ||
                           msg.find("non-finite") != std::string::npos ||
                           msg.find("not positive definite") != std::string::npos;
    return numerical ? 3 : 1;
  }
  return 1;
}

}  // namespace mono
