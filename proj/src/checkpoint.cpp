#include "mono/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mono/rng.hpp"

namespace mono {

namespace {
constexpr const char* kMagic = "MONOCKPT";
constexpr int kVersion = 1;
}  // namespace

std::map<std::string, std::string> model_config_to_kv(const ModelConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["vocab"] = std::to_string(cfg.vocab);
  kv["d_model"] = std::to_string(cfg.d_model);
  kv["p_sem"] = std::to_string(cfg.p_sem);
  kv["heads"] = std::to_string(cfg.heads);
  kv["enc_layers"] = std::to_string(cfg.enc_layers);
  kv["dec_layers"] = std::to_string(cfg.dec_layers);
  kv["g_hidden"] = std::to_string(cfg.g_hidden);
  kv["ffn_hidden"] = std::to_string(cfg.ffn_hidden);
  kv["max_len"] = std::to_string(cfg.max_len);
  kv["ffn_mode"] = ffn_mode_name(cfg.ffn_mode);
  kv["g_act"] = activation_name(cfg.g_act);
  kv["ffn_act"] = activation_name(cfg.ffn_act);
  kv["per_layer_order"] = cfg.per_layer_order ? "1" : "0";
  return kv;
}

ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig cfg;
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    check(it != kv.end(), "checkpoint config: missing key '", key, "'");
    return it->second;
  };
  auto get_num = [&](const char* key) -> size_t {
    const std::string& s = get(key);
    try {
      return std::stoul(s);
    } catch (...) {
      fail("checkpoint config: bad numeric value '", s, "' for '", key, "'");
    }
  };
  cfg.vocab = get_num("vocab");
  cfg.d_model = get_num("d_model");
  cfg.p_sem = get_num("p_sem");
  cfg.heads = get_num("heads");
  cfg.enc_layers = get_num("enc_layers");
  cfg.dec_layers = get_num("dec_layers");
  cfg.g_hidden = get_num("g_hidden");
  cfg.ffn_hidden = get_num("ffn_hidden");
  cfg.max_len = get_num("max_len");
  cfg.ffn_mode = ffn_mode_from_name(get("ffn_mode"));
  cfg.g_act = activation_from_name(get("g_act"));
  cfg.ffn_act = activation_from_name(get("ffn_act"));
  cfg.per_layer_order = get("per_layer_order") == "1";
  cfg.validate();
  return cfg;
}

static void write_block(std::ofstream& out, const std::string& name, const Tensor& t) {
  out << "block " << name << " " << t.ndim();
  for (size_t e : t.shape) out << " " << e;
  out << "\n";
  out.write(reinterpret_cast<const char*>(t.v.data()),
            std::streamsize(t.v.size() * sizeof(double)));
  out << "\n";
}

void save_checkpoint(const ModelGraph& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "checkpoint: cannot write ", path);

  out << kMagic << " " << kVersion << "\n";
  out << "config_begin\n";
  for (const auto& [k, v] : model_config_to_kv(model.config())) out << k << "=" << v << "\n";
  out << "config_end\n";

  const auto params = model.params();
  const auto& orders = model.orders();
  out << "blocks " << params.size() + orders.size() << "\n";
  for (size_t i = 0; i < orders.size(); ++i)
    write_block(out, "order" + std::to_string(i) + ".A", orders[i]->a());
  for (const auto& p : params) write_block(out, p.name, *p.t);
  check(out.good(), "checkpoint: write failed for ", path);
}

ModelGraph load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "checkpoint: cannot open ", path);

  std::string magic;
  int version = 0;
  in >> magic >> version;
  check(magic == kMagic, "checkpoint: bad magic '", magic, "' in ", path);
  check(version == kVersion, "checkpoint: unsupported format version ", version);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  check(line == "config_begin", "checkpoint: expected config_begin, got '", line, "'");

  std::map<std::string, std::string> kv;
  while (std::getline(in, line) && line != "config_end") {
    const size_t eq = line.find('=');
    check(eq != std::string::npos, "checkpoint: bad config line '", line, "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  check(line == "config_end", "checkpoint: truncated config block");
  ModelConfig cfg = model_config_from_kv(kv);

  std::string word;
  size_t n_blocks = 0;
  in >> word >> n_blocks;
  check(word == "blocks", "checkpoint: expected block count, got '", word, "'");
  std::getline(in, line);

  std::map<std::string, Tensor> blocks;
  for (size_t bi = 0; bi < n_blocks; ++bi) {
    std::string tag, name;
    size_t ndim = 0;
    in >> tag >> name >> ndim;
    check(tag == "block" && in.good(), "checkpoint: malformed block header #", bi);
    check(ndim <= 2, "checkpoint: block '", name, "' has unsupported rank ", ndim);
    std::vector<size_t> shape(ndim);
    for (auto& e : shape) in >> e;
    std::getline(in, line);
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.v.data()), std::streamsize(t.v.size() * sizeof(double)));
    check(in.good(), "checkpoint: truncated data for block '", name, "'");
    std::getline(in, line);
    blocks.emplace(name, std::move(t));
  }

  std::vector<std::shared_ptr<const SemanticOrder>> orders;
  if (cfg.ffn_mode == FfnMode::Monotone) {
    const size_t want = cfg.per_layer_order ? cfg.enc_layers + cfg.dec_layers : 1;
    for (size_t i = 0; i < want; ++i) {
      auto it = blocks.find("order" + std::to_string(i) + ".A");
      check(it != blocks.end(), "checkpoint: missing semantic order block #", i);
      orders.push_back(
          std::make_shared<const SemanticOrder>(SemanticOrder::from_matrix(it->second)));
      blocks.erase(it);
    }
  }

  ModelGraph model = cfg.ffn_mode == FfnMode::Monotone ? ModelGraph(cfg, std::move(orders))
                                                       : ModelGraph(cfg);
  for (auto& p : model.params()) {
    auto it = blocks.find(p.name);
    check(it != blocks.end(), "checkpoint: missing parameter block '", p.name, "'");
    check(it->second.shape == p.t->shape, "checkpoint: block '", p.name, "' has shape ",
          it->second.shape_str(), ", model expects ", p.t->shape_str());
    p.t->v = std::move(it->second.v);
    blocks.erase(it);
  }
  check(blocks.empty(), "checkpoint: ", blocks.size(), " unused blocks (first: '",
        blocks.empty() ? "" : blocks.begin()->first, "')");
  return model;
}

std::string checkpoint_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "checkpoint hash: cannot open ", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  const uint64_t h = fnv1a(bytes.data(), bytes.size());
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mono
