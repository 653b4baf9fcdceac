#include "kdeformer/bench/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "kdeformer/core/error.hpp"

namespace kdeformer::bench {

namespace {

[[noreturn]] void config_error(const std::string& what) { fail(ErrorCode::kConfig, what); }

std::size_t as_count(const toml::node& node, const std::string& key) {
  const auto v = node.as_integer();
  if (v == nullptr) config_error("'" + key + "' must be an integer");
  if (v->get() <= 0) config_error("'" + key + "' must be positive, got " + std::to_string(v->get()));
  return static_cast<std::size_t>(v->get());
}

std::vector<std::size_t> as_count_list(const toml::node& node, const std::string& key) {
  std::vector<std::size_t> out;
  if (const auto* arr = node.as_array()) {
    if (arr->empty()) config_error("'" + key + "' must not be empty");
    for (const auto& el : *arr) out.push_back(as_count(el, key));
  } else {
    out.push_back(as_count(node, key));
  }
  return out;
}

double as_real(const toml::node& node, const std::string& key) {
  if (const auto* i = node.as_integer()) return static_cast<double>(i->get());
  if (const auto* f = node.as_floating_point()) return f->get();
  config_error("'" + key + "' must be a number");
}

bool as_bool(const toml::node& node, const std::string& key) {
  const auto* b = node.as_boolean();
  if (b == nullptr) config_error("'" + key + "' must be true or false");
  return b->get();
}

std::string as_string(const toml::node& node, const std::string& key) {
  const auto* s = node.as_string();
  if (s == nullptr) config_error("'" + key + "' must be a string");
  return s->get();
}

std::vector<Method> as_methods(const toml::node& node) {
  std::vector<Method> out;
  if (const auto* arr = node.as_array()) {
    if (arr->empty()) config_error("'method' must not be empty");
    for (const auto& el : *arr) out.push_back(parse_method(as_string(el, "method")));
  } else {
    out.push_back(parse_method(as_string(node, "method")));
  }
  return out;
}

void parse_dataset(const toml::table& tbl, DatasetSource& ds) {
  for (const auto& [key_view, node] : tbl) {
    const std::string key(key_view.str());
    const std::string full = "dataset." + key;
    if (key == "kind") {
      ds.kind = parse_dataset_kind(as_string(node, full));
    } else if (key == "values") {
      ds.values = parse_value_source(as_string(node, full));
    } else if (key == "path_q") {
      ds.path_q = as_string(node, full);
    } else if (key == "path_k") {
      ds.path_k = as_string(node, full);
    } else if (key == "path_v") {
      ds.path_v = as_string(node, full);
    } else if (key == "clusters") {
      ds.params.clusters = as_count(node, full);
    } else if (key == "center_std") {
      ds.params.center_std = as_real(node, full);
    } else if (key == "cluster_std") {
      ds.params.cluster_std = as_real(node, full);
    } else if (key == "gamma") {
      ds.params.gamma = as_real(node, full);
    } else if (key == "glove_clusters") {
      ds.params.glove_clusters = as_count(node, full);
    } else if (key == "zipf_exponent") {
      ds.params.zipf_exponent = as_real(node, full);
    } else {
      config_error("unknown key '" + full + "'");
    }
  }
  if (ds.path_q.empty() && (!ds.path_k.empty() || !ds.path_v.empty())) {
    config_error("dataset.path_k / dataset.path_v need dataset.path_q");
  }
}

}  // namespace

Method parse_method(std::string_view name) {
  if (name == "exact") return Method::kExact;
  if (name == "kdeformer-basic") return Method::kKdeformerBasic;
  if (name == "kdeformer-practical") return Method::kKdeformerPractical;
  config_error("unknown method '" + std::string(name) + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kExact:
      return "exact";
    case Method::kKdeformerBasic:
      return "kdeformer-basic";
    case Method::kKdeformerPractical:
      return "kdeformer-practical";
  }
  return "unknown";
}

std::vector<std::size_t> BenchConfig::budgets(std::size_t n_value) const {
  if (k_ratio) {
    const double k_real = std::round(*k_ratio * static_cast<double>(n_value));
    return {std::max<std::size_t>(1, static_cast<std::size_t>(k_real))};
  }
  return k;
}

void BenchConfig::validate() const {
  if (methods.empty()) config_error("no method selected");
  if (n.empty()) config_error("no problem size n given");
  if (seeds.empty()) config_error("no seeds given");
  for (std::size_t v : n) {
    if (v == 0) config_error("n must be positive");
  }
  if (d == 0 || d_v == 0) config_error("d and d_v must be positive");
  if (lsh_rank == 0 || lsh_rank > 30) config_error("lsh_rank must lie in [1, 30]");
  if (oracle_ceiling == 0) config_error("oracle_ceiling must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) config_error("epsilon must lie in (0, 1)");
  if (!(tau > 0.0 && tau < 1.0)) config_error("tau must lie in (0, 1)");
  if (k_ratio && !(*k_ratio > 0.0 && *k_ratio <= 1.0)) config_error("k_ratio must lie in (0, 1]");
  if (!k_ratio && k.empty()) config_error("no budget k given");
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) config_error("seeds must be distinct");
  if (!dataset.from_files()) {
    for (std::size_t nv : n) {
      for (std::size_t kv : budgets(nv)) {
        if (kv == 0) config_error("k must be positive");
        if (kv > nv) {
          config_error("budget k = " + std::to_string(kv) + " exceeds n = " + std::to_string(nv));
        }
      }
    }
    const bool pool = dataset.values == ValueSource::kPool ||
                      (dataset.values == ValueSource::kAuto && dataset.kind == DatasetKind::kGloveLike);
    if (pool && d_v > d) {
      config_error("pooled values need d_v <= d");
    }
  }
}

BenchConfig parse_config(std::string_view toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
    config_error(msg.str());
  }

  BenchConfig cfg;
  bool have_seeds = false;
  bool have_k = false;
  for (const auto& [key_view, node] : root) {
    const std::string key(key_view.str());
    if (key == "method" || key == "methods") {
      cfg.methods = as_methods(node);
    } else if (key == "n") {
      cfg.n = as_count_list(node, key);
    } else if (key == "d") {
      cfg.d = as_count(node, key);
    } else if (key == "d_v") {
      cfg.d_v = as_count(node, key);
    } else if (key == "k") {
      cfg.k = as_count_list(node, key);
      have_k = true;
    } else if (key == "k_ratio") {
      cfg.k_ratio = as_real(node, key);
    } else if (key == "epsilon") {
      cfg.epsilon = as_real(node, key);
    } else if (key == "tau") {
      cfg.tau = as_real(node, key);
    } else if (key == "seeds") {
      if (have_seeds) config_error("give either 'seeds' or 'seed_count'");
      cfg.seeds.clear();
      const auto* arr = node.as_array();
      if (arr == nullptr || arr->empty()) config_error("'seeds' must be a non-empty integer array");
      for (const auto& el : *arr) {
        const auto* v = el.as_integer();
        if (v == nullptr || v->get() < 0) config_error("'seeds' entries must be non-negative integers");
        cfg.seeds.push_back(static_cast<std::uint64_t>(v->get()));
      }
      have_seeds = true;
    } else if (key == "seed_count") {
      if (have_seeds) config_error("give either 'seeds' or 'seed_count'");
      const std::size_t count = as_count(node, key);
      cfg.seeds.clear();
      for (std::size_t s = 1; s <= count; ++s) cfg.seeds.push_back(s);
      have_seeds = true;
    } else if (key == "lsh_rank") {
      cfg.lsh_rank = as_count(node, key);
    } else if (key == "block_size") {
      const auto* v = node.as_integer();
      if (v == nullptr || v->get() < 0) config_error("'block_size' must be a non-negative integer");
      cfg.block_size = static_cast<std::size_t>(v->get());
    } else if (key == "tied_kq") {
      cfg.tied_kq = as_bool(node, key);
    } else if (key == "reuse_kde_structure") {
      cfg.reuse_kde_structure = as_bool(node, key);
    } else if (key == "stable_ranks") {
      cfg.stable_ranks = as_bool(node, key);
    } else if (key == "oracle_ceiling") {
      cfg.oracle_ceiling = as_count(node, key);
    } else if (key == "output") {
      cfg.output = as_string(node, key);
    } else if (key == "dataset") {
      const auto* tbl = node.as_table();
      if (tbl == nullptr) config_error("'dataset' must be a table");
      parse_dataset(*tbl, cfg.dataset);
    } else {
      config_error("unknown key '" + key + "'");
    }
  }
  if (have_k && cfg.k_ratio) config_error("give either 'k' or 'k_ratio'");
  cfg.validate();
  return cfg;
}

BenchConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace kdeformer::bench
