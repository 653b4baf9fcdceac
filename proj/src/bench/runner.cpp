#include "kdeformer/bench/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "kdeformer/attention/kdeformer.hpp"
#include "kdeformer/bench/io.hpp"
#include "kdeformer/core/error.hpp"
#include "kdeformer/core/random.hpp"

namespace kdeformer::bench {

namespace {

using nlohmann::json;

constexpr std::uint64_t kLshStream = 21;
constexpr std::uint64_t kValueStream = 22;

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

// Same count exact_attention reports, for runs that skip the dense pass.
std::uint64_t exact_attention_flops(const AttentionInputs& inp) {
  const std::uint64_t nq = inp.num_queries();
  const std::uint64_t nk = inp.num_keys();
  return nq * nk * (2 * inp.dim() + 4 + 2 * inp.value_dim()) + nq * inp.value_dim();
}

DenseMatrix first_rows(const DenseMatrix& m, std::size_t n, const std::string& what) {
  require(m.rows() >= n, ErrorCode::kInvalidArgument,
          what + " holds " + std::to_string(m.rows()) + " rows, benchmark asks for n = " +
              std::to_string(n));
  if (m.rows() == n) return m;
  DenseMatrix out(n, m.cols());
  for (std::size_t i = 0; i < n; ++i) {
    auto src = m.row(i);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

attention::LshOptions lsh_options(const BenchConfig& cfg, std::uint64_t seed) {
  attention::LshOptions lsh;
  lsh.rank = cfg.lsh_rank;
  lsh.block_size = cfg.block_size;
  lsh.seed = derive_seed(seed, kLshStream);
  return lsh;
}

double srank(const DenseMatrix& m) {
  PowerIterationOptions opts;
  opts.tol = 1e-8;
  return spectral_stats(m, opts).stable_rank;
}

std::string dataset_label(const BenchConfig& cfg) {
  return cfg.dataset.from_files() ? "file:" + cfg.dataset.path_q : to_string(cfg.dataset.kind);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

std::string to_json_line(const RunRecord& r) {
  json j = {
      {"method", r.method},
      {"dataset", r.dataset},
      {"n", r.n},
      {"n_keys", r.n_keys},
      {"d", r.d},
      {"d_v", r.d_v},
      {"k", r.k},
      {"m", r.m},
      {"block_size", r.block_size},
      {"lsh_rank", r.lsh_rank},
      {"epsilon", r.epsilon},
      {"tau", r.tau},
      {"seed", r.seed},
      {"tied_kq", r.tied_kq},
      {"relative_opnorm_error", optional_json(r.relative_opnorm_error)},
      {"value_scaled_error", optional_json(r.value_scaled_error)},
      {"stable_rank_full", optional_json(r.stable_rank_full)},
      {"stable_rank_res", optional_json(r.stable_rank_res)},
      {"flops", r.flops},
      {"exact_flops", r.exact_flops},
      {"peak_bytes", r.peak_bytes},
      {"dense_bytes", r.dense_bytes},
      {"sparse_nnz", r.sparse_nnz},
      {"exact_fallbacks", r.exact_fallbacks},
      {"wall_ms", r.wall_ms},
  };
  return j.dump();
}

RunRecord from_json_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    RunRecord r;
    r.method = j.at("method").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.n = j.at("n").get<std::size_t>();
    r.n_keys = j.at("n_keys").get<std::size_t>();
    r.d = j.at("d").get<std::size_t>();
    r.d_v = j.at("d_v").get<std::size_t>();
    r.k = j.at("k").get<std::size_t>();
    r.m = j.at("m").get<std::size_t>();
    r.block_size = j.at("block_size").get<std::size_t>();
    r.lsh_rank = j.at("lsh_rank").get<std::size_t>();
    r.epsilon = j.at("epsilon").get<double>();
    r.tau = j.at("tau").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.tied_kq = j.at("tied_kq").get<bool>();
    r.relative_opnorm_error = optional_from(j, "relative_opnorm_error");
    r.value_scaled_error = optional_from(j, "value_scaled_error");
    r.stable_rank_full = optional_from(j, "stable_rank_full");
    r.stable_rank_res = optional_from(j, "stable_rank_res");
    r.flops = j.at("flops").get<std::uint64_t>();
    r.exact_flops = j.at("exact_flops").get<std::uint64_t>();
    r.peak_bytes = j.at("peak_bytes").get<std::size_t>();
    r.dense_bytes = j.at("dense_bytes").get<std::size_t>();
    r.sparse_nnz = j.at("sparse_nnz").get<std::size_t>();
    r.exact_fallbacks = j.at("exact_fallbacks").get<std::size_t>();
    r.wall_ms = j.at("wall_ms").get<double>();
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("bad result record: ") + e.what());
  }
}

void write_jsonl(std::ostream& out, const std::vector<RunRecord>& records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

std::vector<RunRecord> read_jsonl(std::istream& in) {
  std::vector<RunRecord> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

AttentionInputs make_instance(const BenchConfig& cfg, std::size_t n, std::uint64_t seed) {
  const auto& ds = cfg.dataset;
  if (!ds.from_files()) {
    return make_attention_instance(ds.kind, n, cfg.d, cfg.d_v, seed, cfg.tied_kq, ds.params,
                                   ds.values);
  }
  DenseMatrix q = first_rows(load_matrix(ds.path_q), n, ds.path_q);
  DenseMatrix k = ds.path_k.empty() ? q : first_rows(load_matrix(ds.path_k), n, ds.path_k);
  DenseMatrix v;
  if (!ds.path_v.empty()) {
    v = first_rows(load_matrix(ds.path_v), n, ds.path_v);
  } else {
    v = DenseMatrix(n, cfg.d_v);
    Rng rng(derive_seed(seed, kValueStream));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& x : v.data()) x = gauss(rng);
  }
  AttentionInputs inp(std::move(q), std::move(k), std::move(v));
  inp.validate();
  return inp;
}

std::vector<RunRecord> run_benchmark(const BenchConfig& cfg,
                                     const std::function<void(const RunRecord&)>& sink) {
  cfg.validate();
  if (cfg.oracle) {
    for (std::size_t n : cfg.n) {
      require(n <= cfg.oracle_ceiling, ErrorCode::kConfig,
              "n = " + std::to_string(n) + " exceeds the dense oracle ceiling " +
                  std::to_string(cfg.oracle_ceiling) + "; rerun with --no-oracle");
    }
  }
  const bool tied = cfg.dataset.from_files() ? cfg.dataset.path_k.empty() : cfg.tied_kq;

  std::vector<RunRecord> records;
  for (std::size_t n : cfg.n) {
    for (std::uint64_t seed : cfg.seeds) {
      const AttentionInputs inp = make_instance(cfg, n, seed);
      for (std::size_t kv : cfg.budgets(n)) {
        require(kv <= inp.num_keys(), ErrorCode::kConfig,
                "budget k = " + std::to_string(kv) + " exceeds n = " +
                    std::to_string(inp.num_keys()));
      }

      std::optional<DenseMatrix> exact;
      std::uint64_t exact_flops = exact_attention_flops(inp);
      double value_norm = 0.0;
      std::optional<double> srank_full;
      std::optional<double> srank_res;
      if (cfg.oracle) {
        FlopCounter counter;
        exact = exact_attention(inp, &counter);
        exact_flops = counter.total();
        value_norm = operator_norm(inp.v).value;
        if (cfg.stable_ranks) {
          const DenseMatrix s = softmax_matrix(inp);
          srank_full = srank(s);
          const bool need_res =
              cfg.block_size > 0 && std::find(cfg.methods.begin(), cfg.methods.end(),
                                              Method::kKdeformerPractical) != cfg.methods.end();
          if (need_res) {
            const std::vector<double> zero(inp.num_queries(), 0.0);
            const auto sparse =
                attention::build_sparse_part(inp, lsh_options(cfg, seed), zero, nullptr);
            DenseMatrix res = s;
            for (std::size_t i = 0; i < res.rows(); ++i) {
              auto row = res.row(i);
              for (std::size_t j = 0; j < row.size(); ++j) {
                if (sparse.collides(i, j)) row[j] = 0.0;
              }
            }
            srank_res = srank(res);
          }
        }
      }

      for (Method method : cfg.methods) {
        for (std::size_t kv : cfg.budgets(n)) {
          RunRecord r;
          r.method = to_string(method);
          r.dataset = dataset_label(cfg);
          r.n = inp.num_queries();
          r.n_keys = inp.num_keys();
          r.d = inp.dim();
          r.d_v = inp.value_dim();
          r.k = kv;
          r.block_size = method == Method::kKdeformerPractical ? cfg.block_size : 0;
          r.lsh_rank = method == Method::kKdeformerPractical ? cfg.lsh_rank : 0;
          r.epsilon = cfg.epsilon;
          r.tau = cfg.tau;
          r.seed = seed;
          r.tied_kq = tied;
          r.exact_flops = exact_flops;
          r.dense_bytes =
              attention::dense_attention_bytes(r.n, r.n_keys, r.d_v);
          r.stable_rank_full = srank_full;
          if (method == Method::kKdeformerPractical) r.stable_rank_res = srank_res;

          attention::KdeformerOptions opts;
          opts.tau = cfg.tau;
          opts.seed = seed;
          opts.reuse_kde_structure = cfg.reuse_kde_structure;

          DenseMatrix out;
          const auto t0 = std::chrono::steady_clock::now();
          if (method == Method::kExact) {
            FlopCounter counter;
            out = exact_attention(inp, &counter);
            r.flops = counter.total();
            r.m = r.n_keys;
            r.peak_bytes = r.dense_bytes;
          } else {
            const bool basic = method == Method::kKdeformerBasic;
            const std::size_t m =
                basic ? kv : attention::samples_for_budget(kv, r.n_keys, cfg.block_size);
            auto res = basic ? attention::approximate_attention_basic(inp, m, cfg.epsilon, opts)
                             : attention::approximate_attention_practical(
                                   inp, m, cfg.epsilon, lsh_options(cfg, seed), opts);
            out = std::move(res.output);
            r.flops = res.flops;
            r.m = res.sampler.m();
            r.peak_bytes = res.peak_bytes;
            r.sparse_nnz = res.sparse_nnz;
            r.exact_fallbacks = res.scaling.exact_fallback_count;
          }
          r.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();

          if (exact) {
            if (method == Method::kExact) {
              r.relative_opnorm_error = 0.0;
              r.value_scaled_error = 0.0;
            } else {
              const double rel = relative_opnorm_error(*exact, out);
              r.relative_opnorm_error = rel;
              const double att_norm = operator_norm(*exact).value;
              r.value_scaled_error = value_norm > 0.0 ? rel * att_norm / value_norm : 0.0;
            }
          }
          if (sink) sink(r);
          records.push_back(std::move(r));
        }
      }
    }
  }
  return records;
}

void write_summary_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  struct Group {
    std::string method;
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<const RunRecord*> runs;
  };
  std::vector<Group> groups;
  std::map<std::tuple<std::string, std::size_t, std::size_t>, std::size_t> index;
  for (const auto& r : records) {
    const auto key = std::make_tuple(r.method, r.n, r.k);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      groups.push_back(Group{r.method, r.n, r.k, {}});
    }
    groups[it->second].runs.push_back(&r);
  }

  out << "method,n,k,runs,median_m,median_relative_opnorm_error,median_value_scaled_error,"
         "median_flops,exact_flops,flops_ratio,median_peak_bytes,dense_bytes,memory_ratio,"
         "median_stable_rank_full,median_stable_rank_res,median_wall_ms\n";
  out.precision(10);
  for (const auto& g : groups) {
    auto column = [&](auto getter) {
      std::vector<double> v;
      for (const auto* r : g.runs) v.push_back(static_cast<double>(getter(*r)));
      return median(std::move(v));
    };
    auto optional_column = [&](auto getter) -> std::string {
      std::vector<double> v;
      for (const auto* r : g.runs) {
        if (const auto x = getter(*r)) v.push_back(*x);
      }
      if (v.empty()) return "";
      std::ostringstream s;
      s.precision(10);
      s << median(std::move(v));
      return s.str();
    };
    const double flops = column([](const RunRecord& r) { return r.flops; });
    const double exact = column([](const RunRecord& r) { return r.exact_flops; });
    const double peak = column([](const RunRecord& r) { return r.peak_bytes; });
    const double dense = column([](const RunRecord& r) { return r.dense_bytes; });
    out << g.method << ',' << g.n << ',' << g.k << ',' << g.runs.size() << ','
        << column([](const RunRecord& r) { return r.m; }) << ','
        << optional_column([](const RunRecord& r) { return r.relative_opnorm_error; }) << ','
        << optional_column([](const RunRecord& r) { return r.value_scaled_error; }) << ','
        << flops << ',' << exact << ',' << (exact > 0.0 ? flops / exact : 0.0) << ',' << peak
        << ',' << dense << ',' << (peak > 0.0 ? dense / peak : 0.0) << ','
        << optional_column([](const RunRecord& r) { return r.stable_rank_full; }) << ','
        << optional_column([](const RunRecord& r) { return r.stable_rank_res; }) << ','
        << column([](const RunRecord& r) { return r.wall_ms; }) << '\n';
  }
}

}  // namespace kdeformer::bench
