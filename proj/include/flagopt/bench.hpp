#pragma once

#include "flagopt/io.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

namespace flagopt {

/// Benchmark configuration: random trace objectives on Flag(dims; n), each
/// repetition drawing fresh data and a fresh start, every method run on the
/// same instance.
struct BenchConfig {
  Index n = 0;
  std::vector<Index> dims;
  std::vector<std::string> methods;
  std::uint64_t seed = 0;
  double grad_tol = 1e-5;
  int max_iters = 100000;
  int reps = 1;
  std::string out_dir;
  int threads = 0;  // 0: hardware concurrency
};

struct RunResult {
  std::string method;
  int rep = 0;
  RunTrace trace;
};

struct MethodSummary {
  std::string method;
  double mean_elapsed_s = 0.0;
  double mean_iters = 0.0;
  double mean_final_grad_norm = 0.0;
  bool all_converged = true;
};

struct BenchResult {
  std::vector<RunResult> runs;
  std::vector<MethodSummary> summaries;
};

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> methods = {"gd-classical", "gd-modified", "cgd", "cmin",
                                                   "cmin-random"};
  return methods;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t state = seed ^ (0xD1B54A32D192ED03ull * (a + 1)) ^ (0x8CB92BA72F3D8DD7ull * (b + 1));
  return splitmix64(state);
}

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = gauss(rng);
  return g;
}

// Q factor of a Gaussian matrix, sign-fixed so the factorization is unique.
inline Matrix random_orthogonal(Index n, std::mt19937_64& rng) {
  const Matrix g = gaussian_matrix(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace detail

struct BenchInstance {
  std::vector<Matrix> a;
  FlagPoint start;
};

inline BenchInstance make_bench_instance(const FlagSignature& sig, std::uint64_t seed, int rep) {
  std::mt19937_64 rng(detail::derive_seed(seed, static_cast<std::uint64_t>(rep)));
  BenchInstance inst{{}, FlagPoint{}};
  inst.a.reserve(static_cast<std::size_t>(sig.d()));
  for (Index k = 0; k < sig.d(); ++k)
    inst.a.push_back(sym_part(detail::gaussian_matrix(sig.n, sig.n, rng)));
  inst.start = flag_from_basis(detail::random_orthogonal(sig.n, rng), sig);
  return inst;
}

inline std::pair<FlagPoint, RunTrace> run_bench_method(const std::string& method,
                                                       const BenchInstance& inst,
                                                       const FlagSignature& sig,
                                                       const StopRule& stop,
                                                       std::uint64_t order_seed) {
  const LineSearch ls;
  if (method == "gd-classical") {
    const Objective o = trace_objective(inst.a, EmbeddingKind::classical);
    return gradient_descent(o, inst.start, coordinate_metric(sig, EmbeddingKind::classical), ls,
                            stop);
  }
  if (method == "gd-modified") {
    const Objective o = trace_objective(inst.a, EmbeddingKind::modified);
    return gradient_descent(o, inst.start, coordinate_metric(sig, EmbeddingKind::modified), ls,
                            stop);
  }
  if (method == "cgd") {
    const Objective o = trace_objective(inst.a, EmbeddingKind::modified);
    return coordinate_gradient_descent(o, inst.start, ls, stop);
  }
  if (method == "cmin") {
    const Objective o = trace_objective(inst.a, EmbeddingKind::modified);
    return coordinate_minimization(o, inst.start, stop, CoordinateOrder{CoordOrder::cyclic, 0});
  }
  if (method == "cmin-random") {
    const Objective o = trace_objective(inst.a, EmbeddingKind::modified);
    return coordinate_minimization(o, inst.start, stop,
                                   CoordinateOrder{CoordOrder::randomized, order_seed});
  }
  throw std::invalid_argument("unknown method '" + method + "'");
}

/// Runs the configured methods over all repetitions (in parallel worker
/// threads), writes one trace CSV per run plus summary.csv, and returns the
/// aggregated results. Outputs are deterministic for a fixed seed except for
/// the wall-clock columns.
inline BenchResult bench(const BenchConfig& cfg) {
  if (cfg.methods.empty()) throw std::invalid_argument("bench: no methods selected");
  if (cfg.reps < 1) throw std::invalid_argument("bench: reps must be >= 1");
  for (const std::string& m : cfg.methods) {
    const auto& known = known_methods();
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw std::invalid_argument("bench: unknown method '" + m + "'");
  }
  const FlagSignature sig = flag_signature(cfg.n, cfg.dims);
  const StopRule stop{cfg.grad_tol, cfg.max_iters, std::nullopt};

  struct Task {
    std::size_t method_idx;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
    for (int rep = 0; rep < cfg.reps; ++rep) tasks.push_back({mi, rep});

  std::vector<RunResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        const Task& task = tasks[i];
        const BenchInstance inst = make_bench_instance(sig, cfg.seed, task.rep);
        const std::uint64_t order_seed =
            detail::derive_seed(cfg.seed, static_cast<std::uint64_t>(task.rep), 17);
        auto [point, trace] = run_bench_method(cfg.methods[task.method_idx], inst, sig, stop,
                                               order_seed);
        (void)point;
        results[i] = RunResult{cfg.methods[task.method_idx], task.rep, std::move(trace)};
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  unsigned want = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                  : std::max(1u, std::thread::hardware_concurrency());
  want = std::min<unsigned>(want, static_cast<unsigned>(tasks.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i + 1 < want; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  BenchResult out;
  out.runs = std::move(results);

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    for (const RunResult& r : out.runs) {
      const std::string path =
          (std::filesystem::path(cfg.out_dir) / (r.method + "_rep" + std::to_string(r.rep) + ".csv"))
              .string();
      write_run_trace(path, r.method, r.trace);
    }
  }

  for (const std::string& method : cfg.methods) {
    MethodSummary s;
    s.method = method;
    int count = 0;
    for (const RunResult& r : out.runs) {
      if (r.method != method) continue;
      s.mean_elapsed_s += r.trace.elapsed_s();
      s.mean_iters += r.trace.iterations();
      s.mean_final_grad_norm += r.trace.final_grad_norm();
      s.all_converged = s.all_converged && r.trace.status == RunStatus::converged;
      ++count;
    }
    s.mean_elapsed_s /= count;
    s.mean_iters /= count;
    s.mean_final_grad_norm /= count;
    out.summaries.push_back(std::move(s));
  }

  if (!cfg.out_dir.empty()) {
    std::ofstream sum((std::filesystem::path(cfg.out_dir) / "summary.csv").string());
    if (!sum) throw ParseError("bench: cannot write summary.csv");
    sum << "method,mean_elapsed_s,mean_iters,final_grad_norm\n";
    for (const MethodSummary& s : out.summaries)
      sum << s.method << ',' << detail::format_double(s.mean_elapsed_s) << ','
          << detail::format_double(s.mean_iters) << ','
          << detail::format_double(s.mean_final_grad_norm) << '\n';
  }
  return out;
}

/// Separation solve used by the CLI: coordinate minimization from a seeded
/// random start.
inline std::pair<FlagPoint, RunTrace> run_separation(const SeparationInstance& inst,
                                                     std::uint64_t seed, const StopRule& stop) {
  const FlagSignature sig = inst.signature();
  std::mt19937_64 rng(detail::derive_seed(seed, 0));
  const FlagPoint start = flag_from_basis(detail::random_orthogonal(sig.n, rng), sig);
  const Objective o = separation_objective(inst);
  return coordinate_minimization(o, start, stop);
}

}  // namespace flagopt
