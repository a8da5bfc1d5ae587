// Command-line harness: "bench" runs the random trace-objective benchmark,
// "separate" solves a subspace-separation instance, "validate" checks a
// stored flag point against both embeddings.

#include <CLI11.hpp>

#include "flagopt/flagopt.hpp"

#include <cstdio>
#include <iostream>

namespace {

int run_bench(const flagopt::BenchConfig& cfg) {
  try {
    const flagopt::BenchResult result = flagopt::bench(cfg);
    std::printf("%-16s %14s %12s %18s\n", "method", "mean_elapsed_s", "mean_iters",
                "final_grad_norm");
    for (const auto& s : result.summaries)
      std::printf("%-16s %14.3f %12.1f %18.3e%s\n", s.method.c_str(), s.mean_elapsed_s,
                  s.mean_iters, s.mean_final_grad_norm,
                  s.all_converged ? "" : "  [budget hit]");
    if (!cfg.out_dir.empty()) std::printf("traces written to %s\n", cfg.out_dir.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bench: %s\n", e.what());
    return 1;
  }
}

int run_separate(const std::string& manifest, const std::string& out, std::uint64_t seed,
                 double tol, int max_iters) {
  flagopt::SeparationInstance inst;
  try {
    inst = flagopt::read_separation_manifest(manifest);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "separate: %s\n", e.what());
    return 2;
  }
  try {
    const flagopt::StopRule stop{tol, max_iters, std::nullopt};
    auto [point, trace] = flagopt::run_separation(inst, seed, stop);
    if (!out.empty()) flagopt::write_flag_point(out, point);
    const flagopt::Objective o = flagopt::separation_objective(inst);
    std::printf("final_objective %.12e\n", o.value(point));
    std::printf("final_grad_norm %.12e\n", trace.final_grad_norm());
    std::printf("sweeps %d\n", trace.iterations());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "separate: %s\n", e.what());
    return 1;
  }
}

int run_validate(const std::string& path) {
  // Parse leniently: a file that reads but fails the geometric constraints is
  // a violation (exit 1), not a parse error (exit 2).
  flagopt::RawFlagPoint raw;
  try {
    raw = flagopt::read_flag_point_raw(path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "validate: %s\n", e.what());
    return 2;
  }
  const flagopt::FlagPoint p{raw.v, raw.sig};
  for (const auto kind : {flagopt::EmbeddingKind::classical, flagopt::EmbeddingKind::modified}) {
    const auto report = flagopt::flag_validate(flagopt::embed(p, kind), p.sig);
    if (!report.ok) {
      std::printf("violation (%s embedding): %s (residual %.3e)\n",
                  kind == flagopt::EmbeddingKind::classical ? "classical" : "modified",
                  report.violation.c_str(), report.residual);
      return 1;
    }
  }
  std::printf("ok\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimization on flag manifolds"};
  app.require_subcommand(1);

  flagopt::BenchConfig cfg;
  long long n = 0, seed = 0, max_iters = 100000, reps = 1, threads = 0;
  std::vector<long long> dims;
  double tol = 1e-5;
  std::string out_dir;

  auto* bench = app.add_subcommand("bench", "run the benchmark on random trace objectives");
  bench->add_option("--n", n, "ambient dimension")->required();
  bench->add_option("--dims", dims, "flag dimensions n_1,...,n_d")->required()->delimiter(',');
  bench->add_option("--methods", cfg.methods,
                    "subset of gd-classical,gd-modified,cgd,cmin,cmin-random")
      ->required()
      ->delimiter(',');
  bench->add_option("--seed", seed, "random seed");
  bench->add_option("--tol", tol, "gradient-norm stopping tolerance");
  bench->add_option("--max-iters", max_iters, "iteration budget per run");
  bench->add_option("--reps", reps, "number of repetitions");
  bench->add_option("--out", out_dir, "output directory for trace/summary CSVs");
  bench->add_option("--threads", threads, "worker threads (0 = all cores)");

  std::string manifest, sep_out;
  long long sep_seed = 0, sep_iters = 100000;
  double sep_tol = 1e-5;
  auto* separate = app.add_subcommand("separate", "solve a subspace-separation instance");
  separate->add_option("--manifest", manifest, "separation manifest file")->required();
  separate->add_option("--out", sep_out, "output flag-point file");
  separate->add_option("--seed", sep_seed, "random seed for the start point");
  separate->add_option("--tol", sep_tol, "gradient-norm stopping tolerance");
  separate->add_option("--max-iters", sep_iters, "sweep budget");

  std::string point_file;
  auto* validate = app.add_subcommand("validate", "validate a stored flag point");
  validate->add_option("file", point_file, "flag-point file")->required();

  CLI11_PARSE(app, argc, argv);

  if (bench->parsed()) {
    cfg.n = n;
    cfg.dims.assign(dims.begin(), dims.end());
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.grad_tol = tol;
    cfg.max_iters = static_cast<int>(max_iters);
    cfg.reps = static_cast<int>(reps);
    cfg.out_dir = out_dir;
    cfg.threads = static_cast<int>(threads);
    return run_bench(cfg);
  }
  if (separate->parsed())
    return run_separate(manifest, sep_out, static_cast<std::uint64_t>(sep_seed), sep_tol,
                        static_cast<int>(sep_iters));
  return run_validate(point_file);
}
