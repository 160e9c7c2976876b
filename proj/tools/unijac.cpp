// unijac: solve, generate and verify joint diagonalization / compression problems.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "unijac/generators.hpp"
#include "unijac/io.hpp"
#include "unijac/solvers.hpp"
#include "unijac/verify.hpp"

namespace fs = std::filesystem;
using namespace unijac;

namespace {

struct GenOptions {
  std::string kind;
  std::vector<Index> dims{3, 3, 3};
  std::vector<Index> ranks;
  Index L = 1;
  std::uint64_t seed = 0;
  double noise = 1.0;
  std::string diagonal = "sqrt-linear";
  bool symmetric = false;
  bool real = false;
  std::string family = "jatc";
  std::string dagger = "H";
};

void add_generator_options(CLI::App* cmd, GenOptions& g) {
  cmd->add_option("--dims", g.dims, "Mode dimensions")->delimiter(',');
  cmd->add_option("--ranks", g.ranks, "Ranks (one common value, or one per mode)")->delimiter(',');
  cmd->add_option("--L", g.L, "Number of tensors")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", g.seed, "Seed for every random draw");
  cmd->add_option("--noise", g.noise, "Norm of the additive noise")->check(CLI::NonNegativeNumber);
  cmd->add_option("--diagonal", g.diagonal, "Diagonal profile for noisy-diagonal")
      ->check(CLI::IsMember({"sqrt-linear", "index"}));
  cmd->add_flag("--symmetric", g.symmetric, "One factor for all modes, symmetrized tensors");
  cmd->add_flag("--real", g.real, "Real data and orthogonal factors");
  cmd->add_option("--family", g.family, "Family for random-dense")
      ->check(CLI::IsMember({"tracemax", "jatd-s", "jatd", "jatc"}));
  cmd->add_option("--dagger", g.dagger, "H (conjugate transpose) or T (transpose)")
      ->check(CLI::IsMember({"H", "T"}));
}

GeneratorSpec to_generator(const GenOptions& o) {
  GeneratorSpec g;
  g.kind = o.kind == "random-dense" ? GeneratorKind::RandomDense : GeneratorKind::NoisyDiagonal;
  g.dims = o.dims;
  g.ranks = o.ranks;
  g.L = o.L;
  g.seed = o.seed;
  g.noise = o.noise;
  g.diagonal = o.diagonal == "index" ? DiagonalProfile::TensorIndex : DiagonalProfile::SqrtPlusLinear;
  g.symmetric = o.symmetric;
  g.real = o.real;
  g.family = family_from_string(o.family);
  g.dagger = dagger_from_string(o.dagger);
  return g;
}

bool is_proximal(const std::string& solver) {
  return solver == "jacobi-gp" || solver == "jacobi-mgp";
}

/// sum_l w_l ||A_l||^2 for the diagonalization and compression families.
double weighted_norm2(const ProblemSpec& spec) {
  double s = 0.0;
  for (Index l = 0; l < spec.tensors.size(); ++l) {
    s += spec.weight(l) * frobenius_norm_sq(spec.tensors[l]);
  }
  return s;
}

void print_report(const SuiteReport& r) {
  std::cout << r.name << ": " << r.checks - r.failures << "/" << r.checks << " passed, worst "
            << r.worst << " of tolerance, " << r.seconds << " s\n";
  for (const auto& f : r.failing) std::cout << "  FAIL " << f << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Jacobi-type solvers for joint tensor diagonalization and compression"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "Run one solver and write log.csv and summary.json");
  std::string problem_file;
  bool example = false;
  GenOptions gen;
  std::string solver = "jacobi-mg";
  SolverConfig cfg;
  double epsilon = -1.0;
  std::string out_dir = ".";
  bool random_start = false;
  auto* o_problem = solve->add_option("--problem", problem_file, "Problem JSON file")
                        ->check(CLI::ExistingFile);
  auto* o_gen = solve->add_option("--generator", gen.kind, "Synthetic instance kind")
                    ->check(CLI::IsMember({"noisy-diagonal", "random-dense"}));
  auto* o_ex = solve->add_flag("--example-7-1", example, "Built-in 3x3x3 test tensor");
  o_problem->excludes(o_gen)->excludes(o_ex);
  o_gen->excludes(o_ex);
  add_generator_options(solve, gen);
  solve->add_option("--solver", solver)
      ->check(CLI::IsMember({"jacobi-g", "jacobi-mg", "jacobi-mc", "jacobi-gp", "jacobi-mgp",
                             "baseline-rsd"}));
  solve->add_option("--delta", cfg.delta, "Pair selection constant (default: largest allowed)");
  solve->add_option("--epsilon", epsilon, "Proximal weight (default 1e-3 for proximal solvers)");
  solve->add_option("--grad-tol", cfg.grad_tol)->capture_default_str();
  solve->add_option("--max-iter", cfg.max_iter, "Rotation budget")->capture_default_str();
  solve->add_flag("--random-start", random_start, "Start from seeded random unitaries");
  solve->add_option("--out", out_dir, "Output directory")->capture_default_str();

  // generate
  auto* generate_cmd = app.add_subcommand("generate", "Write a synthetic problem as JSON");
  GenOptions gen2;
  std::string gen_out;
  generate_cmd->add_option("kind", gen2.kind)
      ->required()
      ->check(CLI::IsMember({"noisy-diagonal", "random-dense"}));
  add_generator_options(generate_cmd, gen2);
  generate_cmd->add_option("--out", gen_out, "Output file")->required();

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "Run a randomized property suite");
  std::string suite;
  std::vector<std::string> names{"all"};
  for (const auto& [name, fn] : verify::suites()) names.push_back(name);
  verify_cmd->add_option("suite", suite)->required()->check(CLI::IsMember(names));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      ProblemSpec spec;
      if (example) {
        spec = reference_problem();
      } else if (!problem_file.empty()) {
        spec = read_problem(problem_file);
      } else if (!gen.kind.empty()) {
        spec = generate(to_generator(gen)).spec;
      } else {
        std::cerr << "solve: one of --problem, --generator or --example-7-1 is required\n";
        return 2;
      }
      cfg.epsilon = epsilon >= 0.0 ? epsilon : (is_proximal(solver) ? 1e-3 : 0.0);
      cfg.random_start = random_start;
      cfg.seed = gen.seed;
      const double f0 = objective_value(spec, identity_tuple(spec));
      const double per0 = spec.family == Family::TraceMax ? 0.0 : per_ratio(spec.tensors);
      const SolveResult res = run_solver(solver, spec, cfg);

      fs::create_directories(out_dir);
      {
        std::ofstream log(fs::path(out_dir) / "log.csv");
        write_log_csv(log, res, is_proximal(solver) && cfg.epsilon > 0.0);
      }
      json s;
      s["solver"] = solver;
      s["family"] = to_string(spec.family);
      s["status"] = to_string(res.status);
      s["f_initial"] = f0;
      s["f"] = res.value;
      if (spec.family != Family::TraceMax) {
        s["residual"] = weighted_norm2(spec) - res.value;
        s["per_initial"] = per0;
        s["per"] = per_ratio(res.W);
      }
      s["grad_norm"] = res.grad_norm;
      s["iterations"] = res.iterations;
      s["sweeps"] = res.sweeps;
      s["wall_time_s"] = res.seconds;
      s["delta"] = res.delta;
      s["epsilon"] = cfg.epsilon;
      write_json_file(fs::path(out_dir) / "summary.json", s);
      std::cout << s.dump(2) << '\n';
      return 0;
    }
    if (*generate_cmd) {
      const Instance inst = generate(to_generator(gen2));
      write_json_file(gen_out, problem_to_json(inst.spec));
      std::cout << "wrote " << gen_out << '\n';
      return 0;
    }
    if (*verify_cmd) {
      bool ok = true;
      for (const auto& [name, fn] : verify::suites()) {
        if (suite != "all" && suite != name) continue;
        const SuiteReport r = fn();
        print_report(r);
        ok = ok && r.passed();
      }
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
