#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "unijac/manifold.hpp"
#include "unijac/objectives.hpp"
#include "unijac/subproblem.hpp"

namespace unijac {

enum class PairStrategy { GradientBased, Cyclic };

struct SolverConfig {
  double delta = 0.0;  // 0 selects the largest admissible value
  double epsilon = 0.0;
  double grad_tol = 1e-5;
  long max_iter = 1000;
  PairStrategy pair_strategy = PairStrategy::GradientBased;
  std::uint64_t seed = 0;
  bool random_start = false;
  int reorth_every = 64;
};

struct IterationRecord {
  long k = 0;
  double f = 0.0;
  double grad_norm = 0.0;  // at the iterate the step started from
  Index p = 0, i = 0, j = 0;
  double theta = 0.0;
  double phi = 0.0;
  double step_norm = 0.0;
  double slack = 0.0;       // gain - eta * grad_norm * step_norm
  double prox_slack = 0.0;  // gain - eps * ||z - e1||^2 (proximal runs)
  bool skipped = false;
};

enum class SolveStatus { GradConverged, MaxIter };

inline std::string to_string(SolveStatus s) {
  return s == SolveStatus::GradConverged ? "grad_converged" : "max_iter";
}

struct SolveResult {
  UnitaryTuple factors;
  std::vector<DenseTensor> W;
  std::vector<IterationRecord> records;
  SolveStatus status = SolveStatus::MaxIter;
  double value = 0.0;
  double grad_norm = 0.0;
  long iterations = 0;
  double sweeps = 0.0;
  double seconds = 0.0;
  double delta = 0.0;
};

/// sqrt(2 / (d n (n - 1))) with n the largest factor dimension.
inline double delta_bound_multi(Index d, Index n_max) {
  if (n_max < 2) return 1.0;
  return std::sqrt(2.0 / (static_cast<double>(d) * n_max * (n_max - 1)));
}

/// sqrt(2) / n for a single factor.
inline double delta_bound_single(Index n) { return std::sqrt(2.0) / static_cast<double>(n); }

inline Index rotations_per_sweep(const ProblemSpec& spec) {
  const Index n = spec.max_dim();
  return std::max<Index>(1, spec.num_factors() * n * (n - 1) / 2);
}

struct PairChoice {
  Index p = 0, i = 0, j = 1;
  double sub_norm = 0.0;  // Frobenius norm of the 2x2 block of Lambda^(p)
};

inline double pair_block_norm(const ComplexMatrix& l, Index i, Index j) {
  const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
  return std::sqrt(std::norm(l(a, a)) + std::norm(l(a, b)) + std::norm(l(b, a)) +
                   std::norm(l(b, b)));
}

/// Mode and pair whose 2x2 gradient block is largest; the first one in
/// (p, i, j) order wins ties.  Empty when every block vanishes.
inline std::optional<PairChoice> select_pair_gradient(const std::vector<ComplexMatrix>& lambdas) {
  std::optional<PairChoice> best;
  for (Index p = 0; p < lambdas.size(); ++p) {
    const auto n = static_cast<Index>(lambdas[p].rows());
    for (Index i = 0; i + 1 < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        const double v = pair_block_norm(lambdas[p], i, j);
        if (v > 0.0 && (!best || v > best->sub_norm)) best = PairChoice{p, i, j, v};
      }
    }
  }
  return best;
}

/// Modes in turn; each mode walks its own pair list
/// (0,1) -> (0,2) -> .. -> (n-2,n-1) -> (0,1).
class CyclicSelector {
 public:
  explicit CyclicSelector(std::vector<Index> dims)
      : dims_(std::move(dims)), cursor_(dims_.size(), {0, 1}) {}

  PairChoice next() {
    // Skip modes too small to rotate.
    for (Index tries = 0; tries < dims_.size(); ++tries) {
      const Index p = mode_;
      mode_ = (mode_ + 1) % dims_.size();
      if (dims_[p] < 2) continue;
      auto& [i, j] = cursor_[p];
      PairChoice c{p, i, j, 0.0};
      if (++j == dims_[p]) {
        ++i;
        if (i + 1 >= dims_[p]) i = 0;
        j = i + 1;
      }
      return c;
    }
    throw std::invalid_argument("CyclicSelector: no mode has two or more indices");
  }

 private:
  std::vector<Index> dims_;
  std::vector<std::pair<Index, Index>> cursor_;
  Index mode_ = 0;
};

namespace detail {

inline UnitaryTuple initial_factors(const ProblemSpec& spec, const SolverConfig& cfg) {
  if (!cfg.random_start) return identity_tuple(spec);
  std::mt19937_64 rng(cfg.seed);
  UnitaryTuple ups;
  for (Index p = 0; p < spec.num_factors(); ++p) {
    ups.push_back(haar_unitary(spec.factor_dim(p), rng, spec.real));
  }
  return ups;
}

/// U <- U G(i, j, psi), touching only columns i and j.
inline void rotate_columns(ComplexMatrix& u, Index i, Index j, const Eigen::Matrix2cd& psi) {
  const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
  const Eigen::VectorXcd ci = u.col(a);
  const Eigen::VectorXcd cj = u.col(b);
  u.col(a) = ci * psi(0, 0) + cj * psi(1, 0);
  u.col(b) = ci * psi(0, 1) + cj * psi(1, 1);
}

struct Variant {
  bool multi = true;      // false: single-factor Jacobi-G bound on delta
  bool proximal = false;
};

inline SolveResult run_jacobi(const ProblemSpec& spec, const SolverConfig& cfg, Variant var) {
  spec.validate();
  if (spec.family == Family::TraceMax && spec.gamma != 1) {
    throw std::invalid_argument("solver: tracemax problems are solved for gamma = 1 only");
  }
  if (spec.family == Family::JatdSymmetric && spec.tensors.front().order() > 3) {
    throw std::invalid_argument("solver: jatd-s problems are solved for order <= 3 only");
  }
  if (cfg.epsilon < 0.0) throw std::invalid_argument("solver: epsilon must be nonnegative");
  if (var.proximal && cfg.epsilon == 0.0) var.proximal = false;

  const auto t0 = std::chrono::steady_clock::now();
  const Index d = spec.num_factors();
  const double bound = var.multi ? delta_bound_multi(d, spec.max_dim())
                                 : delta_bound_single(spec.factor_dim(0));
  double delta = cfg.delta;
  if (delta == 0.0) delta = bound - 1e-15;
  if (!(delta > 0.0) || delta > bound) {
    throw std::invalid_argument("solver: delta must lie in (0, " + std::to_string(bound) + "]");
  }
  const double eta = std::sqrt(2.0) * delta / 8.0;

  SolveResult res;
  res.delta = delta;
  UnitaryTuple ups = initial_factors(spec, cfg);
  std::vector<DenseTensor> W = transform(spec, ups);
  double f = value_from_transformed(spec, W);

  std::vector<Index> dims;
  for (Index p = 0; p < d; ++p) dims.push_back(spec.factor_dim(p));
  CyclicSelector cyclic(dims);

  long k = 0;
  long since_reorth = 0;
  bool converged = false;
  for (;; ++k) {
    const std::vector<ComplexMatrix> lambdas = all_lambdas(spec, W);
    const double gn = grad_norm_from_lambdas(lambdas);
    res.grad_norm = gn;
    if (gn <= cfg.grad_tol) {
      converged = true;
      break;
    }
    if (k >= cfg.max_iter) break;

    PairChoice pc;
    if (cfg.pair_strategy == PairStrategy::GradientBased) {
      const auto sel = select_pair_gradient(lambdas);
      if (!sel) {
        converged = true;
        break;
      }
      pc = *sel;
    } else {
      pc = cyclic.next();
    }

    RotationPlan plan;
    if (spec.family == Family::JatdSymmetric) {
      const QuadFormSum qs = build_subproblem_jatd_symmetric(spec, W, pc.i, pc.j);
      plan = maximize_form_sum(qs, var.proximal ? cfg.epsilon : 0.0);
    } else {
      const QuadSubproblem q = build_subproblem(spec, W, pc.p, pc.i, pc.j);
      plan = var.proximal ? solve_proximal(q, cfg.epsilon) : solve_quadratic(q);
    }

    IterationRecord rec;
    rec.k = k + 1;
    rec.grad_norm = gn;
    rec.p = pc.p;
    rec.i = pc.i;
    rec.j = pc.j;
    // Skip rotations that would not move the iterate.
    if (!(plan.predicted_gain > 0.0) || plan.params.theta == 0.0) {
      rec.f = f;
      rec.skipped = true;
      res.records.push_back(rec);
      if (cfg.pair_strategy == PairStrategy::GradientBased) {
        // The best pair cannot improve: nothing else will either.
        ++k;
        break;
      }
      continue;
    }

    rotate_columns(ups[pc.p], pc.i, pc.j, plan.Psi);
    rotate_transformed(spec, W, pc.p, pc.i, pc.j, plan.Psi);
    if (++since_reorth >= cfg.reorth_every) {
      for (auto& u : ups) u = q_factor(u);
      W = transform(spec, ups);
      since_reorth = 0;
    }
    const double f_new = value_from_transformed(spec, W);
    const double gain = f_new - f;
    rec.f = f_new;
    rec.theta = plan.params.theta;
    rec.phi = plan.params.phi;
    rec.step_norm = (plan.Psi - Eigen::Matrix2cd::Identity()).norm();
    rec.slack = gain - eta * gn * rec.step_norm;
    const double z_dist2 = 2.0 * (1.0 - std::cos(plan.params.theta));
    rec.prox_slack = gain - cfg.epsilon * z_dist2;
    res.records.push_back(rec);
    f = f_new;
  }

  for (auto& u : ups) u = q_factor(u);
  res.W = transform(spec, ups);
  res.value = value_from_transformed(spec, res.W);
  res.grad_norm = grad_norm_from_lambdas(all_lambdas(spec, res.W));
  res.factors = std::move(ups);
  res.iterations = k;
  res.sweeps = static_cast<double>(k) / static_cast<double>(rotations_per_sweep(spec));
  res.status = converged && res.grad_norm <= cfg.grad_tol ? SolveStatus::GradConverged
                                                          : SolveStatus::MaxIter;
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace detail

/// Single-factor Jacobi iteration (tracemax, jatd-s).
inline SolveResult jacobi_g(const ProblemSpec& spec, SolverConfig cfg) {
  if (!spec.single_factor()) {
    throw std::invalid_argument("jacobi_g: needs a single-factor problem (tracemax or jatd-s)");
  }
  cfg.epsilon = 0.0;
  return detail::run_jacobi(spec, cfg, {false, false});
}

inline SolveResult jacobi_mg(const ProblemSpec& spec, SolverConfig cfg) {
  cfg.epsilon = 0.0;
  cfg.pair_strategy = PairStrategy::GradientBased;
  return detail::run_jacobi(spec, cfg, {true, false});
}

inline SolveResult jacobi_mc(const ProblemSpec& spec, SolverConfig cfg) {
  cfg.epsilon = 0.0;
  cfg.pair_strategy = PairStrategy::Cyclic;
  return detail::run_jacobi(spec, cfg, {true, false});
}

inline SolveResult jacobi_gp(const ProblemSpec& spec, SolverConfig cfg) {
  if (!spec.single_factor()) {
    throw std::invalid_argument("jacobi_gp: needs a single-factor problem (tracemax or jatd-s)");
  }
  return detail::run_jacobi(spec, cfg, {false, true});
}

inline SolveResult jacobi_mgp(const ProblemSpec& spec, SolverConfig cfg) {
  cfg.pair_strategy = PairStrategy::GradientBased;
  return detail::run_jacobi(spec, cfg, {true, true});
}

/// Riemannian steepest ascent with Armijo backtracking and QR retraction on
/// every factor.
inline SolveResult baseline_rsd(const ProblemSpec& spec, const SolverConfig& cfg) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  SolveResult res;
  UnitaryTuple ups = detail::initial_factors(spec, cfg);
  std::vector<DenseTensor> W = transform(spec, ups);
  double f = value_from_transformed(spec, W);
  double t = -1.0;
  bool converged = false;
  bool stalled = false;
  long k = 0;
  for (;; ++k) {
    const std::vector<ComplexMatrix> lambdas = all_lambdas(spec, W);
    const double gn = grad_norm_from_lambdas(lambdas);
    res.grad_norm = gn;
    if (gn <= cfg.grad_tol) {
      converged = true;
      break;
    }
    if (k >= cfg.max_iter) break;
    if (t < 0.0) t = 1.0 / gn;
    t *= 2.0;
    UnitaryTuple trial;
    std::vector<DenseTensor> trial_W;
    double f_trial = f;
    bool accepted = false;
    while (t >= 1e-10) {
      trial.clear();
      for (Index p = 0; p < ups.size(); ++p) {
        trial.push_back(qr_retract(ups[p], t * ups[p] * lambdas[p]));
      }
      trial_W = transform(spec, trial);
      f_trial = value_from_transformed(spec, trial_W);
      if (f_trial >= f + 1e-4 * t * gn * gn) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    IterationRecord rec;
    rec.k = k + 1;
    rec.grad_norm = gn;
    double step2 = 0.0;
    for (Index p = 0; p < ups.size(); ++p) step2 += (trial[p] - ups[p]).squaredNorm();
    rec.step_norm = std::sqrt(step2);
    rec.f = f_trial;
    rec.slack = f_trial - f;
    res.records.push_back(rec);
    ups = std::move(trial);
    W = std::move(trial_W);
    f = f_trial;
  }
  res.W = W;
  res.value = f;
  res.factors = std::move(ups);
  res.iterations = k;
  res.sweeps = static_cast<double>(k);
  res.status = converged && !stalled ? SolveStatus::GradConverged : SolveStatus::MaxIter;
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

inline SolveResult run_solver(const std::string& name, const ProblemSpec& spec,
                              const SolverConfig& cfg) {
  if (name == "jacobi-g") return jacobi_g(spec, cfg);
  if (name == "jacobi-mg") return jacobi_mg(spec, cfg);
  if (name == "jacobi-mc") return jacobi_mc(spec, cfg);
  if (name == "jacobi-gp") return jacobi_gp(spec, cfg);
  if (name == "jacobi-mgp") return jacobi_mgp(spec, cfg);
  if (name == "baseline-rsd") return baseline_rsd(spec, cfg);
  throw std::invalid_argument("unknown solver '" + name + "'");
}

}  // namespace unijac
