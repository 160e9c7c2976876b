#pragma once

// Randomized property suites shared by `unijac verify` and the acceptance run.
// Every instance is drawn from its own seed so a failure can be replayed.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "unijac/generators.hpp"
#include "unijac/manifold.hpp"
#include "unijac/objectives.hpp"
#include "unijac/solvers.hpp"
#include "unijac/subproblem.hpp"
#include "unijac/tensor.hpp"

namespace unijac {

namespace sampling {

inline DenseTensor random_tensor(const std::vector<Index>& dims, std::mt19937_64& rng,
                                 bool real = false) {
  return gaussian_tensor(dims, rng, real);
}

inline ComplexMatrix random_matrix(Index r, Index c, std::mt19937_64& rng, bool real = false) {
  std::normal_distribution<double> nd;
  ComplexMatrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = Complex(nd(rng), real ? 0.0 : nd(rng));
  return m;
}

inline UnitaryTuple random_tuple(const ProblemSpec& spec, std::mt19937_64& rng) {
  UnitaryTuple ups;
  for (Index p = 0; p < spec.num_factors(); ++p) {
    ups.push_back(haar_unitary(spec.factor_dim(p), rng, spec.real));
  }
  return ups;
}

/// Random Hermitian order-2*gamma tensor with equal dims n.
inline DenseTensor random_hermitian(Index n, Index gamma, std::mt19937_64& rng) {
  DenseTensor c = random_tensor(std::vector<Index>(2 * gamma, n), rng);
  DenseTensor h(c.dims());
  std::vector<Index> idx, sw(2 * gamma);
  for (Index k = 0; k < c.size(); ++k) {
    c.unravel(k, idx);
    for (Index m = 0; m < gamma; ++m) {
      sw[m] = idx[m + gamma];
      sw[m + gamma] = idx[m];
    }
    h[k] = 0.5 * (c[k] + std::conj(c.at(sw)));
  }
  return h;
}

/// Gaussian instance of a family.  Tracemax with L != 1 gets one B per column.
inline ProblemSpec random_problem(Family fam, Dagger dag, std::mt19937_64& rng,
                                  std::vector<Index> dims, std::vector<Index> ranks,
                                  Index L = 2, bool real = false) {
  ProblemSpec spec;
  spec.family = fam;
  spec.dagger = dag;
  spec.real = real;
  spec.ranks = std::move(ranks);
  if (fam == Family::TraceMax) {
    spec.gamma = dims.size() / 2;
    if (L != 1) L = spec.ranks.empty() ? dims[0] : spec.ranks[0];
    for (Index l = 0; l < L; ++l) spec.tensors.push_back(random_hermitian(dims[0], spec.gamma, rng));
    return spec;
  }
  for (Index l = 0; l < L; ++l) {
    spec.tensors.push_back(random_tensor(dims, rng, real));
    spec.weights.push_back(0.5 + static_cast<double>(l));
  }
  return spec;
}

/// d/dRe + i d/dIm of a real function of a complex matrix, fourth-order
/// central stencil.
template <class Fn>
ComplexMatrix fd_wirtinger(const Fn& fn, const ComplexMatrix& x, double h = 1e-3) {
  ComplexMatrix g(x.rows(), x.cols());
  auto diff = [&](Eigen::Index r, Eigen::Index c, Complex dir) {
    ComplexMatrix y = x;
    auto at = [&](double s) {
      y(r, c) = x(r, c) + s * h * dir;
      return fn(y);
    };
    return (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h);
  };
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      g(r, c) = Complex(diff(r, c, Complex(1, 0)), diff(r, c, Complex(0, 1)));
  return g;
}

inline double rel_err(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

/// sum_I C_I prod_m conj(v_{I_m}) v_{I_{m+gamma}}, the value a block form
/// should reproduce.
inline double contract_block(const DenseTensor& c, Index gamma, const Eigen::Vector2cd& v) {
  Complex s{};
  std::vector<Index> idx;
  for (Index k = 0; k < c.size(); ++k) {
    c.unravel(k, idx);
    Complex t = c[k];
    for (Index m = 0; m < gamma; ++m) t *= std::conj(v(idx[m])) * v(idx[m + gamma]);
    s += t;
  }
  return s.real();
}

}  // namespace sampling

/// Outcome of one property suite.
struct SuiteReport {
  std::string name;
  long checks = 0;
  long failures = 0;
  double worst = 0.0;  // largest residual / tolerance seen
  std::vector<std::string> failing;
  double seconds = 0.0;

  bool passed() const { return checks > 0 && failures == 0; }

  /// residual <= tol counts as a pass; where names the instance.
  void check(double residual, double tol, const std::string& where) {
    ++checks;
    const double ratio = tol > 0.0 ? residual / tol : residual;
    if (std::isnan(ratio)) {
      worst = ratio;
    } else if (!std::isnan(worst)) {
      worst = std::max(worst, ratio);
    }
    if (!(residual <= tol)) {
      ++failures;
      if (failing.size() < 20) {
        std::ostringstream s;
        s << where << " (residual " << residual << ", tol " << tol << ")";
        failing.push_back(s.str());
      }
    }
  }

  void expect(bool ok, const std::string& where) { check(ok ? 0.0 : 1.0, 0.5, where); }
};

namespace verify {

namespace detail {

inline std::string tag(const std::string& what, std::uint64_t seed) {
  return what + " seed " + std::to_string(seed);
}

struct FamilyCase {
  std::string label;
  Family fam;
  Dagger dag;
  bool real;
  Index L;
};

inline std::vector<FamilyCase> fidelity_cases() {
  const Dagger H = Dagger::ConjTranspose, T = Dagger::Transpose;
  return {
      {"jatd-real", Family::Jatd, H, true, 2},        {"jatd-complex-H", Family::Jatd, H, false, 2},
      {"jatd-complex-T", Family::Jatd, T, false, 2},  {"jatd-s-H", Family::JatdSymmetric, H, false, 2},
      {"jatd-s-T", Family::JatdSymmetric, T, false, 2}, {"jatc-H", Family::Jatc, H, false, 2},
      {"jatc-T", Family::Jatc, T, false, 2},          {"tracemax-H", Family::TraceMax, H, false, 2},
      {"tracemax-T", Family::TraceMax, T, false, 2},  {"tracemax-shared", Family::TraceMax, H, false, 1},
  };
}

/// Small random instance of a case; dims and ranks drawn from rng.
inline ProblemSpec draw_instance(const FamilyCase& c, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nd(2, 5), dd(2, 3);
  if (c.fam == Family::TraceMax) {
    const Index n = nd(rng) + 1;
    std::uniform_int_distribution<Index> rd(1, n - 1);
    return sampling::random_problem(c.fam, c.dag, rng, {n, n}, {rd(rng)}, c.L, c.real);
  }
  if (c.fam == Family::JatdSymmetric) {
    const Index d = dd(rng);
    const Index n = std::uniform_int_distribution<Index>(2, d == 3 ? 4 : 5)(rng);
    std::uniform_int_distribution<Index> rd(1, n);
    return sampling::random_problem(c.fam, c.dag, rng, std::vector<Index>(d, n), {rd(rng)}, c.L,
                                    c.real);
  }
  std::vector<Index> dims(3);
  for (auto& n : dims) n = nd(rng);
  std::vector<Index> ranks;
  if (c.fam == Family::Jatc) {
    for (Index n : dims) ranks.push_back(std::uniform_int_distribution<Index>(1, n)(rng));
  } else {
    ranks = {std::uniform_int_distribution<Index>(1, *std::min_element(dims.begin(), dims.end()))(rng)};
  }
  return sampling::random_problem(c.fam, c.dag, rng, dims, ranks, c.L, c.real);
}

template <class Fn>
SuiteReport timed(const std::string& name, Fn&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport rep;
  rep.name = name;
  body(rep);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace detail

/// h(Psi) against z^T M z + C (or the sum of forms) at random rotations, and
/// the gamma = 1, 2, 3 block forms against direct contraction.
inline SuiteReport quadform_fidelity(int samples_per_family = 100, std::uint64_t seed = 1000) {
  return detail::timed("quadform-fidelity", [&](SuiteReport& rep) {
    const double pi = std::numbers::pi;
    std::uniform_real_distribution<double> th(0.0, pi), ph(-pi, pi);
    std::uint64_t s = seed;
    for (const auto& c : detail::fidelity_cases()) {
      for (int k = 0; k < samples_per_family; ++k, ++s) {
        std::mt19937_64 rng(s);
        const ProblemSpec spec = detail::draw_instance(c, rng);
        const UnitaryTuple ups = sampling::random_tuple(spec, rng);
        const auto W = transform(spec, ups);
        const Index p = std::uniform_int_distribution<Index>(0, spec.num_factors() - 1)(rng);
        const Index n = spec.factor_dim(p);
        Index i = std::uniform_int_distribution<Index>(0, n - 1)(rng);
        Index j = std::uniform_int_distribution<Index>(0, n - 2)(rng);
        if (j >= i) ++j;
        if (i > j) std::swap(i, j);
        const double t = th(rng), f = ph(rng);
        const double h = elementary_eval(spec, ups, p, i, j, t, f);
        if (spec.family == Family::JatdSymmetric) {
          const QuadFormSum qs = build_subproblem_jatd_symmetric(spec, W, i, j);
          rep.check(std::abs(h - qs.eval(t, f)), 1e-9 * (1.0 + std::abs(qs.C)),
                    detail::tag(c.label, s));
        } else {
          const QuadSubproblem q = build_subproblem(spec, W, p, i, j);
          rep.check(std::abs(h - eval_quad(q, t, f)), 1e-9 * (1.0 + std::abs(q.C)),
                    detail::tag(c.label, s));
        }
      }
    }
    for (Index gamma = 1; gamma <= 3; ++gamma) {
      for (int k = 0; k < samples_per_family; ++k, ++s) {
        std::mt19937_64 rng(s);
        const DenseTensor c = semisymmetrize(sampling::random_hermitian(2, gamma, rng), gamma);
        const GammaDecomposition dec = build_quadforms_gamma(c, gamma);
        const double t = th(rng), f = ph(rng);
        const Eigen::Matrix2cd psi = givens_block(t, f);
        const std::string where = detail::tag("gamma-" + std::to_string(gamma), s);
        rep.check(std::abs(dec.x_form().eval(t, f) - sampling::contract_block(c, gamma, psi.col(0))),
                  1e-9 * (1.0 + std::abs(dec.cx)), where + " x");
        rep.check(std::abs(dec.y_form().eval(t, f) - sampling::contract_block(c, gamma, psi.col(1))),
                  1e-9 * (1.0 + std::abs(dec.cy)), where + " y");
      }
    }
  });
}

/// Euclidean gradients against finite differences; Lambda blocks against the
/// gradient of the elementary function; Lambda_ij against the arrow entries.
inline SuiteReport gradients(int instances = 20, std::uint64_t seed = 2000) {
  return detail::timed("gradients", [&](SuiteReport& rep) {
    const auto cases = detail::fidelity_cases();
    for (int k = 0; k < instances; ++k) {
      for (const auto& c : cases) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(k) * cases.size() +
                                static_cast<std::uint64_t>(&c - cases.data());
        std::mt19937_64 rng(s);
        ProblemSpec spec = detail::draw_instance(c, rng);
        const UnitaryTuple ups = sampling::random_tuple(spec, rng);
        const auto W = transform(spec, ups);
        for (Index p = 0; p < spec.num_factors(); ++p) {
          const std::string where = detail::tag(c.label + " mode " + std::to_string(p), s);
          const ComplexMatrix an = euclid_grad_mode(spec, ups, p);
          const ComplexMatrix fd = sampling::fd_wirtinger(
              [&](const ComplexMatrix& x) {
                UnitaryTuple v = ups;
                v[p] = x;
                return objective_value(spec, v);
              },
              ups[p]);
          rep.check(sampling::rel_err(an, fd), 1e-6, where + " euclidean");

          const ComplexMatrix lam = lambda_field(spec, W, p);
          const double scale = std::max(1.0, lam.norm());
          rep.check((lam + lam.adjoint()).norm(), 1e-12 * scale, where + " skew");
          const Index n = spec.factor_dim(p);
          const Index i = std::uniform_int_distribution<Index>(0, n - 2)(rng);
          const Index j = std::uniform_int_distribution<Index>(i + 1, n - 1)(rng);
          auto h = [&](const ComplexMatrix& psi) {
            UnitaryTuple v = ups;
            v[p] = v[p] * givens_matrix(n, i, j, psi);
            return objective_value(spec, v);
          };
          const ComplexMatrix grad_h =
              skew(sampling::fd_wirtinger(h, ComplexMatrix::Identity(2, 2)));
          ComplexMatrix block(2, 2);
          block << lam(i, i), lam(i, j), lam(j, i), lam(j, j);
          rep.check((grad_h - block).norm(), 1e-10 * std::max(1.0, block.norm()),
                    where + " elementary block");
          if (spec.family != Family::JatdSymmetric) {
            const QuadSubproblem q = build_subproblem(spec, W, p, i, j);
            const Complex want = static_cast<double>(q.alpha) * Complex(q.M(0, 1), q.M(0, 2));
            rep.check(std::abs(lam(i, j) - want), 1e-10 * scale, where + " arrow entries");
          }
        }
      }
    }
  });
}

/// Per-step descent inequality of the gradient-selected iterations and the
/// proximal gain bound.
inline SuiteReport descent(int runs = 20, std::uint64_t seed = 3000) {
  return detail::timed("descent", [&](SuiteReport& rep) {
    for (int k = 0; k < runs; ++k) {
      const std::uint64_t s = seed + k;
      std::mt19937_64 rng(s);
      const Family fam = k % 2 == 0 ? Family::Jatd : Family::Jatc;
      const Dagger dag = (k / 2) % 2 == 0 ? Dagger::ConjTranspose : Dagger::Transpose;
      detail::FamilyCase c{to_string(fam), fam, dag, k % 5 == 0, 2};
      const ProblemSpec spec = detail::draw_instance(c, rng);
      SolverConfig cfg;
      cfg.max_iter = 400;
      cfg.random_start = true;
      cfg.seed = s;
      const SolveResult mg = jacobi_mg(spec, cfg);
      for (const auto& r : mg.records) {
        if (r.skipped) continue;
        rep.check(-r.slack, 1e-12 * (1.0 + std::abs(r.f)),
                  detail::tag("jacobi-mg " + c.label + " step " + std::to_string(r.k), s));
      }
      cfg.epsilon = 1e-3;
      const SolveResult mgp = jacobi_mgp(spec, cfg);
      for (const auto& r : mgp.records) {
        if (r.skipped) continue;
        rep.check(-r.prox_slack, 1e-12 * (1.0 + std::abs(r.f)),
                  detail::tag("jacobi-mgp " + c.label + " step " + std::to_string(r.k), s));
      }
      // Single-factor proximal runs.
      detail::FamilyCase g{k % 2 == 0 ? "tracemax" : "jatd-s",
                           k % 2 == 0 ? Family::TraceMax : Family::JatdSymmetric, dag, false, 2};
      const ProblemSpec single = detail::draw_instance(g, rng);
      cfg.max_iter = 150;
      const SolveResult gp = jacobi_gp(single, cfg);
      for (const auto& r : gp.records) {
        if (r.skipped) continue;
        rep.check(-r.prox_slack, 1e-12 * (1.0 + std::abs(r.f)),
                  detail::tag("jacobi-gp " + g.label + " step " + std::to_string(r.k), s));
      }
    }
  });
}

/// Unitary-lift and Stiefel gradients at converged and at random points.  The
/// two norms satisfy u <= x <= sqrt(2) u, so either one vanishing forces the
/// other to vanish.
inline SuiteReport stationarity(int runs = 20, std::uint64_t seed = 4000) {
  return detail::timed("stationarity", [&](SuiteReport& rep) {
    for (int k = 0; k < runs; ++k) {
      const std::uint64_t s = seed + k;
      std::mt19937_64 rng(s);
      GeneratorSpec g;
      g.dims = {4, 5, 4};
      g.seed = s;
      g.noise = 0.3;
      std::string label;
      if (k % 2 == 0) {
        g.ranks = {3};
        label = "jatd r=3";
      } else {
        g.kind = GeneratorKind::RandomDense;
        g.family = Family::Jatc;
        g.ranks = {2, 3, 3};
        label = "jatc r=(2,3,3)";
      }
      g.dagger = (k / 2) % 2 == 0 ? Dagger::ConjTranspose : Dagger::Transpose;
      const ProblemSpec spec = generate(g).spec;
      SolverConfig cfg;
      cfg.grad_tol = 1e-6;
      cfg.max_iter = 100000;
      const SolveResult r = jacobi_mg(spec, cfg);
      const auto at_end = stationarity_pair_check(spec, r.factors);
      rep.expect(r.status == SolveStatus::GradConverged, detail::tag(label + " converged", s));
      rep.check(at_end.unitary, 1e-5, detail::tag(label + " unitary residual", s));
      rep.check(at_end.stiefel, 1e-4, detail::tag(label + " stiefel residual", s));

      const auto at_start = stationarity_pair_check(spec, sampling::random_tuple(spec, rng));
      rep.expect(at_start.unitary > 1e-3 && at_start.stiefel > 1e-3,
                 detail::tag(label + " random point not stationary", s));
      for (const auto& res : {at_end, at_start}) {
        const double tol = 1e-12 * (1.0 + res.stiefel);
        rep.check(res.unitary - res.stiefel, tol, detail::tag(label + " unitary <= stiefel", s));
        rep.check(res.stiefel - std::sqrt(2.0) * res.unitary, tol,
                  detail::tag(label + " stiefel <= sqrt2 unitary", s));
      }
    }
  });
}

/// Sphere-constrained proximal subproblem: KKT residual, optimality against
/// sampling, and the gain bound.
inline SuiteReport proximal(int samples = 300, std::uint64_t seed = 5000) {
  return detail::timed("proximal", [&](SuiteReport& rep) {
    for (int k = 0; k < samples; ++k) {
      const std::uint64_t s = seed + k;
      std::mt19937_64 rng(s);
      std::normal_distribution<double> nd;
      QuadSubproblem q;
      if (k % 2 == 0) {
        q.M = arrow_matrix(nd(rng), nd(rng), nd(rng));
      } else {
        for (int a = 0; a < 3; ++a)
          for (int b = a; b < 3; ++b) q.M(a, b) = q.M(b, a) = nd(rng);
      }
      const double eps = std::pow(10.0, -1.0 - (k % 6));
      const RotationPlan plan = solve_proximal(q, eps);
      const Vec3 z = plan.w;
      const std::string where = detail::tag("eps " + std::to_string(eps), s);
      const double lam = z.dot(q.M * z) + eps * z(0);
      rep.check((q.M * z + eps * Vec3::UnitX() - lam * z).norm(), 1e-10, where + " kkt");
      rep.check(eps * (z - Vec3::UnitX()).squaredNorm() - plan.predicted_gain, 1e-14,
                where + " gain bound");
      const double best = z.dot(q.M * z) + 2.0 * eps * z(0);
      double sampled = -1e300;
      for (int m = 0; m < 200; ++m) {
        const Vec3 v = Vec3(nd(rng), nd(rng), nd(rng)).normalized();
        sampled = std::max(sampled, v.dot(q.M * v) + 2.0 * eps * v(0));
      }
      rep.check(sampled - best, 1e-12, where + " optimality");
    }
  });
}

/// The chosen pair's block carries at least delta of the total gradient.
inline SuiteReport pair_selection(int fields = 100, std::uint64_t seed = 6000) {
  return detail::timed("pair-selection", [&](SuiteReport& rep) {
    for (int k = 0; k < fields; ++k) {
      const std::uint64_t s = seed + k;
      std::mt19937_64 rng(s);
      const Index d = std::uniform_int_distribution<Index>(1, 4)(rng);
      std::vector<ComplexMatrix> ls;
      Index nmax = 0;
      double total2 = 0.0;
      for (Index p = 0; p < d; ++p) {
        const Index n = std::uniform_int_distribution<Index>(2, 8)(rng);
        nmax = std::max(nmax, n);
        ls.push_back(skew(sampling::random_matrix(n, n, rng, k % 3 == 0)));
        total2 += ls.back().squaredNorm();
      }
      const auto pc = select_pair_gradient(ls);
      const std::string where = detail::tag("field d=" + std::to_string(d), s);
      rep.expect(pc.has_value(), where + " selects a pair");
      if (!pc) continue;
      const double total = std::sqrt(total2);
      rep.check(delta_bound_multi(d, nmax) * total - pc->sub_norm, 1e-14 * total, where);
      if (d == 1) {
        rep.check(delta_bound_single(nmax) * total - pc->sub_norm, 1e-14 * total,
                  where + " single-factor bound");
      }
    }
  });
}

/// Exact arrow structure of every emitted M, skew Lambda, unitary factors
/// after runs of every solver.
inline SuiteReport structure(int instances = 20, std::uint64_t seed = 7000) {
  return detail::timed("structure", [&](SuiteReport& rep) {
    const auto cases = detail::fidelity_cases();
    for (int k = 0; k < instances; ++k) {
      const auto& c = cases[k % cases.size()];
      const std::uint64_t s = seed + k;
      std::mt19937_64 rng(s);
      const ProblemSpec spec = detail::draw_instance(c, rng);
      const UnitaryTuple ups = sampling::random_tuple(spec, rng);
      const auto W = transform(spec, ups);
      for (Index p = 0; p < spec.num_factors(); ++p) {
        const ComplexMatrix lam = lambda_field(spec, W, p);
        rep.check((lam + lam.adjoint()).norm(), 1e-12 * std::max(1.0, lam.norm()),
                  detail::tag(c.label + " skew", s));
        if (spec.family == Family::JatdSymmetric) continue;
        const Index n = spec.factor_dim(p);
        for (Index i = 0; i + 1 < n; ++i)
          for (Index j = i + 1; j < n; ++j)
            rep.expect(is_arrow(build_subproblem(spec, W, p, i, j).M),
                       detail::tag(c.label + " arrow", s));
      }
      std::vector<std::string> solvers = {"jacobi-mg", "jacobi-mc", "jacobi-mgp", "baseline-rsd"};
      if (spec.single_factor()) solvers.insert(solvers.end(), {"jacobi-g", "jacobi-gp"});
      for (const auto& name : solvers) {
        SolverConfig cfg;
        cfg.max_iter = 300;
        cfg.epsilon = 1e-3;
        cfg.random_start = true;
        cfg.seed = s;
        const SolveResult r = run_solver(name, spec, cfg);
        for (const auto& u : r.factors)
          rep.check(unitarity_error(u), 1e-8, detail::tag(c.label + " " + name + " unitary", s));
      }
    }
  });
}

using SuiteFn = std::function<SuiteReport()>;

inline const std::map<std::string, SuiteFn>& suites() {
  static const std::map<std::string, SuiteFn> table = {
      {"quadform-fidelity", [] { return quadform_fidelity(); }},
      {"gradients", [] { return gradients(); }},
      {"descent", [] { return descent(); }},
      {"stationarity", [] { return stationarity(); }},
      {"proximal", [] { return proximal(); }},
      {"pair-selection", [] { return pair_selection(); }},
      {"structure", [] { return structure(); }},
  };
  return table;
}

}  // namespace verify

}  // namespace unijac
