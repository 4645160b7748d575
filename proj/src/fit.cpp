#include "tmdtomo/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "tmdtomo/rng.hpp"

namespace tmdtomo {

bool is_joint_view(FitView view) { return view == FitView::Joint; }

std::string view_name(FitView view) {
  switch (view) {
    case FitView::Joint: return "joint";
    case FitView::MarginalSignal: return "marginal-signal";
    case FitView::MarginalIdler: return "marginal-idler";
    case FitView::ClassSignal: return "class-signal";
    case FitView::ClassIdler: return "class-idler";
    case FitView::HeraldedSingle: return "heralded-single";
    case FitView::HeraldedDouble: return "heralded-double";
  }
  throw std::invalid_argument("unknown view");
}

FitView view_from_name(const std::string& name) {
  for (FitView v : {FitView::Joint, FitView::MarginalSignal, FitView::MarginalIdler,
                    FitView::ClassSignal, FitView::ClassIdler, FitView::HeraldedSingle,
                    FitView::HeraldedDouble})
    if (view_name(v) == name) return v;
  throw std::invalid_argument("unknown view name: " + name);
}

namespace {

Eigen::VectorXd mode_frequencies(const ModeClickHistogram& h) {
  const std::vector<double> f = h.frequencies();
  return Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
}

Eigen::VectorXd class_frequencies(const ModeClickHistogram& h) {
  const std::array<double, 9> classes = reduce_to_click_classes(h);
  Eigen::VectorXd f(9);
  double total = 0.0;
  for (int k = 0; k < 9; ++k) total += classes[static_cast<std::size_t>(k)];
  if (total <= 0.0) throw std::invalid_argument("cannot normalize an empty histogram");
  for (int k = 0; k < 9; ++k) f(k) = classes[static_cast<std::size_t>(k)] / total;
  return f;
}

Eigen::VectorXd fock_column(const CoherentProbe& probe, FitView view, int d) {
  switch (view) {
    case FitView::Joint: {
      const JointPhotonDistribution p = poisson_product(probe.mu_signal, probe.mu_idler, d).normalized();
      return Eigen::Map<const Eigen::VectorXd>(p.probs().data(), d * d);
    }
    case FitView::MarginalSignal:
    case FitView::ClassSignal: {
      const PhotonDistribution p = poisson_marginal(probe.mu_signal, d).normalized();
      return Eigen::Map<const Eigen::VectorXd>(p.probs().data(), d);
    }
    case FitView::MarginalIdler:
    case FitView::ClassIdler:
    case FitView::HeraldedSingle:
    case FitView::HeraldedDouble: {
      const PhotonDistribution p = poisson_marginal(probe.mu_idler, d).normalized();
      return Eigen::Map<const Eigen::VectorXd>(p.probs().data(), d);
    }
  }
  throw std::invalid_argument("unknown view");
}

}  // namespace

FitProblem assemble(const PatternLibrary& library, const JointClickHistogram& data, FitView view,
                    int d, const HeraldCondition* condition) {
  if (d < 1 || d > 16) throw std::invalid_argument("fit cutoff must lie in [1, 16]");
  const bool heralded = view == FitView::HeraldedSingle || view == FitView::HeraldedDouble;
  if (heralded && condition == nullptr)
    throw std::invalid_argument("heralded views require a herald condition");

  FitProblem problem;
  problem.view = view;
  problem.cutoff = d;

  // Reduce the data and every probe response identically under the view.
  std::vector<Eigen::VectorXd> columns;
  std::vector<int> ids;
  switch (view) {
    case FitView::Joint: {
      const std::vector<double> f = data.frequencies();
      problem.data = Eigen::Map<const Eigen::VectorXd>(f.data(), kJointPatterns);
      for (int i = 0; i < library.size(); ++i) {
        const std::vector<double> g = library.response(i).frequencies();
        columns.emplace_back(Eigen::Map<const Eigen::VectorXd>(g.data(), kJointPatterns));
        ids.push_back(library.probe(i).id);
      }
      break;
    }
    case FitView::MarginalSignal:
    case FitView::MarginalIdler: {
      const bool signal = view == FitView::MarginalSignal;
      const auto [ds, di] = marginalize(data);
      problem.data = mode_frequencies(signal ? ds : di);
      for (int i = 0; i < library.size(); ++i) {
        const auto [ps, pi] = marginalize(library.response(i));
        columns.push_back(mode_frequencies(signal ? ps : pi));
        ids.push_back(library.probe(i).id);
      }
      break;
    }
    case FitView::ClassSignal:
    case FitView::ClassIdler: {
      const bool signal = view == FitView::ClassSignal;
      const auto [ds, di] = marginalize(data);
      problem.data = class_frequencies(signal ? ds : di);
      for (int i = 0; i < library.size(); ++i) {
        const auto [ps, pi] = marginalize(library.response(i));
        columns.push_back(class_frequencies(signal ? ps : pi));
        ids.push_back(library.probe(i).id);
      }
      break;
    }
    case FitView::HeraldedSingle:
    case FitView::HeraldedDouble: {
      const HeraldSelection sel = herald_select(data, *condition);
      if (sel.herald_weight <= 0.0)
        throw std::runtime_error("no events satisfy the herald condition");
      problem.data = mode_frequencies(sel.idler);
      for (int i = 0; i < library.size(); ++i) {
        const HeraldSelection psel = herald_select(library.response(i), *condition);
        if (psel.herald_weight <= 0.0) continue;  // zero herald probability, excluded
        columns.push_back(mode_frequencies(psel.idler));
        ids.push_back(library.probe(i).id);
      }
      break;
    }
  }
  if (columns.empty()) throw std::runtime_error("no usable probes for this view");

  const Eigen::Index rows = problem.data.size();
  const Eigen::Index fock_rows = is_joint_view(view) ? d * d : d;
  problem.patterns.resize(rows, static_cast<Eigen::Index>(columns.size()));
  problem.probe_fock.resize(fock_rows, static_cast<Eigen::Index>(columns.size()));
  problem.probe_ids = ids;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    problem.patterns.col(static_cast<Eigen::Index>(j)) = columns[j];
    int probe_index = 0;
    while (library.probe(probe_index).id != ids[j]) ++probe_index;
    problem.probe_fock.col(static_cast<Eigen::Index>(j)) =
        fock_column(library.probe(probe_index), view, d);
  }
  return problem;
}

JointPhotonDistribution FitResult::joint() const {
  if (!is_joint_view(view)) throw std::logic_error("not a joint reconstruction");
  return JointPhotonDistribution(fock_probs, cutoff);
}

PhotonDistribution FitResult::single() const {
  if (is_joint_view(view)) throw std::logic_error("not a single-mode reconstruction");
  return PhotonDistribution(fock_probs);
}

GramCache make_gram(const FitProblem& problem) {
  GramCache cache;
  cache.gram.noalias() = problem.patterns.transpose() * problem.patterns;
  cache.cross.noalias() = problem.patterns.transpose() * problem.data;
  cache.data_sq = problem.data.squaredNorm();
  return cache;
}

Eigen::VectorXd pattern_singular_values(const FitProblem& problem) {
  return problem.patterns.jacobiSvd().singularValues();
}

namespace {

// Euclidean projection onto {x : Gn x >= 0, an.x = h} by accelerated ascent
// on the dual. Gn rows and an have unit norm. Warm-started between calls.
class ConeProjector {
 public:
  ConeProjector(Eigen::MatrixXd gn, Eigen::VectorXd an, double h)
      : gn_(std::move(gn)), an_(std::move(an)), h_(h), mu_(Eigen::VectorXd::Zero(gn_.rows())), nu_(0.0) {
    Eigen::MatrixXd d(gn_.rows() + 1, gn_.cols());
    d.topRows(gn_.rows()) = gn_;
    d.bottomRows(1) = an_.transpose();
    const Eigen::VectorXd sv = d.jacobiSvd().singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 1.0;
    step_ = 1.0 / std::max(smax * smax, 1e-300);
  }

  Eigen::VectorXd project(const Eigen::VectorXd& v, double tol, int max_iter) {
    Eigen::VectorXd mu = mu_;
    double nu = nu_;
    Eigen::VectorXd mu_prev = mu;
    double nu_prev = nu;
    double t = 1.0;
    Eigen::VectorXd y = v;
    for (int it = 0; it < max_iter; ++it) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double beta = (t - 1.0) / t_next;
      const Eigen::VectorXd mu_y = mu + beta * (mu - mu_prev);
      const double nu_y = nu + beta * (nu - nu_prev);

      y = v + gn_.transpose() * mu_y - an_ * nu_y;
      const Eigen::VectorXd slack = gn_ * y;
      const double eq = an_.dot(y) - h_;

      mu_prev = mu;
      nu_prev = nu;
      mu = (mu_y - step_ * slack).cwiseMax(0.0);
      nu = nu_y + step_ * eq;
      t = t_next;

      const double viol = std::max(std::max(0.0, -slack.minCoeff()), std::abs(eq));
      if (viol <= tol) break;
    }
    mu_ = mu;
    nu_ = nu;
    y = v + gn_.transpose() * mu - an_ * nu;
    return y;
  }

  double feasibility(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd slack = gn_ * x;
    return std::max(std::max(0.0, -slack.minCoeff()), std::abs(an_.dot(x) - h_));
  }

 private:
  Eigen::MatrixXd gn_;
  Eigen::VectorXd an_;
  double h_;
  double step_;
  Eigen::VectorXd mu_;
  double nu_;
};

struct QpCore {
  Eigen::MatrixXd h;   // patterns^T patterns (subset)
  Eigen::VectorXd b;   // patterns^T data
  double c = 0.0;      // data^T data
  Eigen::MatrixXd g;   // fock map, original scale
  Eigen::MatrixXd gn;  // fock map, unit-norm rows
  Eigen::VectorXd an;  // normalized column-sum vector of g
  double hn = 0.0;     // equality target in normalized scale

  double objective(const Eigen::VectorXd& x) const {
    return c - 2.0 * b.dot(x) + x.dot(h * x);
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return 2.0 * (h * x - b); }
};

QpCore build_core(const Eigen::MatrixXd& h, const Eigen::VectorXd& b, double c,
                  const Eigen::MatrixXd& g) {
  QpCore core;
  core.h = h;
  core.b = b;
  core.c = c;
  core.g = g;
  core.gn = g;
  for (Eigen::Index r = 0; r < core.gn.rows(); ++r) {
    const double norm = core.gn.row(r).norm();
    if (norm > 0.0) core.gn.row(r) /= norm;
  }
  const Eigen::VectorXd a = g.colwise().sum().transpose();
  const double an_norm = a.norm();
  if (an_norm <= 0.0) throw std::invalid_argument("degenerate fock map");
  core.an = a / an_norm;
  core.hn = 1.0 / an_norm;
  return core;
}

// Equality-constrained QP step for the active-set refinement. Solves the KKT
// system with a rank-revealing decomposition plus one refinement pass.
bool solve_eq_qp(const QpCore& core, const std::vector<int>& active, Eigen::VectorXd& x_out,
                 Eigen::VectorXd& mult_out) {
  const Eigen::Index m = core.h.cols();
  const Eigen::Index na = static_cast<Eigen::Index>(active.size());
  const Eigen::Index dim = m + na + 1;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
  kkt.topLeftCorner(m, m) = 2.0 * core.h;
  for (Eigen::Index i = 0; i < na; ++i) {
    kkt.block(m + i, 0, 1, m) = core.gn.row(active[static_cast<std::size_t>(i)]);
    kkt.block(0, m + i, m, 1) = core.gn.row(active[static_cast<std::size_t>(i)]).transpose();
  }
  kkt.block(m + na, 0, 1, m) = core.an.transpose();
  kkt.block(0, m + na, m, 1) = core.an;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  rhs.head(m) = 2.0 * core.b;
  rhs(dim - 1) = core.hn;

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
  Eigen::VectorXd sol = cod.solve(rhs);
  sol += cod.solve(rhs - kkt * sol);  // one refinement pass
  if (!sol.allFinite()) return false;
  if ((kkt * sol - rhs).norm() > 1e-6 * (1.0 + rhs.norm())) return false;
  x_out = sol.head(m);
  mult_out = sol.segment(m, na);
  return true;
}

// Primal active-set refinement started from a feasible near-optimal point.
void active_set_polish(const QpCore& core, Eigen::VectorXd& x, std::vector<double>& trace,
                       int& iterations, int max_steps) {
  const double act_eps = 1e-9;
  const double mult_eps = 1e-10;
  std::vector<int> active;
  Eigen::VectorXd slack = core.gn * x;
  for (Eigen::Index i = 0; i < slack.size(); ++i)
    if (slack(i) <= act_eps) active.push_back(static_cast<int>(i));

  double f_cur = core.objective(x);
  for (int step = 0; step < max_steps; ++step) {
    ++iterations;
    Eigen::VectorXd x_eq;
    Eigen::VectorXd lambda;
    if (!solve_eq_qp(core, active, x_eq, lambda)) return;

    if ((x_eq - x).norm() <= 1e-12 * (1.0 + x.norm())) {
      // Optimal for the current working set; check multiplier signs.
      int worst = -1;
      double worst_val = -mult_eps;
      for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        const double mu = -lambda(i);
        if (mu < worst_val) {
          worst_val = mu;
          worst = static_cast<int>(i);
        }
      }
      if (worst < 0) return;
      active.erase(active.begin() + worst);
      continue;
    }

    // Step toward the equality-constrained optimum, stopping at the first
    // blocking inactive constraint.
    double theta = 1.0;
    int blocker = -1;
    const Eigen::VectorXd s0 = core.gn * x;
    const Eigen::VectorXd s1 = core.gn * x_eq;
    for (Eigen::Index i = 0; i < s1.size(); ++i) {
      if (std::find(active.begin(), active.end(), static_cast<int>(i)) != active.end()) continue;
      if (s1(i) < -1e-14 && s0(i) > s1(i)) {
        const double ti = std::max(s0(i), 0.0) / (s0(i) - s1(i));
        if (ti < theta) {
          theta = ti;
          blocker = static_cast<int>(i);
        }
      }
    }
    const Eigen::VectorXd x_next = x + theta * (x_eq - x);
    const double f_next = core.objective(x_next);
    if (f_next > f_cur + 1e-12 * (1.0 + std::abs(f_cur))) return;
    x = x_next;
    f_cur = std::min(f_cur, f_next);
    trace.push_back(f_cur);
    if (blocker >= 0)
      active.push_back(blocker);
    else if (theta >= 1.0)
      continue;  // reached x_eq; next pass checks multipliers
  }
}

FitResult solve_core(QpCore core, FitView view, int cutoff, std::vector<int> probe_ids,
                     const SolveOptions& options) {
  const Eigen::Index m = core.h.cols();
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(core.h)
                          .eigenvalues()
                          .cwiseAbs()
                          .maxCoeff();
  const double alpha = 1.0 / std::max(2.0 * lmax, 1e-300);

  ConeProjector projector(core.gn, core.an, core.hn);
  const double proj_tol = std::min(options.tolerance * 1e-2, 1e-10);

  // Uniform probe mixture: feasible by construction (columns sum to 1).
  Eigen::VectorXd x = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  Eigen::VectorXd x_prev = x;
  double f_best = core.objective(x);
  std::vector<double> trace{f_best};

  int iterations = 0;
  double t = 1.0;
  const int apgd_cap = std::min(options.max_iterations, 4000);
  const double apgd_exit = std::max(options.tolerance, 1e-9);
  for (int it = 0; it < apgd_cap; ++it) {
    ++iterations;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    const Eigen::VectorXd y = x + beta * (x - x_prev);
    Eigen::VectorXd cand = projector.project(y - alpha * core.gradient(y), proj_tol, 2000);
    double f_cand = core.objective(cand);
    if (f_cand > f_best) {
      cand = projector.project(x - alpha * core.gradient(x), proj_tol, 2000);
      f_cand = core.objective(cand);
      t = 1.0;
      if (f_cand > f_best) {
        x_prev = x;
        trace.push_back(f_best);
        // Momentum restart did not help; fall through to the polish.
        if (it > 50) break;
        continue;
      }
    } else {
      t = t_next;
    }
    x_prev = x;
    x = cand;
    f_best = std::min(f_best, f_cand);
    trace.push_back(f_best);

    if (it % 25 == 24) {
      const Eigen::VectorXd mapped = projector.project(x - alpha * core.gradient(x), proj_tol, 4000);
      const double kkt = (x - mapped).norm() / alpha;
      if (kkt <= apgd_exit) break;
    }
  }

  active_set_polish(core, x, trace, iterations, 400);

  FitResult result;
  result.weights = x;
  result.view = view;
  result.cutoff = cutoff;
  result.iterations = iterations;
  result.objective_trace = std::move(trace);

  const Eigen::VectorXd mapped = projector.project(x - alpha * core.gradient(x), 1e-13, 20000);
  result.kkt_residual = (x - mapped).norm() / alpha;
  result.residual = std::max(core.objective(x), 0.0);

  Eigen::VectorXd p = core.g * x;
  result.min_constraint = p.minCoeff();
  const double sum_err = std::abs(p.sum() - 1.0);
  result.converged = result.kkt_residual <= options.tolerance &&
                     result.min_constraint >= -options.tolerance && sum_err <= options.tolerance;

  // Clamp roundoff negatives and renormalize for the reported distribution.
  p = p.cwiseMax(0.0);
  const double total = p.sum();
  if (total <= 0.0) throw std::runtime_error("solver produced an empty distribution");
  p /= total;
  result.fock_probs.assign(p.data(), p.data() + p.size());
  result.weights = x;
  std::ignore = probe_ids;
  return result;
}

}  // namespace

FitResult solve(const FitProblem& problem, const SolveOptions& options) {
  const GramCache cache = make_gram(problem);
  std::vector<int> all(static_cast<std::size_t>(problem.patterns.cols()));
  std::iota(all.begin(), all.end(), 0);
  return solve_subset(problem, cache, all, options);
}

FitResult solve_subset(const FitProblem& problem, const GramCache& cache,
                       const std::vector<int>& subset, const SolveOptions& options) {
  if (subset.empty()) throw std::invalid_argument("probe subset cannot be empty");
  const Eigen::Index m = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd h(m, m);
  Eigen::VectorXd b(m);
  Eigen::MatrixXd g(problem.probe_fock.rows(), m);
  std::vector<int> ids;
  ids.reserve(subset.size());
  for (Eigen::Index j = 0; j < m; ++j) {
    const int cj = subset[static_cast<std::size_t>(j)];
    b(j) = cache.cross(cj);
    g.col(j) = problem.probe_fock.col(cj);
    ids.push_back(problem.probe_ids[static_cast<std::size_t>(cj)]);
    for (Eigen::Index i = 0; i < m; ++i) h(i, j) = cache.gram(subset[static_cast<std::size_t>(i)], cj);
  }
  return solve_core(build_core(h, b, cache.data_sq, g), problem.view, problem.cutoff,
                    std::move(ids), options);
}

namespace {

double vector_fidelity(const std::vector<double>& p, const Eigen::VectorXd& q) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i)
    s += std::sqrt(std::max(p[static_cast<std::size_t>(i)], 0.0) * std::max(q(i), 0.0));
  return s * s;
}

}  // namespace

CrossValidationSummary cross_validate(const PatternLibrary& library, double holdout_fraction,
                                      int repetitions, FitView view, int d, std::uint64_t seed,
                                      const HeraldCondition* condition,
                                      const SolveOptions& options) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw std::invalid_argument("holdout fraction must lie in (0, 1)");
  if (repetitions < 1) throw std::invalid_argument("repetitions must be positive");
  const int m = library.size();
  const int n_hold = std::max(1, static_cast<int>(std::lround(holdout_fraction * m)));
  if (m - n_hold < 2) throw std::invalid_argument("holdout leaves fewer than two probes");

  std::vector<double> fidelities;
  std::vector<double> max_errors;
  for (int rep = 0; rep < repetitions; ++rep) {
    std::mt19937_64 rng(sub_seed(seed, static_cast<std::uint64_t>(rep)));
    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    for (int i = m - 1; i > 0; --i) {
      const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    std::vector<CoherentProbe> retained_probes;
    std::vector<JointClickHistogram> retained_responses;
    for (int i = n_hold; i < m; ++i) {
      retained_probes.push_back(library.probe(order[static_cast<std::size_t>(i)]));
      retained_responses.push_back(library.response(order[static_cast<std::size_t>(i)]));
    }
    const PatternLibrary retained(std::move(retained_probes), std::move(retained_responses));

    for (int i = 0; i < n_hold; ++i) {
      const int held = order[static_cast<std::size_t>(i)];
      FitProblem problem;
      try {
        problem = assemble(retained, library.response(held), view, d, condition);
      } catch (const std::runtime_error&) {
        continue;  // e.g. held-out probe with no heralds under a heralded view
      }
      const FitResult result = solve(problem, options);
      const Eigen::VectorXd truth = fock_column(library.probe(held), view, d);
      fidelities.push_back(vector_fidelity(result.fock_probs, truth));
      double err = 0.0;
      for (Eigen::Index k = 0; k < truth.size(); ++k)
        err = std::max(err, std::abs(result.fock_probs[static_cast<std::size_t>(k)] - truth(k)));
      max_errors.push_back(err);
    }
  }
  if (fidelities.empty()) throw std::runtime_error("cross-validation produced no evaluations");

  auto summarize = [](const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  const auto [fid_mean, fid_std] = summarize(fidelities);
  const auto [err_mean, err_std] = summarize(max_errors);
  return CrossValidationSummary{fid_mean, fid_std, err_mean, err_std,
                                static_cast<int>(fidelities.size())};
}

}  // namespace tmdtomo
