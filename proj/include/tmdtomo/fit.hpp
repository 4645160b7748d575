#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tmdtomo/herald.hpp"
#include "tmdtomo/probes.hpp"
#include "tmdtomo/tmd.hpp"

namespace tmdtomo {

enum class FitView {
  Joint,
  MarginalSignal,
  MarginalIdler,
  ClassSignal,
  ClassIdler,
  HeraldedSingle,
  HeraldedDouble,
};

bool is_joint_view(FitView view);
std::string view_name(FitView view);
FitView view_from_name(const std::string& name);

// Data vector, probe pattern columns and probe Fock columns, reduced
// identically under the chosen view. Pattern and Fock columns are normalized
// to unit sum; P = probe_fock * x is the reconstruction map.
struct FitProblem {
  Eigen::VectorXd data;
  Eigen::MatrixXd patterns;    // rows x M
  Eigen::MatrixXd probe_fock;  // (d*d or d) x M
  int cutoff = 8;
  FitView view = FitView::Joint;
  std::vector<int> probe_ids;
};

// Heralded views require the condition that selected the data.
FitProblem assemble(const PatternLibrary& library, const JointClickHistogram& data, FitView view,
                    int d, const HeraldCondition* condition = nullptr);

struct SolveOptions {
  double tolerance = 1e-8;
  int max_iterations = 20000;
};

struct FitResult {
  Eigen::VectorXd weights;
  std::vector<double> fock_probs;  // clamped and renormalized, size d*d or d
  int cutoff = 0;
  FitView view = FitView::Joint;
  double residual = 0.0;      // squared distance between data and fitted patterns
  double kkt_residual = 0.0;  // projected-gradient norm at the returned weights
  double min_constraint = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> objective_trace;  // accepted objective values, nonincreasing

  JointPhotonDistribution joint() const;
  PhotonDistribution single() const;
};

// Minimize ||data - patterns * x||^2 subject to probe_fock * x >= 0 and
// sum(probe_fock * x) = 1: accelerated projected gradient with a dual-ascent
// projection, refined by an active-set step near convergence.
FitResult solve(const FitProblem& problem, const SolveOptions& options = {});

// Precomputed normal form of a problem; bootstrap repetitions solve on
// column subsets without touching the pattern matrix again.
struct GramCache {
  Eigen::MatrixXd gram;   // patterns^T patterns
  Eigen::VectorXd cross;  // patterns^T data
  double data_sq = 0.0;
};

GramCache make_gram(const FitProblem& problem);
FitResult solve_subset(const FitProblem& problem, const GramCache& cache,
                       const std::vector<int>& subset, const SolveOptions& options = {});

// Diagnostic: singular values of the pattern matrix.
Eigen::VectorXd pattern_singular_values(const FitProblem& problem);

struct CrossValidationSummary {
  double mean_fidelity = 0.0;
  double std_fidelity = 0.0;
  double mean_max_error = 0.0;
  double std_max_error = 0.0;
  int evaluations = 0;
};

// Refit each held-out probe's measured response from the retained probes and
// compare against its truncated Fock coefficients.
CrossValidationSummary cross_validate(const PatternLibrary& library, double holdout_fraction,
                                      int repetitions, FitView view, int d, std::uint64_t seed,
                                      const HeraldCondition* condition = nullptr,
                                      const SolveOptions& options = {});

}  // namespace tmdtomo
