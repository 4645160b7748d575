#pragma once

#include <cstdint>
#include <vector>

#include "tmdtomo/fit.hpp"

namespace tmdtomo {

// Multinomial counts for n draws from p, via chained binomials.
// Deterministic for a fixed seed.
std::vector<std::uint64_t> multinomial_sample(const std::vector<double>& p, std::uint64_t n,
                                              std::uint64_t seed);

// Reconstructions over random probe subsets, with elementwise mean and
// standard deviation of the recovered photon-number distributions.
struct BootstrapEnsemble {
  std::vector<std::vector<double>> members;  // clamped fock probabilities per repetition
  std::vector<double> mean;
  std::vector<double> stddev;
  int cutoff = 0;
  FitView view = FitView::Joint;
  int subset_size = 0;
  int repetitions = 0;
  int dropped = 0;

  bool joint() const { return is_joint_view(view); }
};

BootstrapEnsemble bootstrap_reconstruct(const PatternLibrary& library,
                                        const JointClickHistogram& data, int subset_size,
                                        int repetitions, FitView view, int d, std::uint64_t seed,
                                        const HeraldCondition* condition = nullptr,
                                        const SolveOptions& options = {});

}  // namespace tmdtomo
