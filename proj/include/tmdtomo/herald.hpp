#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "tmdtomo/fock.hpp"
#include "tmdtomo/tmd.hpp"

namespace tmdtomo {

enum class HeraldKind { Single, Double };

// Acceptance rule on signal click masks. Single = exactly one click across
// all signal gates; double = exactly one click on each detector's signal
// gates. Two clicks on the same detector are never accepted, which keeps the
// double rule free of same-detector afterpulse pairs.
struct HeraldCondition {
  HeraldKind kind = HeraldKind::Single;
  std::uint8_t detector_a_mask = 0;
  std::uint8_t detector_b_mask = 0;

  bool accepts(std::uint8_t signal_mask) const {
    const int total = std::popcount(static_cast<unsigned>(signal_mask));
    if (kind == HeraldKind::Single) return total == 1;
    return total == 2 &&
           std::popcount(static_cast<unsigned>(signal_mask & detector_a_mask)) == 1 &&
           std::popcount(static_cast<unsigned>(signal_mask & detector_b_mask)) == 1;
  }
};

HeraldCondition make_herald_condition(HeraldKind kind, const DetectorConfig& cfg);

// Diagonal POVM weights E_m = probability that the herald condition fires
// given m signal photons at the TMD input.
struct HeraldPovm {
  HeraldKind kind = HeraldKind::Single;
  std::vector<double> element;
  bool estimated = false;  // true when Monte Carlo estimated

  int cutoff() const { return static_cast<int>(element.size()); }
};

// Exact herald POVM from the single-mode pattern probabilities. Requires an
// afterpulse-free configuration.
HeraldPovm herald_povm(HeraldKind kind, const DetectorConfig& cfg, int d);

// Monte Carlo POVM estimate for configurations with afterpulsing, flagged
// via HeraldPovm::estimated.
HeraldPovm herald_povm_sampled(HeraldKind kind, const DetectorConfig& cfg, int d,
                               std::uint64_t shots_per_fock, std::uint64_t seed);

// Conditional idler state P_i(n) = sum_m E_m P_mn / sum_mn E_m P_mn.
PhotonDistribution post_measurement_idler(const JointPhotonDistribution& p, const HeraldPovm& povm);

struct HeraldSelection {
  ModeClickHistogram idler;
  double herald_weight = 0.0;      // summed weight of qualifying events
  std::uint64_t herald_events = 0; // qualifying events for count histograms
};

// Keep the idler patterns of events whose signal mask satisfies the herald
// condition. An empty selection returns zero weight rather than throwing.
HeraldSelection herald_select(const JointClickHistogram& h, const HeraldCondition& condition);

struct HeraldedEnsemble {
  std::vector<PhotonDistribution> members;
  int dropped = 0;
};

// Thought-experiment heralding: apply the herald POVM to each two-mode
// reconstruction of an ensemble. Members with zero herald probability are
// dropped with a warning.
HeraldedEnsemble simulate_heralding_from_reconstruction(
    const std::vector<JointPhotonDistribution>& ensemble, HeraldKind kind,
    const DetectorConfig& cfg, int d);

}  // namespace tmdtomo
