#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "tmdtomo/tmd.hpp"

namespace tmdtomo {

// A two-mode coherent probe, specified by its calibrated mean photon numbers
// per pulse at the TMD fiber inputs.
struct CoherentProbe {
  int id = 0;
  double mu_signal = 0.0;
  double mu_idler = 0.0;
  double calibration_relative_error = 0.0;
};

// Power-meter reading propagated through a calibrated attenuation chain.
struct AttenuationChain {
  double measured_power_w = 0.0;
  double repetition_rate_hz = 0.0;
  double wavelength_m = 0.0;
  std::vector<double> transmittances;
};

// Mean photons per pulse inside the fiber:
// (power / rate) * prod(transmittances) / (h c / lambda).
double calibrated_mean_photon(const AttenuationChain& chain);

enum class GridSpacing { Linear, Log };

// Cartesian grid of probe intensities with per-mode amplitude sqrt(mu)
// capped at alpha_max. The vacuum probe (0, 0) is always included.
std::vector<CoherentProbe> generate_probe_grid(double alpha_max, int signal_count, int idler_count,
                                               GridSpacing spacing = GridSpacing::Linear,
                                               double mu_min = 1e-2);

// Calibrated probes together with their measured (or simulated) responses.
class PatternLibrary {
 public:
  PatternLibrary(std::vector<CoherentProbe> probes, std::vector<JointClickHistogram> responses);

  int size() const { return static_cast<int>(probes_.size()); }
  const CoherentProbe& probe(int i) const { return probes_[static_cast<std::size_t>(i)]; }
  const JointClickHistogram& response(int i) const { return responses_[static_cast<std::size_t>(i)]; }
  const std::vector<CoherentProbe>& probes() const { return probes_; }

  // Singular values of the M x d^2 matrix of truncated probe Fock
  // coefficients; a rank diagnostic for the probe set.
  Eigen::VectorXd fock_singular_values(int d) const;

 private:
  std::vector<CoherentProbe> probes_;
  std::vector<JointClickHistogram> responses_;
};

struct EfficiencyEstimate {
  double eta = 0.0;
  double std_error = 0.0;
  int probes_used = 0;
};

// Least-squares fit of -ln f0 = eta * (mu_s + mu_i) over the library, where
// f0 is the all-zero-pattern frequency. Probes with f0 = 0 are skipped.
EfficiencyEstimate estimate_efficiency(const PatternLibrary& library);

// Simulated response of one probe. Afterpulse-free configurations use the
// exact per-event law sampled multinomially (the two modes are independent
// for product inputs); otherwise events are simulated gate by gate.
// mu_scale applies a common calibration-error factor to the true intensities
// while the probe record keeps its nominal values.
JointClickHistogram simulate_probe_response(const CoherentProbe& probe, const DetectorConfig& cfg,
                                            std::uint64_t n_events, std::uint64_t seed,
                                            double mu_scale = 1.0);

PatternLibrary simulate_probe_library(const std::vector<CoherentProbe>& probes,
                                      const DetectorConfig& cfg, std::uint64_t events_per_probe,
                                      std::uint64_t seed, double mu_scale = 1.0);

}  // namespace tmdtomo
