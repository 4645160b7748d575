#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tmdtomo/fock.hpp"

namespace tmdtomo {

inline constexpr int kBinsPerMode = 8;
inline constexpr int kModePatterns = 256;     // 2^8 single-mode click patterns
inline constexpr int kJointPatterns = 65536;  // 2^16 joint click patterns
inline constexpr int kGateCount = 16;

enum class Mode { Signal = 0, Idler = 1 };
enum class Detector { A = 0, B = 1 };

// Joint click outcome. Bit i of a mask (least significant = bin 1) is 1 when
// the corresponding time bin of that mode clicked.
struct ClickPattern {
  std::uint8_t signal_mask = 0;
  std::uint8_t idler_mask = 0;

  int joint_index() const { return static_cast<int>(signal_mask) * kModePatterns + idler_mask; }
  static ClickPattern from_index(int index) {
    return ClickPattern{static_cast<std::uint8_t>(index / kModePatterns),
                        static_cast<std::uint8_t>(index % kModePatterns)};
  }
  int signal_clicks() const { return std::popcount(static_cast<unsigned>(signal_mask)); }
  int idler_clicks() const { return std::popcount(static_cast<unsigned>(idler_mask)); }
};

// Afterpulse kernel: a gate fires spuriously with probability
// prob * decay^(delta - 1), delta gates after the most recent click on the
// same detector within the same event.
struct AfterpulseModel {
  double prob = 0.0;
  double decay = 0.5;
};

inline constexpr double kDefaultAfterpulseProb = 0.03;
inline constexpr double kDefaultAfterpulseDecay = 0.5;

// TMD description: splitting-tree weights per mode, one detection efficiency
// shared by both SPADs, per-gate dark counts, afterpulse kernel, and the
// mapping of the 16 (mode, bin) gates onto detectors A/B and time slots.
//
// Gate id = mode * 8 + bin. Defaults: uniform 1/8 splitting, even bins on
// detector A and odd bins on detector B, time order = all signal bins then
// all idler bins (so each detector sees 4 signal gates before 4 idler gates).
struct DetectorConfig {
  std::array<double, kBinsPerMode> bin_probabilities_signal{};
  std::array<double, kBinsPerMode> bin_probabilities_idler{};
  double detector_efficiency = 0.22;
  double dark_count_prob = 0.0;
  AfterpulseModel afterpulse{};
  std::array<Detector, kGateCount> gate_detector{};
  std::array<int, kGateCount> gate_time_order{};  // time slot t -> gate id

  static DetectorConfig defaults();
  void validate() const;
  bool afterpulse_free() const { return afterpulse.prob == 0.0; }
  const std::array<double, kBinsPerMode>& bin_probabilities(Mode mode) const {
    return mode == Mode::Signal ? bin_probabilities_signal : bin_probabilities_idler;
  }
  // Bins of `mode` read out by detector `det`, as a click-mask.
  std::uint8_t detector_bin_mask(Mode mode, Detector det) const;
};

// Histogram over the 65536 joint patterns. Carries either event counts
// (events > 0) or exact probabilities (events == 0, weights summing to ~1).
class JointClickHistogram {
 public:
  JointClickHistogram() : weights_(kJointPatterns, 0.0), events_(0) {}
  JointClickHistogram(std::vector<double> weights, std::uint64_t events);

  double operator[](int index) const { return weights_[static_cast<std::size_t>(index)]; }
  double& at(int index) { return weights_[static_cast<std::size_t>(index)]; }
  const std::vector<double>& weights() const { return weights_; }
  std::uint64_t events() const { return events_; }
  double total_weight() const;
  std::vector<double> frequencies() const;
  void add(const JointClickHistogram& other);

 private:
  std::vector<double> weights_;
  std::uint64_t events_;
};

// Histogram over the 256 patterns of a single mode.
struct ModeClickHistogram {
  std::vector<double> weights = std::vector<double>(kModePatterns, 0.0);
  std::uint64_t events = 0;

  double total_weight() const;
  std::vector<double> frequencies() const;
};

// Detection matrix for an afterpulse-free TMD: the response to |m, n> factors
// into per-mode pattern probabilities, stored as two 256 x d blocks.
class ResponseMatrix {
 public:
  ResponseMatrix(Eigen::MatrixXd signal_block, Eigen::MatrixXd idler_block);

  int cutoff() const { return static_cast<int>(signal_.cols()); }
  double entry(int joint_pattern, int m, int n) const {
    return signal_(joint_pattern / kModePatterns, m) * idler_(joint_pattern % kModePatterns, n);
  }
  Eigen::VectorXd column(int m, int n) const;
  const Eigen::MatrixXd& signal_block() const { return signal_; }
  const Eigen::MatrixXd& idler_block() const { return idler_; }

 private:
  Eigen::MatrixXd signal_;
  Eigen::MatrixXd idler_;
};

// Single-mode click-pattern probabilities p(mask | k photons) for
// k = 0..d-1, including splitting, detector efficiency and dark counts.
// Afterpulse-free by construction (callers gate on cfg.afterpulse_free()).
Eigen::MatrixXd mode_click_matrix(const DetectorConfig& cfg, Mode mode, int d);

// Exact joint click-pattern distribution for an afterpulse-free detector.
// Throws if afterpulsing is enabled (use sample_patterns) or cutoff > 12.
JointClickHistogram exact_pattern_distribution(const JointPhotonDistribution& p,
                                               const DetectorConfig& cfg);

// Columns are exact_pattern_distribution of the Fock inputs |m, n>, m,n < d.
ResponseMatrix build_response_matrix(const DetectorConfig& cfg, int d);

// Event-level Monte Carlo with the full gate model (dark counts and
// afterpulsing). Deterministic for a fixed seed.
JointClickHistogram sample_patterns(const JointPhotonDistribution& p, const DetectorConfig& cfg,
                                    std::uint64_t n_events, std::uint64_t seed);

std::pair<ModeClickHistogram, ModeClickHistogram> marginalize(const JointClickHistogram& h);

// Fold the 256 single-mode patterns into the 9 click-count classes.
std::array<double, 9> reduce_to_click_classes(const ModeClickHistogram& h);

namespace detail {
// Joint pattern probabilities without the public cutoff guard; used
// internally for probe/data synthesis at generous truncations.
std::vector<double> joint_pattern_probabilities(const JointPhotonDistribution& p,
                                                const DetectorConfig& cfg);
}  // namespace detail

}  // namespace tmdtomo
