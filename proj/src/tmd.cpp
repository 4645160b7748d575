#include "tmdtomo/tmd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace tmdtomo {

namespace {

constexpr double kBinSumTolerance = 1e-12;

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

DetectorConfig DetectorConfig::defaults() {
  DetectorConfig cfg;
  cfg.bin_probabilities_signal.fill(1.0 / kBinsPerMode);
  cfg.bin_probabilities_idler.fill(1.0 / kBinsPerMode);
  for (int g = 0; g < kGateCount; ++g) {
    cfg.gate_detector[static_cast<std::size_t>(g)] = (g % 2 == 0) ? Detector::A : Detector::B;
    cfg.gate_time_order[static_cast<std::size_t>(g)] = g;
  }
  return cfg;
}

void DetectorConfig::validate() const {
  for (const auto* bins : {&bin_probabilities_signal, &bin_probabilities_idler}) {
    double sum = 0.0;
    for (double q : *bins) {
      if (!(q >= 0.0)) throw std::invalid_argument("bin probabilities must be nonnegative");
      sum += q;
    }
    if (std::abs(sum - 1.0) > kBinSumTolerance)
      throw std::invalid_argument("bin probabilities must sum to 1");
  }
  check_probability(detector_efficiency, "detector efficiency");
  check_probability(dark_count_prob, "dark count probability");
  check_probability(afterpulse.prob, "afterpulse probability");
  check_probability(afterpulse.decay, "afterpulse decay");
  std::array<bool, kGateCount> seen{};
  for (int g : gate_time_order) {
    if (g < 0 || g >= kGateCount || seen[static_cast<std::size_t>(g)])
      throw std::invalid_argument("gate time order must be a permutation of the 16 gates");
    seen[static_cast<std::size_t>(g)] = true;
  }
}

std::uint8_t DetectorConfig::detector_bin_mask(Mode mode, Detector det) const {
  std::uint8_t mask = 0;
  const int base = static_cast<int>(mode) * kBinsPerMode;
  for (int b = 0; b < kBinsPerMode; ++b)
    if (gate_detector[static_cast<std::size_t>(base + b)] == det) mask |= static_cast<std::uint8_t>(1u << b);
  return mask;
}

JointClickHistogram::JointClickHistogram(std::vector<double> weights, std::uint64_t events)
    : weights_(std::move(weights)), events_(events) {
  if (weights_.size() != kJointPatterns)
    throw std::invalid_argument("joint histogram must have 65536 cells");
  for (double w : weights_)
    if (!(w >= 0.0)) throw std::invalid_argument("histogram weights must be nonnegative");
}

double JointClickHistogram::total_weight() const {
  return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

std::vector<double> JointClickHistogram::frequencies() const {
  const double t = total_weight();
  if (t <= 0.0) throw std::invalid_argument("cannot normalize an empty histogram");
  std::vector<double> f(weights_);
  for (double& v : f) v /= t;
  return f;
}

void JointClickHistogram::add(const JointClickHistogram& other) {
  for (std::size_t i = 0; i < weights_.size(); ++i) weights_[i] += other.weights_[i];
  events_ += other.events_;
}

double ModeClickHistogram::total_weight() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

std::vector<double> ModeClickHistogram::frequencies() const {
  const double t = total_weight();
  if (t <= 0.0) throw std::invalid_argument("cannot normalize an empty histogram");
  std::vector<double> f(weights);
  for (double& v : f) v /= t;
  return f;
}

ResponseMatrix::ResponseMatrix(Eigen::MatrixXd signal_block, Eigen::MatrixXd idler_block)
    : signal_(std::move(signal_block)), idler_(std::move(idler_block)) {
  if (signal_.rows() != kModePatterns || idler_.rows() != kModePatterns ||
      signal_.cols() != idler_.cols())
    throw std::invalid_argument("response blocks must be 256 x d");
}

Eigen::VectorXd ResponseMatrix::column(int m, int n) const {
  Eigen::VectorXd col(kJointPatterns);
  for (int a = 0; a < kModePatterns; ++a)
    for (int b = 0; b < kModePatterns; ++b) col(a * kModePatterns + b) = signal_(a, m) * idler_(b, n);
  return col;
}

Eigen::MatrixXd mode_click_matrix(const DetectorConfig& cfg, Mode mode, int d) {
  cfg.validate();
  if (d < 1 || d > kModePatterns) throw std::invalid_argument("mode cutoff out of range");
  const auto& q = cfg.bin_probabilities(mode);
  const double eta = cfg.detector_efficiency;
  const double dark = cfg.dark_count_prob;
  const double keep_dark = 1.0 - dark;

  // Inclusion-exclusion over click subsets: P(clicks within T) factorizes as
  // (1 - eta + eta * Q_T)^k times the no-dark product outside T.
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(kModePatterns, d);
  std::array<double, kModePatterns> subset_q{};
  for (int mask = 1; mask < kModePatterns; ++mask) {
    const int low = mask & (-mask);
    const int low_bit = std::countr_zero(static_cast<unsigned>(low));
    subset_q[static_cast<std::size_t>(mask)] = subset_q[static_cast<std::size_t>(mask ^ low)] + q[static_cast<std::size_t>(low_bit)];
  }
  for (int mask = 0; mask < kModePatterns; ++mask) {
    const int bits = std::popcount(static_cast<unsigned>(mask));
    int sub = mask;
    while (true) {
      const int sub_bits = std::popcount(static_cast<unsigned>(sub));
      const double sign = ((bits - sub_bits) % 2 == 0) ? 1.0 : -1.0;
      const double keep = 1.0 - eta + eta * subset_q[static_cast<std::size_t>(sub)];
      const double dark_free = std::pow(keep_dark, kBinsPerMode - sub_bits);
      double keep_pow = 1.0;
      for (int k = 0; k < d; ++k) {
        out(mask, k) += sign * dark_free * keep_pow;
        keep_pow *= keep;
      }
      if (sub == 0) break;
      sub = (sub - 1) & mask;
    }
  }
  return out;
}

namespace detail {

std::vector<double> joint_pattern_probabilities(const JointPhotonDistribution& p,
                                                const DetectorConfig& cfg) {
  if (!cfg.afterpulse_free())
    throw std::runtime_error(
        "exact pattern distribution does not support afterpulsing; use sample_patterns");
  const int d = p.cutoff();
  const Eigen::MatrixXd a = mode_click_matrix(cfg, Mode::Signal, d);
  const Eigen::MatrixXd b = mode_click_matrix(cfg, Mode::Idler, d);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> pm(
      p.probs().data(), d, d);
  const Eigen::MatrixXd joint = a * pm * b.transpose();  // 256 x 256, (alpha, beta)
  std::vector<double> out(kJointPatterns);
  for (int alpha = 0; alpha < kModePatterns; ++alpha)
    for (int beta = 0; beta < kModePatterns; ++beta)
      out[static_cast<std::size_t>(alpha) * kModePatterns + beta] =
          std::max(joint(alpha, beta), 0.0);
  return out;
}

}  // namespace detail

JointClickHistogram exact_pattern_distribution(const JointPhotonDistribution& p,
                                               const DetectorConfig& cfg) {
  if (p.cutoff() > 12) throw std::invalid_argument("exact pattern distribution requires cutoff <= 12");
  return JointClickHistogram(detail::joint_pattern_probabilities(p, cfg), 0);
}

ResponseMatrix build_response_matrix(const DetectorConfig& cfg, int d) {
  if (d < 1 || d > 8) throw std::invalid_argument("response matrix cutoff must be in [1, 8]");
  if (!cfg.afterpulse_free())
    throw std::runtime_error(
        "response matrix does not support afterpulsing; use sample_patterns");
  return ResponseMatrix(mode_click_matrix(cfg, Mode::Signal, d),
                        mode_click_matrix(cfg, Mode::Idler, d));
}

JointClickHistogram sample_patterns(const JointPhotonDistribution& p, const DetectorConfig& cfg,
                                    std::uint64_t n_events, std::uint64_t seed) {
  cfg.validate();
  if (n_events < 1) throw std::invalid_argument("event count must be at least 1");
  const int d = p.cutoff();

  // Cumulative tables for the photon-number and per-mode bin draws.
  const double total = p.total();
  if (total <= 0.0) throw std::invalid_argument("input distribution has no mass");
  std::vector<double> joint_cdf(p.probs().size());
  double acc = 0.0;
  for (std::size_t i = 0; i < joint_cdf.size(); ++i) {
    acc += p.probs()[i] / total;
    joint_cdf[i] = acc;
  }
  joint_cdf.back() = 1.0;
  std::array<std::array<double, kBinsPerMode>, 2> bin_cdf{};
  for (int mode = 0; mode < 2; ++mode) {
    const auto& q = cfg.bin_probabilities(mode == 0 ? Mode::Signal : Mode::Idler);
    double c = 0.0;
    for (int b = 0; b < kBinsPerMode; ++b) {
      c += q[static_cast<std::size_t>(b)];
      bin_cdf[static_cast<std::size_t>(mode)][static_cast<std::size_t>(b)] = c;
    }
    bin_cdf[static_cast<std::size_t>(mode)][kBinsPerMode - 1] = 1.0;
  }

  const double eta = cfg.detector_efficiency;
  const double miss = 1.0 - eta;
  const double keep_dark = 1.0 - cfg.dark_count_prob;
  const double p_ap = cfg.afterpulse.prob;
  const double r_ap = cfg.afterpulse.decay;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> hist(kJointPatterns, 0.0);

  std::array<int, kGateCount> photons{};
  for (std::uint64_t ev = 0; ev < n_events; ++ev) {
    const double u = uni(rng);
    const auto it = std::lower_bound(joint_cdf.begin(), joint_cdf.end(), u);
    const int cell = static_cast<int>(it - joint_cdf.begin());
    const int m = cell / d;
    const int n = cell % d;

    photons.fill(0);
    for (int mode = 0; mode < 2; ++mode) {
      const int count = mode == 0 ? m : n;
      const auto& cdf = bin_cdf[static_cast<std::size_t>(mode)];
      for (int ph = 0; ph < count; ++ph) {
        const double v = uni(rng);
        const int bin = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), v) - cdf.begin());
        ++photons[static_cast<std::size_t>(mode * kBinsPerMode + bin)];
      }
    }

    std::array<int, 2> last_click = {-1, -1};
    std::uint8_t mask_s = 0;
    std::uint8_t mask_i = 0;
    for (int t = 0; t < kGateCount; ++t) {
      const int gate = cfg.gate_time_order[static_cast<std::size_t>(t)];
      const int det = static_cast<int>(cfg.gate_detector[static_cast<std::size_t>(gate)]);
      double p_silent = keep_dark;
      const int k = photons[static_cast<std::size_t>(gate)];
      for (int j = 0; j < k; ++j) p_silent *= miss;
      if (p_ap > 0.0 && last_click[static_cast<std::size_t>(det)] >= 0) {
        const int delta = t - last_click[static_cast<std::size_t>(det)];
        p_silent *= 1.0 - p_ap * std::pow(r_ap, delta - 1);
      }
      bool click = false;
      if (p_silent < 1.0) click = uni(rng) >= p_silent;
      if (click) {
        last_click[static_cast<std::size_t>(det)] = t;
        const int bin = gate % kBinsPerMode;
        if (gate < kBinsPerMode)
          mask_s |= static_cast<std::uint8_t>(1u << bin);
        else
          mask_i |= static_cast<std::uint8_t>(1u << bin);
      }
    }
    hist[static_cast<std::size_t>(ClickPattern{mask_s, mask_i}.joint_index())] += 1.0;
  }
  return JointClickHistogram(std::move(hist), n_events);
}

std::pair<ModeClickHistogram, ModeClickHistogram> marginalize(const JointClickHistogram& h) {
  ModeClickHistogram sig;
  ModeClickHistogram idl;
  sig.events = h.events();
  idl.events = h.events();
  for (int alpha = 0; alpha < kModePatterns; ++alpha) {
    for (int beta = 0; beta < kModePatterns; ++beta) {
      const double w = h[alpha * kModePatterns + beta];
      sig.weights[static_cast<std::size_t>(alpha)] += w;
      idl.weights[static_cast<std::size_t>(beta)] += w;
    }
  }
  return {sig, idl};
}

std::array<double, 9> reduce_to_click_classes(const ModeClickHistogram& h) {
  std::array<double, 9> classes{};
  for (int mask = 0; mask < kModePatterns; ++mask)
    classes[static_cast<std::size_t>(std::popcount(static_cast<unsigned>(mask)))] +=
        h.weights[static_cast<std::size_t>(mask)];
  return classes;
}

}  // namespace tmdtomo
