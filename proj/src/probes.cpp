#include "tmdtomo/probes.hpp"

#include <cmath>
#include <iostream>
#include <set>
#include <stdexcept>
#include <utility>

#include "tmdtomo/rng.hpp"
#include "tmdtomo/stats.hpp"

namespace tmdtomo {

namespace {
constexpr double kPlanck = 6.62607015e-34;       // J s
constexpr double kSpeedOfLight = 2.99792458e8;   // m / s
}  // namespace

double calibrated_mean_photon(const AttenuationChain& chain) {
  if (!(chain.measured_power_w >= 0.0)) throw std::invalid_argument("measured power must be nonnegative");
  if (!(chain.repetition_rate_hz > 0.0)) throw std::invalid_argument("repetition rate must be positive");
  if (!(chain.wavelength_m > 0.0)) throw std::invalid_argument("wavelength must be positive");
  double transmission = 1.0;
  for (double t : chain.transmittances) {
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("transmittances must lie in (0, 1]");
    transmission *= t;
  }
  const double energy_per_pulse = chain.measured_power_w / chain.repetition_rate_hz;
  const double photon_energy = kPlanck * kSpeedOfLight / chain.wavelength_m;
  return energy_per_pulse * transmission / photon_energy;
}

std::vector<CoherentProbe> generate_probe_grid(double alpha_max, int signal_count, int idler_count,
                                               GridSpacing spacing, double mu_min) {
  if (!(alpha_max > 0.0)) throw std::invalid_argument("alpha_max must be positive");
  if (signal_count < 1 || idler_count < 1) throw std::invalid_argument("grid sizes must be positive");
  const double mu_max = alpha_max * alpha_max;

  auto axis = [&](int count) {
    std::vector<double> mu;
    mu.reserve(static_cast<std::size_t>(count));
    if (count == 1) {
      mu.push_back(0.0);
      return mu;
    }
    mu.push_back(0.0);
    if (spacing == GridSpacing::Linear) {
      for (int i = 1; i < count; ++i)
        mu.push_back(mu_max * static_cast<double>(i) / static_cast<double>(count - 1));
    } else {
      const double lo = std::log(mu_min);
      const double hi = std::log(mu_max);
      for (int i = 1; i < count; ++i)
        mu.push_back(std::exp(lo + (hi - lo) * static_cast<double>(i - 1) /
                                       std::max(1, count - 2)));
    }
    return mu;
  };

  const std::vector<double> mu_s = axis(signal_count);
  const std::vector<double> mu_i = axis(idler_count);
  std::vector<CoherentProbe> probes;
  probes.reserve(mu_s.size() * mu_i.size());
  int id = 0;
  for (double s : mu_s)
    for (double i : mu_i) probes.push_back(CoherentProbe{id++, s, i, 0.0});
  return probes;
}

PatternLibrary::PatternLibrary(std::vector<CoherentProbe> probes,
                               std::vector<JointClickHistogram> responses)
    : probes_(std::move(probes)), responses_(std::move(responses)) {
  if (probes_.empty()) throw std::invalid_argument("pattern library cannot be empty");
  if (probes_.size() != responses_.size())
    throw std::invalid_argument("each probe needs exactly one response histogram");
  std::set<int> ids;
  std::set<std::pair<double, double>> intensities;
  for (const CoherentProbe& p : probes_) {
    if (!(p.mu_signal >= 0.0 && p.mu_idler >= 0.0))
      throw std::invalid_argument("probe intensities must be nonnegative");
    if (!ids.insert(p.id).second) throw std::invalid_argument("probe ids must be unique");
    if (!intensities.insert({p.mu_signal, p.mu_idler}).second)
      throw std::invalid_argument("duplicate probe intensities");
  }
}

Eigen::VectorXd PatternLibrary::fock_singular_values(int d) const {
  Eigen::MatrixXd fock(size(), d * d);
  for (int i = 0; i < size(); ++i) {
    const JointPhotonDistribution p =
        poisson_product(probes_[static_cast<std::size_t>(i)].mu_signal,
                        probes_[static_cast<std::size_t>(i)].mu_idler, d)
            .normalized();
    for (int j = 0; j < d * d; ++j) fock(i, j) = p.probs()[static_cast<std::size_t>(j)];
  }
  return fock.jacobiSvd().singularValues();
}

EfficiencyEstimate estimate_efficiency(const PatternLibrary& library) {
  double sxx = 0.0;
  double sxy = 0.0;
  std::vector<std::pair<double, double>> points;
  int nonzero_mu = 0;
  std::set<double> distinct_mu;
  for (int i = 0; i < library.size(); ++i) {
    const CoherentProbe& probe = library.probe(i);
    const double mu_total = probe.mu_signal + probe.mu_idler;
    const double f0 = library.response(i).frequencies()[0];
    if (f0 <= 0.0) {
      std::cerr << "estimate_efficiency: probe " << probe.id
                << " has zero no-click frequency, skipping\n";
      continue;
    }
    if (mu_total > 0.0) {
      ++nonzero_mu;
      distinct_mu.insert(mu_total);
    }
    const double y = -std::log(f0);
    sxx += mu_total * mu_total;
    sxy += mu_total * y;
    points.emplace_back(mu_total, y);
  }
  if (nonzero_mu < 2 || distinct_mu.size() < 2)
    throw std::runtime_error("efficiency estimate needs at least two distinct nonzero intensities");

  const double eta = sxy / sxx;
  double rss = 0.0;
  for (const auto& [x, y] : points) {
    const double e = y - eta * x;
    rss += e * e;
  }
  const int n = static_cast<int>(points.size());
  const double variance = n > 1 ? rss / static_cast<double>(n - 1) : 0.0;
  return EfficiencyEstimate{eta, std::sqrt(variance / sxx), n};
}

JointClickHistogram simulate_probe_response(const CoherentProbe& probe, const DetectorConfig& cfg,
                                            std::uint64_t n_events, std::uint64_t seed,
                                            double mu_scale) {
  if (!(mu_scale > 0.0)) throw std::invalid_argument("intensity scale must be positive");
  const double mu_s = probe.mu_signal * mu_scale;
  const double mu_i = probe.mu_idler * mu_scale;
  const int d_sim = std::max(poisson_cutoff(mu_s), poisson_cutoff(mu_i));

  if (!cfg.afterpulse_free()) {
    return sample_patterns(poisson_product(mu_s, mu_i, d_sim), cfg, n_events, seed);
  }

  // Product input, no afterpulse: the joint response is the product of the
  // per-mode responses, so counts follow a two-stage multinomial.
  const Eigen::MatrixXd a = mode_click_matrix(cfg, Mode::Signal, d_sim);
  const Eigen::MatrixXd b = mode_click_matrix(cfg, Mode::Idler, d_sim);
  Eigen::Map<const Eigen::VectorXd> ps(poisson_marginal(mu_s, d_sim).probs().data(), d_sim);
  Eigen::Map<const Eigen::VectorXd> pi(poisson_marginal(mu_i, d_sim).probs().data(), d_sim);
  Eigen::VectorXd fs = a * ps;
  Eigen::VectorXd fi = b * pi;
  fs /= fs.sum();
  fi /= fi.sum();

  std::vector<double> prob_s(fs.data(), fs.data() + kModePatterns);
  std::vector<double> prob_i(fi.data(), fi.data() + kModePatterns);
  const std::vector<std::uint64_t> counts_s =
      multinomial_sample(prob_s, n_events, sub_seed(seed, 0));
  std::vector<double> hist(kJointPatterns, 0.0);
  for (int alpha = 0; alpha < kModePatterns; ++alpha) {
    const std::uint64_t n_alpha = counts_s[static_cast<std::size_t>(alpha)];
    if (n_alpha == 0) continue;
    const std::vector<std::uint64_t> row =
        multinomial_sample(prob_i, n_alpha, sub_seed(seed, 1 + static_cast<std::uint64_t>(alpha)));
    for (int beta = 0; beta < kModePatterns; ++beta)
      hist[static_cast<std::size_t>(alpha) * kModePatterns + beta] += static_cast<double>(row[static_cast<std::size_t>(beta)]);
  }
  return JointClickHistogram(std::move(hist), n_events);
}

PatternLibrary simulate_probe_library(const std::vector<CoherentProbe>& probes,
                                      const DetectorConfig& cfg, std::uint64_t events_per_probe,
                                      std::uint64_t seed, double mu_scale) {
  std::vector<JointClickHistogram> responses;
  responses.reserve(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i)
    responses.push_back(simulate_probe_response(
        probes[i], cfg, events_per_probe, sub_seed(seed, 0x70726f6265ULL + i), mu_scale));
  return PatternLibrary(probes, std::move(responses));
}

}  // namespace tmdtomo
