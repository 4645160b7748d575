#include "tmdtomo/fock.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tmdtomo {

namespace {

constexpr double kSumSlack = 1e-9;

void check_entries(const std::vector<double>& probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("distribution entries must be nonnegative");
    sum += p;
  }
  if (sum > 1.0 + kSumSlack) throw std::invalid_argument("distribution total exceeds 1");
}

// One column of the binomial loss map: row m of B(m | k) for fixed k.
std::vector<double> binomial_row(int k, double eta) {
  std::vector<double> row(static_cast<std::size_t>(k) + 1);
  if (eta == 0.0) {
    row.assign(row.size(), 0.0);
    row[0] = 1.0;
    return row;
  }
  if (eta == 1.0) {
    row.assign(row.size(), 0.0);
    row[static_cast<std::size_t>(k)] = 1.0;
    return row;
  }
  double v = std::pow(1.0 - eta, k);
  const double ratio = eta / (1.0 - eta);
  for (int m = 0; m <= k; ++m) {
    row[static_cast<std::size_t>(m)] = v;
    v *= ratio * static_cast<double>(k - m) / static_cast<double>(m + 1);
  }
  return row;
}

}  // namespace

PhotonDistribution::PhotonDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("cutoff must be positive");
  check_entries(probs_);
}

PhotonDistribution PhotonDistribution::vacuum(int d) { return delta(0, d); }

PhotonDistribution PhotonDistribution::delta(int n, int d) {
  if (d < 1 || n < 0 || n >= d) throw std::invalid_argument("delta index out of range");
  std::vector<double> p(static_cast<std::size_t>(d), 0.0);
  p[static_cast<std::size_t>(n)] = 1.0;
  return PhotonDistribution(std::move(p));
}

double PhotonDistribution::total() const {
  return std::accumulate(probs_.begin(), probs_.end(), 0.0);
}

PhotonDistribution PhotonDistribution::normalized() const {
  const double t = total();
  if (t <= 0.0) throw std::invalid_argument("cannot normalize a zero distribution");
  std::vector<double> p(probs_);
  for (double& v : p) v /= t;
  return PhotonDistribution(std::move(p));
}

JointPhotonDistribution::JointPhotonDistribution(std::vector<double> probs, int d)
    : probs_(std::move(probs)), d_(d) {
  if (d_ < 1) throw std::invalid_argument("cutoff must be positive");
  if (probs_.size() != static_cast<std::size_t>(d_) * d_)
    throw std::invalid_argument("probability matrix size does not match cutoff");
  check_entries(probs_);
}

JointPhotonDistribution JointPhotonDistribution::vacuum(int d) { return delta(0, 0, d); }

JointPhotonDistribution JointPhotonDistribution::delta(int m, int n, int d) {
  if (d < 1 || m < 0 || n < 0 || m >= d || n >= d)
    throw std::invalid_argument("delta index out of range");
  std::vector<double> p(static_cast<std::size_t>(d) * d, 0.0);
  p[static_cast<std::size_t>(m) * d + n] = 1.0;
  return JointPhotonDistribution(std::move(p), d);
}

double JointPhotonDistribution::total() const {
  return std::accumulate(probs_.begin(), probs_.end(), 0.0);
}

JointPhotonDistribution JointPhotonDistribution::normalized() const {
  const double t = total();
  if (t <= 0.0) throw std::invalid_argument("cannot normalize a zero distribution");
  std::vector<double> p(probs_);
  for (double& v : p) v /= t;
  return JointPhotonDistribution(std::move(p), d_);
}

JointPhotonDistribution JointPhotonDistribution::truncated(int d) const {
  if (d < 1) throw std::invalid_argument("cutoff must be positive");
  if (d >= d_) {
    std::vector<double> p(static_cast<std::size_t>(d) * d, 0.0);
    for (int m = 0; m < d_; ++m)
      for (int n = 0; n < d_; ++n) p[static_cast<std::size_t>(m) * d + n] = (*this)(m, n);
    return JointPhotonDistribution(std::move(p), d);
  }
  std::vector<double> p(static_cast<std::size_t>(d) * d);
  for (int m = 0; m < d; ++m)
    for (int n = 0; n < d; ++n) p[static_cast<std::size_t>(m) * d + n] = (*this)(m, n);
  return JointPhotonDistribution(std::move(p), d);
}

PhotonDistribution JointPhotonDistribution::signal_marginal() const {
  std::vector<double> p(static_cast<std::size_t>(d_), 0.0);
  for (int m = 0; m < d_; ++m)
    for (int n = 0; n < d_; ++n) p[static_cast<std::size_t>(m)] += (*this)(m, n);
  return PhotonDistribution(std::move(p));
}

PhotonDistribution JointPhotonDistribution::idler_marginal() const {
  std::vector<double> p(static_cast<std::size_t>(d_), 0.0);
  for (int m = 0; m < d_; ++m)
    for (int n = 0; n < d_; ++n) p[static_cast<std::size_t>(n)] += (*this)(m, n);
  return PhotonDistribution(std::move(p));
}

LossChannel::LossChannel(double signal, double idler) : eta_signal(signal), eta_idler(idler) {
  if (!(signal >= 0.0 && signal <= 1.0 && idler >= 0.0 && idler <= 1.0))
    throw std::invalid_argument("loss transmission must lie in [0, 1]");
}

JointPhotonDistribution pdc_distribution(double mean_n, int d) {
  if (!(mean_n >= 0.0)) throw std::invalid_argument("mean photon number must be nonnegative");
  if (d < 1) throw std::invalid_argument("cutoff must be positive");
  std::vector<double> p(static_cast<std::size_t>(d) * d, 0.0);
  double w = 1.0 / (1.0 + mean_n);
  const double ratio = mean_n / (1.0 + mean_n);
  for (int n = 0; n < d; ++n) {
    p[static_cast<std::size_t>(n) * d + n] = w;
    w *= ratio;
  }
  return JointPhotonDistribution(std::move(p), d);
}

PhotonDistribution apply_loss(const PhotonDistribution& p, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("loss transmission must lie in [0, 1]");
  const int d = p.cutoff();
  std::vector<double> out(static_cast<std::size_t>(d), 0.0);
  for (int k = 0; k < d; ++k) {
    const double pk = p[k];
    if (pk == 0.0) continue;
    const std::vector<double> row = binomial_row(k, eta);
    for (int m = 0; m <= k; ++m) out[static_cast<std::size_t>(m)] += pk * row[static_cast<std::size_t>(m)];
  }
  return PhotonDistribution(std::move(out));
}

JointPhotonDistribution apply_loss(const JointPhotonDistribution& p, const LossChannel& channel) {
  const int d = p.cutoff();
  // Loss acts independently per mode; apply it axis by axis.
  std::vector<double> mid(static_cast<std::size_t>(d) * d, 0.0);
  for (int k = 0; k < d; ++k) {
    const std::vector<double> row = binomial_row(k, channel.eta_signal);
    for (int n = 0; n < d; ++n) {
      const double v = p(k, n);
      if (v == 0.0) continue;
      for (int m = 0; m <= k; ++m) mid[static_cast<std::size_t>(m) * d + n] += v * row[static_cast<std::size_t>(m)];
    }
  }
  std::vector<double> out(static_cast<std::size_t>(d) * d, 0.0);
  for (int l = 0; l < d; ++l) {
    const std::vector<double> row = binomial_row(l, channel.eta_idler);
    for (int m = 0; m < d; ++m) {
      const double v = mid[static_cast<std::size_t>(m) * d + l];
      if (v == 0.0) continue;
      for (int n = 0; n <= l; ++n) out[static_cast<std::size_t>(m) * d + n] += v * row[static_cast<std::size_t>(n)];
    }
  }
  return JointPhotonDistribution(std::move(out), d);
}

PhotonDistribution poisson_marginal(double mu, int d) {
  if (!(mu >= 0.0)) throw std::invalid_argument("Poisson mean must be nonnegative");
  if (d < 1) throw std::invalid_argument("cutoff must be positive");
  std::vector<double> p(static_cast<std::size_t>(d));
  double v = std::exp(-mu);
  for (int n = 0; n < d; ++n) {
    p[static_cast<std::size_t>(n)] = v;
    v *= mu / static_cast<double>(n + 1);
  }
  return PhotonDistribution(std::move(p));
}

JointPhotonDistribution poisson_product(double mu_signal, double mu_idler, int d) {
  const PhotonDistribution s = poisson_marginal(mu_signal, d);
  const PhotonDistribution i = poisson_marginal(mu_idler, d);
  std::vector<double> p(static_cast<std::size_t>(d) * d);
  for (int m = 0; m < d; ++m)
    for (int n = 0; n < d; ++n) p[static_cast<std::size_t>(m) * d + n] = s[m] * i[n];
  return JointPhotonDistribution(std::move(p), d);
}

double wigner_at_origin(const PhotonDistribution& p) {
  double w = 0.0;
  double sign = 1.0;
  for (int n = 0; n < p.cutoff(); ++n) {
    w += sign * p[n];
    sign = -sign;
  }
  return w;
}

double fidelity(const PhotonDistribution& p, const PhotonDistribution& q) {
  if (p.cutoff() != q.cutoff()) throw std::invalid_argument("fidelity requires matching cutoffs");
  double s = 0.0;
  for (int n = 0; n < p.cutoff(); ++n) s += std::sqrt(p[n] * q[n]);
  return s * s;
}

double fidelity(const JointPhotonDistribution& p, const JointPhotonDistribution& q) {
  if (p.cutoff() != q.cutoff()) throw std::invalid_argument("fidelity requires matching cutoffs");
  double s = 0.0;
  const std::vector<double>& a = p.probs();
  const std::vector<double>& b = q.probs();
  for (std::size_t i = 0; i < a.size(); ++i) s += std::sqrt(a[i] * b[i]);
  return s * s;
}

double mean_photon(const PhotonDistribution& p) {
  double m = 0.0;
  for (int n = 0; n < p.cutoff(); ++n) m += static_cast<double>(n) * p[n];
  return m;
}

int poisson_cutoff(double mu) {
  const int d = static_cast<int>(std::ceil(mu + 12.0 * std::sqrt(std::max(mu, 1.0)) + 12.0));
  return std::max(d, 16);
}

int thermal_cutoff(double mean_n) {
  if (mean_n <= 0.0) return 16;
  const double t = mean_n / (1.0 + mean_n);
  // smallest n with t^n below 1e-13
  const int d = static_cast<int>(std::ceil(-13.0 * std::log(10.0) / std::log(t))) + 2;
  return std::max(d, 16);
}

}  // namespace tmdtomo
