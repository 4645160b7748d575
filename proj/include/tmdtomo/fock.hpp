#pragma once

#include <vector>

namespace tmdtomo {

// Single-mode photon-number distribution truncated at a cutoff d.
// Entries are nonnegative; the total may fall short of 1 by a truncation
// tail, but may never exceed 1 (beyond roundoff).
class PhotonDistribution {
 public:
  explicit PhotonDistribution(std::vector<double> probs);
  static PhotonDistribution vacuum(int d);
  static PhotonDistribution delta(int n, int d);

  int cutoff() const { return static_cast<int>(probs_.size()); }
  double operator[](int n) const { return probs_[static_cast<std::size_t>(n)]; }
  const std::vector<double>& probs() const { return probs_; }
  double total() const;
  PhotonDistribution normalized() const;

 private:
  std::vector<double> probs_;
};

// Two-mode photon-number distribution on a d x d truncation.
// Index order is (m = signal photons, n = idler photons), row-major.
class JointPhotonDistribution {
 public:
  JointPhotonDistribution(std::vector<double> probs, int d);
  static JointPhotonDistribution vacuum(int d);
  static JointPhotonDistribution delta(int m, int n, int d);

  int cutoff() const { return d_; }
  double operator()(int m, int n) const {
    return probs_[static_cast<std::size_t>(m) * d_ + n];
  }
  const std::vector<double>& probs() const { return probs_; }
  double total() const;
  JointPhotonDistribution normalized() const;
  JointPhotonDistribution truncated(int d) const;
  PhotonDistribution signal_marginal() const;
  PhotonDistribution idler_marginal() const;

 private:
  std::vector<double> probs_;
  int d_;
};

// Independent Bernoulli loss per mode, transmission eta in [0, 1].
struct LossChannel {
  double eta_signal;
  double eta_idler;
  LossChannel(double signal, double idler);
  explicit LossChannel(double eta) : LossChannel(eta, eta) {}
};

// Thermal twin-beam distribution: perfectly correlated photon numbers with
// geometric weights of mean mean_n per mode, truncated at d.
JointPhotonDistribution pdc_distribution(double mean_n, int d);

// Binomial loss acting independently on each mode. Mass only moves toward
// lower photon numbers, so the truncation box is preserved exactly.
JointPhotonDistribution apply_loss(const JointPhotonDistribution& p, const LossChannel& channel);
PhotonDistribution apply_loss(const PhotonDistribution& p, double eta);

// Product of Poisson number distributions with means (mu_signal, mu_idler).
JointPhotonDistribution poisson_product(double mu_signal, double mu_idler, int d);
PhotonDistribution poisson_marginal(double mu, int d);

// Photon-number parity, scaled so vacuum -> +1 and one photon -> -1.
double wigner_at_origin(const PhotonDistribution& p);

// Bhattacharyya fidelity (sum_i sqrt(p_i q_i))^2; 1 iff p == q.
double fidelity(const PhotonDistribution& p, const PhotonDistribution& q);
double fidelity(const JointPhotonDistribution& p, const JointPhotonDistribution& q);

double mean_photon(const PhotonDistribution& p);

// Smallest cutoff holding a Poisson (resp. thermal) tail below ~1e-12.
int poisson_cutoff(double mu);
int thermal_cutoff(double mean_n);

}  // namespace tmdtomo
