#pragma once

#include <cstddef>
#include <vector>

#include "plsim/common.hpp"

namespace plsim::dsnorm {

// Domain-specific feature normalization: per-domain running estimates of
// channel mean/variance, one shared affine transform. Training batches must
// be single-domain; inference normalizes with the accumulated statistics of
// the batch's own domain.
class DomainNorm {
 public:
  // momentum in (0, 1]: weight of the current batch in the running update.
  DomainNorm(std::size_t channels, double momentum = 0.1, double eps = 1e-5);

  std::size_t channels() const { return channels_; }

  // Normalize with batch statistics and update the running estimates for
  // `domain`. batch is row-major [n x channels], n >= 1.
  std::vector<double> forward_train(const std::vector<double>& batch, std::size_t n,
                                    Domain domain);

  // Normalize with the running estimates for `domain` (no state change).
  // Throws std::logic_error if that domain has never been trained on.
  std::vector<double> forward_infer(const std::vector<double>& batch, std::size_t n,
                                    Domain domain) const;

  // Shared affine parameters (identity by default).
  void set_affine(const std::vector<double>& gamma, const std::vector<double>& beta);

  bool has_stats(Domain domain) const;
  const std::vector<double>& running_mean(Domain domain) const;
  const std::vector<double>& running_var(Domain domain) const;

 private:
  struct Stats {
    std::vector<double> mean, var;
    bool initialized = false;
  };

  Stats& stats(Domain d) { return d == Domain::Source ? source_ : target_; }
  const Stats& stats(Domain d) const { return d == Domain::Source ? source_ : target_; }

  std::size_t channels_;
  double momentum_;
  double eps_;
  Stats source_, target_;
  std::vector<double> gamma_, beta_;
};

}  // namespace plsim::dsnorm
