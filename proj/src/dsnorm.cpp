#include "plsim/dsnorm.hpp"

#include <cmath>
#include <stdexcept>

namespace plsim::dsnorm {

DomainNorm::DomainNorm(std::size_t channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps) {
  if (channels == 0) throw std::invalid_argument("DomainNorm: channels must be > 0");
  if (!(momentum > 0.0 && momentum <= 1.0)) {
    throw std::invalid_argument("DomainNorm: momentum must lie in (0, 1]");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("DomainNorm: eps must be > 0");
  gamma_.assign(channels_, 1.0);
  beta_.assign(channels_, 0.0);
  for (Stats* s : {&source_, &target_}) {
    s->mean.assign(channels_, 0.0);
    s->var.assign(channels_, 1.0);
  }
}

void DomainNorm::set_affine(const std::vector<double>& gamma, const std::vector<double>& beta) {
  if (gamma.size() != channels_ || beta.size() != channels_) {
    throw std::invalid_argument("DomainNorm: affine size mismatch");
  }
  gamma_ = gamma;
  beta_ = beta;
}

namespace {

void check_batch(const std::vector<double>& batch, std::size_t n, std::size_t channels) {
  if (n == 0) throw std::invalid_argument("DomainNorm: empty batch");
  if (batch.size() != n * channels) throw std::invalid_argument("DomainNorm: batch size mismatch");
}

}  // namespace

std::vector<double> DomainNorm::forward_train(const std::vector<double>& batch, std::size_t n,
                                              Domain domain) {
  check_batch(batch, n, channels_);
  std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels_; ++c) mean[c] += batch[i * channels_ + c];
  }
  for (std::size_t c = 0; c < channels_; ++c) mean[c] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels_; ++c) {
      const double d = batch[i * channels_ + c] - mean[c];
      var[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < channels_; ++c) var[c] /= static_cast<double>(n);

  Stats& st = stats(domain);
  if (!st.initialized) {
    st.mean = mean;
    st.var = var;
    st.initialized = true;
  } else {
    for (std::size_t c = 0; c < channels_; ++c) {
      st.mean[c] = (1.0 - momentum_) * st.mean[c] + momentum_ * mean[c];
      st.var[c] = (1.0 - momentum_) * st.var[c] + momentum_ * var[c];
    }
  }

  std::vector<double> out(batch.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels_; ++c) {
      const double xhat = (batch[i * channels_ + c] - mean[c]) / std::sqrt(var[c] + eps_);
      out[i * channels_ + c] = gamma_[c] * xhat + beta_[c];
    }
  }
  return out;
}

std::vector<double> DomainNorm::forward_infer(const std::vector<double>& batch, std::size_t n,
                                              Domain domain) const {
  check_batch(batch, n, channels_);
  const Stats& st = stats(domain);
  if (!st.initialized) {
    throw std::logic_error("DomainNorm: no statistics accumulated for this domain");
  }
  std::vector<double> out(batch.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels_; ++c) {
      const double xhat = (batch[i * channels_ + c] - st.mean[c]) / std::sqrt(st.var[c] + eps_);
      out[i * channels_ + c] = gamma_[c] * xhat + beta_[c];
    }
  }
  return out;
}

bool DomainNorm::has_stats(Domain domain) const { return stats(domain).initialized; }

const std::vector<double>& DomainNorm::running_mean(Domain domain) const {
  return stats(domain).mean;
}

const std::vector<double>& DomainNorm::running_var(Domain domain) const {
  return stats(domain).var;
}

}  // namespace plsim::dsnorm
