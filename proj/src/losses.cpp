#include "plsim/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace plsim::losses {
namespace {

double clamp_pred(double p, double eps) {
  if (!(eps > 0.0) || !(eps < 0.5)) throw std::invalid_argument("loss: eps must lie in (0, 0.5)");
  return p < eps ? eps : (p > 1.0 - eps ? 1.0 - eps : p);
}

void check_target(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("loss: target must lie in [0, 1]");
}

}  // namespace

double bce(double pred, double target, double eps) {
  check_target(target);
  const double p = clamp_pred(pred, eps);
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

double focal(double pred, double target, double gamma, double alpha, double eps) {
  check_target(target);
  if (gamma < 0.0) throw std::invalid_argument("focal: gamma must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("focal: alpha must lie in [0, 1]");
  const double p = clamp_pred(pred, eps);
  const double p_t = target * p + (1.0 - target) * (1.0 - p);
  const double alpha_t = target * alpha + (1.0 - target) * (1.0 - alpha);
  return -alpha_t * std::pow(1.0 - p_t, gamma) * std::log(p_t);
}

double smooth_l1(double residual, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("smooth_l1: beta must be > 0");
  const double a = std::abs(residual);
  return a < beta ? 0.5 * a * a / beta : a - 0.5 * beta;
}

double iou_bce(double predicted_iou, double actual_iou, double eps) {
  return bce(predicted_iou, actual_iou, eps);
}

double detection_loss(const DetectionLossTerms& terms, const LossWeights& weights) {
  return terms.cls + weights.alpha_reg * terms.reg + weights.alpha_dir * terms.dir + terms.iou;
}

double overall_loss(double source_loss, double target_loss, const LossWeights& weights) {
  return weights.lambda_src * source_loss + target_loss;
}

}  // namespace plsim::losses
