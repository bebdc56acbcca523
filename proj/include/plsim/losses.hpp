#pragma once

namespace plsim::losses {

// Binary cross-entropy with the prediction clamped to [eps, 1 - eps] so a
// saturated prediction yields a large finite loss instead of inf.
double bce(double pred, double target, double eps = 1e-7);

// Focal loss for one binary prediction: FL = -alpha_t (1 - p_t)^gamma log(p_t).
double focal(double pred, double target, double gamma = 2.0, double alpha = 0.25,
             double eps = 1e-7);

// Huber-style regression loss, quadratic inside |r| < beta, linear outside.
double smooth_l1(double residual, double beta = 1.0);

// Quality-estimation target: BCE between the predicted IoU and the realized
// IoU of the (box, assigned ground truth) pair.
double iou_bce(double predicted_iou, double actual_iou, double eps = 1e-7);

struct LossWeights {
  double alpha_reg = 2.0;   // box regression
  double alpha_dir = 0.2;   // direction classification
  double lambda_src = 1.0;  // source term in the joint objective
};

struct DetectionLossTerms {
  double cls = 0.0;
  double reg = 0.0;
  double dir = 0.0;
  double iou = 0.0;
};

// cls + alpha_reg * reg + alpha_dir * dir + iou.
double detection_loss(const DetectionLossTerms& terms, const LossWeights& weights);

// lambda_src * source + target.
double overall_loss(double source_loss, double target_loss, const LossWeights& weights);

}  // namespace plsim::losses
