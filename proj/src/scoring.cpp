#include "plsim/scoring.hpp"

#include <stdexcept>

namespace plsim::scoring {
namespace {

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
  }
}

void check_thresholds(const TripletThresholds& t) {
  check_unit(t.t_pos, "t_pos");
  check_unit(t.t_neg, "t_neg");
  if (!(t.t_neg < t.t_pos)) {
    throw std::invalid_argument("triplet thresholds require t_neg < t_pos");
  }
}

}  // namespace

const TripletThresholds& TripletConfig::thresholds_for(int class_id) const {
  auto it = class_thresholds.find(class_id);
  return it == class_thresholds.end() ? thresholds : it->second;
}

double TripletConfig::phi_for(int class_id) const {
  auto it = class_phi.find(class_id);
  return it == class_phi.end() ? phi : it->second;
}

void TripletConfig::validate() const {
  check_thresholds(thresholds);
  check_unit(phi, "phi");
  for (const auto& [id, t] : class_thresholds) check_thresholds(t);
  for (const auto& [id, f] : class_phi) check_unit(f, "phi");
}

double hybrid_score(double p, double u, double phi) {
  check_unit(p, "p");
  check_unit(u, "u");
  check_unit(phi, "phi");
  return phi * p + (1.0 - phi) * u;
}

std::vector<PseudoLabelEntry> triplet_partition(const std::vector<Detection>& detections,
                                                const TripletConfig& config) {
  config.validate();
  std::vector<PseudoLabelEntry> out;
  out.reserve(detections.size());
  for (const Detection& d : detections) {
    const double u = d.u.value_or(d.p);
    const double o = hybrid_score(d.p, u, config.phi_for(d.class_id));
    const TripletThresholds& t = config.thresholds_for(d.class_id);
    if (o >= t.t_pos) {
      out.push_back({d.box, d.class_id, o, BoxState::Positive, 0});
    } else if (!config.single_threshold && o >= t.t_neg) {
      out.push_back({d.box, d.class_id, o, BoxState::Ignored, 0});
    }
  }
  return out;
}

}  // namespace plsim::scoring
