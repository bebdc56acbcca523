#pragma once

#include <string>
#include <vector>

#include "plsim/common.hpp"
#include "plsim/geom.hpp"

namespace plsim {

struct GtObject {
  geom::OrientedBox box;
  int class_id = 0;
};

struct Scene {
  std::string scene_id;
  Domain domain = Domain::Source;
  std::vector<geom::Point3> points;
  std::vector<GtObject> gt;
};

}  // namespace plsim
