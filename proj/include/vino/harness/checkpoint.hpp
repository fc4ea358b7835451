#pragma once

#include <Eigen/Dense>
#include <string>

#include "vino/distill.hpp"

namespace vino {

struct Checkpoint {
  uint64_t config_hash = 0;
  long step = 0;
  long tube_counter = 0;
  Eigen::VectorXd student, teacher;
  Eigen::VectorXd center;
  Eigen::VectorXd adam_m, adam_v;
  long adam_steps = 0;
  std::string rng_state;
};

// Binary container, bit-exact round trip (doubles stored raw).
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace vino
