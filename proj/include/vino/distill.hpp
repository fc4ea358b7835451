#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "vino/encoder.hpp"
#include "vino/viewgen.hpp"

namespace vino {

struct DistillState {
  Eigen::VectorXd center;  // running center c, head_output_dim
  double tau_s = 0.1;
  double tau_t = 0.04;
  double mu = 0.996;       // EMA momentum
  double lambda_local = 1.0;
  double lambda_mask = 0.5;
  double lambda_temp = 0.5;
  double center_rate = 0.9;
};

// Loss term that can be inactive (no valid pairs) — distinguished from a
// true zero.
struct TermValue {
  double value = 0.0;
  bool active = false;
};

struct PositiveTriple {
  int t = 0, k = 0, t_prime = 0;
  auto operator<=>(const PositiveTriple&) const = default;
};
using PositivePairSet = std::vector<PositiveTriple>;

Eigen::VectorXd teacher_distribution(const Eigen::VectorXd& logits, const Eigen::VectorXd& center,
                                     double tau_t);
Eigen::VectorXd student_distribution(const Eigen::VectorXd& logits, double tau_s);
double cross_entropy(const Eigen::VectorXd& q, const Eigen::VectorXd& p);
double entropy(const Eigen::VectorXd& q);

// teacher_dists[t] holds the (possibly several) global targets of frame t;
// empty vector means K_t = 0.
using TeacherDists = std::vector<std::vector<Eigen::VectorXd>>;

struct StudentDistEntry {
  int t = 0, k = 0;
  Eigen::VectorXd p;
};
struct LocalDistEntry {
  int t = 0, r = 0;
  Eigen::VectorXd p;
};

TermValue loss_mask(const TeacherDists& teacher, const std::vector<StudentDistEntry>& student);
TermValue loss_temp(const TeacherDists& teacher, const std::vector<StudentDistEntry>& student,
                    const PositivePairSet& pairs);
// local_targets[t]: one target per frame (teacher global or the unmasked
// fallback when K_t = 0).
TermValue loss_local(const std::vector<std::vector<Eigen::VectorXd>>& local_targets,
                     const std::vector<LocalDistEntry>& locals);

PositivePairSet build_positive_set(const std::vector<std::vector<int>>& track_ids,
                                   const std::set<int>& valid_teacher_frames);

double total_loss(const TermValue& l_local, const TermValue& l_mask, const TermValue& l_temp,
                  double lambda_local, double lambda_mask, double lambda_temp);

void ema_update(Eigen::VectorXd& teacher, const Eigen::VectorXd& student, double mu);
void update_center(Eigen::VectorXd& center, const std::vector<Eigen::VectorXd>& teacher_logits,
                   double rate);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // applied to 2-D weights only
};

struct AdamOptimizer {
  AdamConfig cfg;
  Eigen::VectorXd m, v;
  long step_count = 0;

  explicit AdamOptimizer(long n, AdamConfig c = {})
      : cfg(c), m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, const ParamLayout& layout,
            double lr);
};

struct StepStats {
  TermValue l_local, l_mask, l_temp;
  double total = 0.0;
  int num_tubes = 0;
  int num_student_views = 0;
  int num_local_views = 0;
};

// One optimizer step over an effective batch of tubes: teacher forward
// (no gradients) on suppressed globals, student forward/backward on
// masked and local views, Adam update, EMA update, center update.
StepStats train_step(const EncoderConfig& enc, const ParamLayout& layout,
                     Eigen::VectorXd& student, Eigen::VectorXd& teacher, DistillState& state,
                     const std::vector<ViewBatch>& tubes, AdamOptimizer& opt, double lr);

}  // namespace vino
