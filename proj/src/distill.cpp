#include "vino/distill.hpp"

#include <algorithm>
#include <cmath>

namespace vino {

namespace {
constexpr double kLogEps = 1e-12;

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd z = logits.array() - logits.maxCoeff();
  z = z.array().exp();
  return z / z.sum();
}
}  // namespace

Eigen::VectorXd teacher_distribution(const Eigen::VectorXd& logits, const Eigen::VectorXd& center,
                                     double tau_t) {
  if (logits.size() != center.size()) throw ConfigError("teacher_distribution: size mismatch");
  return softmax((logits - center) / tau_t);
}

Eigen::VectorXd student_distribution(const Eigen::VectorXd& logits, double tau_s) {
  return softmax(logits / tau_s);
}

double cross_entropy(const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
  if (q.size() != p.size()) throw ConfigError("cross_entropy: size mismatch");
  double h = 0;
  for (long i = 0; i < q.size(); ++i) h -= q(i) * std::log(std::max(p(i), kLogEps));
  return h;
}

double entropy(const Eigen::VectorXd& q) { return cross_entropy(q, q); }

TermValue loss_mask(const TeacherDists& teacher, const std::vector<StudentDistEntry>& student) {
  double sum = 0;
  long n = 0;
  for (const auto& s : student) {
    if (s.t < 0 || s.t >= static_cast<int>(teacher.size())) continue;
    for (const auto& q : teacher[static_cast<size_t>(s.t)]) {
      sum += cross_entropy(q, s.p);
      ++n;
    }
  }
  return n ? TermValue{sum / static_cast<double>(n), true} : TermValue{};
}

TermValue loss_temp(const TeacherDists& teacher, const std::vector<StudentDistEntry>& student,
                    const PositivePairSet& pairs) {
  std::map<std::pair<int, int>, const Eigen::VectorXd*> by_tk;
  for (const auto& s : student) by_tk[{s.t, s.k}] = &s.p;
  double sum = 0;
  long n = 0;
  for (const auto& pr : pairs) {
    auto it = by_tk.find({pr.t, pr.k});
    if (it == by_tk.end()) continue;
    if (pr.t_prime < 0 || pr.t_prime >= static_cast<int>(teacher.size())) continue;
    for (const auto& q : teacher[static_cast<size_t>(pr.t_prime)]) {
      sum += cross_entropy(q, *it->second);
      ++n;
    }
  }
  return n ? TermValue{sum / static_cast<double>(n), true} : TermValue{};
}

TermValue loss_local(const std::vector<std::vector<Eigen::VectorXd>>& local_targets,
                     const std::vector<LocalDistEntry>& locals) {
  double sum = 0;
  long n = 0;
  for (const auto& l : locals) {
    if (l.t < 0 || l.t >= static_cast<int>(local_targets.size())) continue;
    for (const auto& q : local_targets[static_cast<size_t>(l.t)]) {
      sum += cross_entropy(q, l.p);
      ++n;
    }
  }
  return n ? TermValue{sum / static_cast<double>(n), true} : TermValue{};
}

PositivePairSet build_positive_set(const std::vector<std::vector<int>>& track_ids,
                                   const std::set<int>& valid_teacher_frames) {
  PositivePairSet out;
  const int T = static_cast<int>(track_ids.size());
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < static_cast<int>(track_ids[static_cast<size_t>(t)].size()); ++k) {
      int id = track_ids[static_cast<size_t>(t)][static_cast<size_t>(k)];
      for (int tp = 0; tp < T; ++tp) {
        if (tp == t || !valid_teacher_frames.count(tp)) continue;
        const auto& ids = track_ids[static_cast<size_t>(tp)];
        if (std::find(ids.begin(), ids.end(), id) != ids.end()) out.push_back({t, k, tp});
      }
    }
  return out;
}

double total_loss(const TermValue& l_local, const TermValue& l_mask, const TermValue& l_temp,
                  double lambda_local, double lambda_mask, double lambda_temp) {
  double total = 0;
  if (l_local.active) total += lambda_local * l_local.value;
  if (l_mask.active) total += lambda_mask * l_mask.value;
  if (l_temp.active) total += lambda_temp * l_temp.value;
  return total;
}

void ema_update(Eigen::VectorXd& teacher, const Eigen::VectorXd& student, double mu) {
  if (teacher.size() != student.size()) throw ConfigError("ema_update: size mismatch");
  teacher = student + mu * (teacher - student);
}

void update_center(Eigen::VectorXd& center, const std::vector<Eigen::VectorXd>& teacher_logits,
                   double rate) {
  if (teacher_logits.empty()) return;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(center.size());
  for (const auto& z : teacher_logits) {
    if (z.size() != center.size()) throw ConfigError("update_center: size mismatch");
    mean += z;
  }
  mean /= static_cast<double>(teacher_logits.size());
  center = rate * center + (1.0 - rate) * mean;
}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                         const ParamLayout& layout, double lr) {
  ++step_count;
  m = cfg.beta1 * m + (1 - cfg.beta1) * grads;
  v = cfg.beta2 * v.array() + (1 - cfg.beta2) * grads.array().square();
  double bc1 = 1 - std::pow(cfg.beta1, static_cast<double>(step_count));
  double bc2 = 1 - std::pow(cfg.beta2, static_cast<double>(step_count));
  params.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
  if (cfg.weight_decay > 0) {
    for (const auto& t : layout.tensors)
      if (t.decay)
        params.segment(t.offset, static_cast<long>(t.rows) * t.cols) *=
            (1.0 - lr * cfg.weight_decay);
  }
}

StepStats train_step(const EncoderConfig& enc, const ParamLayout& layout,
                     Eigen::VectorXd& student, Eigen::VectorXd& teacher, DistillState& state,
                     const std::vector<ViewBatch>& tubes, AdamOptimizer& opt, double lr) {
  if (tubes.empty()) throw ConfigError("train_step: empty batch");

  struct TubeWork {
    TeacherDists teacher_q;                          // suppressed-view targets per frame
    std::vector<std::vector<Eigen::VectorXd>> local_targets;  // per frame
    std::vector<StudentDistEntry> student_dists;
    std::vector<LocalDistEntry> local_dists;
    std::vector<ForwardCache> student_caches, local_caches;
    std::vector<Eigen::VectorXd> student_logits, local_logits;
    PositivePairSet pairs;
  };

  std::vector<TubeWork> work(tubes.size());
  std::vector<Eigen::VectorXd> all_teacher_logits;

  // Phase 1: teacher targets (no gradient path exists for the teacher),
  // student forwards with caches.
  for (size_t b = 0; b < tubes.size(); ++b) {
    const ViewBatch& vb = tubes[b];
    TubeWork& tw = work[b];
    const int T = vb.frames();
    tw.teacher_q.resize(static_cast<size_t>(T));
    tw.local_targets.resize(static_cast<size_t>(T));
    std::set<int> valid_frames;
    for (int t = 0; t < T; ++t) {
      if (!vb.teacher_views[static_cast<size_t>(t)].empty()) {
        valid_frames.insert(t);
        for (const auto& img : vb.teacher_views[static_cast<size_t>(t)]) {
          EncoderOutput out = forward(enc, layout, teacher, img);
          all_teacher_logits.push_back(out.logits);
          Eigen::VectorXd q = teacher_distribution(out.logits, state.center, state.tau_t);
          tw.teacher_q[static_cast<size_t>(t)].push_back(q);
          tw.local_targets[static_cast<size_t>(t)].push_back(std::move(q));
        }
      } else {
        // K_t = 0: the unmasked view anchors the local loss only.
        EncoderOutput out =
            forward(enc, layout, teacher, vb.teacher_full_views[static_cast<size_t>(t)]);
        all_teacher_logits.push_back(out.logits);
        tw.local_targets[static_cast<size_t>(t)].push_back(
            teacher_distribution(out.logits, state.center, state.tau_t));
      }
    }
    tw.pairs = build_positive_set(vb.track_ids, valid_frames);

    for (const auto& sv : vb.student_masked_views) {
      tw.student_caches.emplace_back();
      EncoderOutput out = forward(enc, layout, student, sv.image, &tw.student_caches.back());
      tw.student_logits.push_back(out.logits);
      tw.student_dists.push_back({sv.t, sv.k, student_distribution(out.logits, state.tau_s)});
    }
    for (const auto& lv : vb.local_views) {
      tw.local_caches.emplace_back();
      EncoderOutput out = forward(enc, layout, student, lv.image, &tw.local_caches.back());
      tw.local_logits.push_back(out.logits);
      tw.local_dists.push_back({lv.t, lv.r, student_distribution(out.logits, state.tau_s)});
    }
  }

  // Batch-wide term counts (uniform per-term normalization).
  long n_mask = 0, n_temp = 0, n_local = 0;
  for (const auto& tw : work) {
    for (const auto& s : tw.student_dists)
      n_mask += static_cast<long>(tw.teacher_q[static_cast<size_t>(s.t)].size());
    for (const auto& pr : tw.pairs)
      n_temp += static_cast<long>(tw.teacher_q[static_cast<size_t>(pr.t_prime)].size());
    for (const auto& l : tw.local_dists)
      n_local += static_cast<long>(tw.local_targets[static_cast<size_t>(l.t)].size());
  }

  // Loss values over the whole effective batch.
  StepStats stats;
  stats.num_tubes = static_cast<int>(tubes.size());
  double sum_mask = 0, sum_temp = 0, sum_local = 0;
  for (const auto& tw : work) {
    for (const auto& s : tw.student_dists)
      for (const auto& q : tw.teacher_q[static_cast<size_t>(s.t)]) sum_mask += cross_entropy(q, s.p);
    std::map<std::pair<int, int>, const Eigen::VectorXd*> by_tk;
    for (const auto& s : tw.student_dists) by_tk[{s.t, s.k}] = &s.p;
    for (const auto& pr : tw.pairs)
      for (const auto& q : tw.teacher_q[static_cast<size_t>(pr.t_prime)])
        sum_temp += cross_entropy(q, *by_tk.at({pr.t, pr.k}));
    for (const auto& l : tw.local_dists)
      for (const auto& q : tw.local_targets[static_cast<size_t>(l.t)]) sum_local += cross_entropy(q, l.p);
    stats.num_student_views += static_cast<int>(tw.student_dists.size());
    stats.num_local_views += static_cast<int>(tw.local_dists.size());
  }
  stats.l_mask = n_mask ? TermValue{sum_mask / n_mask, true} : TermValue{};
  stats.l_temp = n_temp ? TermValue{sum_temp / n_temp, true} : TermValue{};
  stats.l_local = n_local ? TermValue{sum_local / n_local, true} : TermValue{};
  stats.total = total_loss(stats.l_local, stats.l_mask, stats.l_temp, state.lambda_local,
                           state.lambda_mask, state.lambda_temp);
  if (!std::isfinite(stats.total)) throw NumericError("train_step: non-finite loss");

  // Phase 2: backward per student view with batch-normalized weights.
  Eigen::VectorXd grads = Eigen::VectorXd::Zero(student.size());
  const double wm = n_mask ? state.lambda_mask / (static_cast<double>(n_mask) * state.tau_s) : 0;
  const double wt = n_temp ? state.lambda_temp / (static_cast<double>(n_temp) * state.tau_s) : 0;
  const double wl = n_local ? state.lambda_local / (static_cast<double>(n_local) * state.tau_s) : 0;

  for (auto& tw : work) {
    // temporal terms grouped per (t,k)
    std::map<std::pair<int, int>, std::vector<int>> temp_anchors;
    for (const auto& pr : tw.pairs) temp_anchors[{pr.t, pr.k}].push_back(pr.t_prime);

    for (size_t i = 0; i < tw.student_dists.size(); ++i) {
      const auto& s = tw.student_dists[i];
      Eigen::VectorXd dz = Eigen::VectorXd::Zero(s.p.size());
      for (const auto& q : tw.teacher_q[static_cast<size_t>(s.t)]) dz += wm * (s.p - q);
      auto it = temp_anchors.find({s.t, s.k});
      if (it != temp_anchors.end())
        for (int tp : it->second)
          for (const auto& q : tw.teacher_q[static_cast<size_t>(tp)]) dz += wt * (s.p - q);
      backward(enc, layout, student, tw.student_caches[i], dz, grads);
    }
    for (size_t i = 0; i < tw.local_dists.size(); ++i) {
      const auto& l = tw.local_dists[i];
      Eigen::VectorXd dz = Eigen::VectorXd::Zero(l.p.size());
      for (const auto& q : tw.local_targets[static_cast<size_t>(l.t)]) dz += wl * (l.p - q);
      backward(enc, layout, student, tw.local_caches[i], dz, grads);
    }
  }

  opt.step(student, grads, layout, lr);
  ema_update(teacher, student, state.mu);
  update_center(state.center, all_teacher_logits, state.center_rate);
  return stats;
}

}  // namespace vino
