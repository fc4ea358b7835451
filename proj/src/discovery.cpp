#include "vino/discovery.hpp"

#include <algorithm>
#include <climits>
#include <deque>
#include <iostream>

namespace vino {

int PatchGraph::degree(int i) const {
  int d = 0;
  for (int j = 0; j < n(); ++j)
    if (adjacent(i, j)) ++d;
  return d;
}

PatchGraph build_patch_graph(const Eigen::MatrixXd& keys) {
  if (keys.rows() < 1) throw ConfigError("build_patch_graph: empty keys");
  Eigen::MatrixXd norm = keys;
  bool warned = false;
  for (long i = 0; i < norm.rows(); ++i) {
    double n = norm.row(i).norm();
    if (n > 0) {
      norm.row(i) /= n;
    } else if (!warned) {
      std::cerr << "warning: zero-norm key row " << i << ", treated as isolated\n";
      warned = true;
    }
  }
  PatchGraph g;
  g.similarity = norm * norm.transpose();
  return g;
}

int select_seed(const PatchGraph& graph) {
  const int n = graph.n();
  // Sum off-diagonal entries directly: subtracting the (inexactly 1.0)
  // diagonal can break exact ties between symmetric rows.
  auto offdiag_sum = [&](int i) {
    double s = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) s += graph.similarity(i, j);
    return s;
  };
  int best = 0;
  int best_deg = graph.degree(0);
  double best_sum = offdiag_sum(0);
  for (int i = 1; i < n; ++i) {
    int d = graph.degree(i);
    double s = offdiag_sum(i);
    if (d < best_deg || (d == best_deg && s < best_sum)) {
      best = i;
      best_deg = d;
      best_sum = s;
    }
  }
  return best;
}

std::set<int> expand_seed(const PatchGraph& graph, int seed) {
  if (seed < 0 || seed >= graph.n()) throw ConfigError("expand_seed: invalid seed");
  std::set<int> candidates{seed};
  for (int j = 0; j < graph.n(); ++j)
    if (graph.adjacent(seed, j)) candidates.insert(j);
  // BFS within the candidate-induced adjacency from the seed.
  std::set<int> out{seed};
  std::deque<int> queue{seed};
  while (!queue.empty()) {
    int i = queue.front();
    queue.pop_front();
    for (int j : candidates)
      if (!out.count(j) && graph.adjacent(i, j)) {
        out.insert(j);
        queue.push_back(j);
      }
  }
  return out;
}

std::set<int> spatial_component(const std::set<int>& members, int seed, int grid_w) {
  if (grid_w < 1) throw ConfigError("spatial_component: bad grid width");
  if (!members.count(seed)) throw ConfigError("spatial_component: seed not in member set");
  std::set<int> out{seed};
  std::deque<int> queue{seed};
  while (!queue.empty()) {
    int i = queue.front();
    queue.pop_front();
    int c = i % grid_w;
    const int neighbors[4] = {i - grid_w, i + grid_w, c > 0 ? i - 1 : -1,
                              c + 1 < grid_w ? i + 1 : -1};
    for (int j : neighbors)
      if (j >= 0 && members.count(j) && !out.count(j)) {
        out.insert(j);
        queue.push_back(j);
      }
  }
  return out;
}

DetectionBox box_from_patches(const std::set<int>& members, int patch_size, int grid_w,
                              int image_h, int image_w) {
  if (members.empty()) throw ConfigError("box_from_patches: empty member set");
  int r0 = INT_MAX, c0 = INT_MAX, r1 = -1, c1 = -1;
  for (int m : members) {
    int r = m / grid_w, c = m % grid_w;
    r0 = std::min(r0, r);
    c0 = std::min(c0, c);
    r1 = std::max(r1, r);
    c1 = std::max(c1, c);
  }
  DetectionBox box;
  box.members = members;
  box.rect = {c0 * patch_size, r0 * patch_size,
              std::min((c1 + 1) * patch_size, image_w) - c0 * patch_size,
              std::min((r1 + 1) * patch_size, image_h) - r0 * patch_size};
  return box;
}

double iou(const Rect& a, const Rect& b) {
  if (a.area() <= 0 || b.area() <= 0) throw ConfigError("iou: zero-area rect");
  long ix = std::max(0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  long iy = std::max(0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  long inter = ix * iy;
  long uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

CorLocResult corloc(const std::vector<Rect>& predictions,
                    const std::vector<std::vector<Rect>>& ground_truth) {
  if (predictions.size() != ground_truth.size())
    throw ConfigError("corloc: prediction/ground-truth count mismatch");
  CorLocResult res;
  for (size_t i = 0; i < predictions.size(); ++i) {
    if (ground_truth[i].empty()) {
      ++res.skipped;
      continue;
    }
    ++res.evaluated;
    for (const Rect& gt : ground_truth[i])
      if (iou(predictions[i], gt) >= 0.5) {
        ++res.correct;
        break;
      }
  }
  if (res.evaluated == 0) throw DataError("corloc: no evaluable images");
  res.percent = 100.0 * res.correct / res.evaluated;
  return res;
}

}  // namespace vino
