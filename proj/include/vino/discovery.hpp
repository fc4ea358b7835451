#pragma once

#include <Eigen/Dense>
#include <set>
#include <vector>

#include "vino/common.hpp"
#include "vino/maskops.hpp"

namespace vino {

// Similarity graph over last-layer keys; adjacency is strictly positive
// similarity, diagonal treated as self-adjacent and excluded from degrees.
struct PatchGraph {
  Eigen::MatrixXd similarity;  // N x N, dot products of L2-normalized keys
  int n() const { return static_cast<int>(similarity.rows()); }
  bool adjacent(int i, int j) const { return i != j && similarity(i, j) > 0; }
  int degree(int i) const;
};

struct DetectionBox {
  Rect rect;                 // pixel coordinates
  int seed = 0;              // seed patch index
  std::set<int> members;     // member patch indices
};

// keys: N x D (heads concatenated). Zero-norm rows become isolated.
PatchGraph build_patch_graph(const Eigen::MatrixXd& keys);

// Lowest-degree patch; ties broken by lowest similarity-sum, then index.
int select_seed(const PatchGraph& graph);

// Patches positively correlated with the seed, restricted to the seed's
// connected component in the induced adjacency; always contains the seed.
std::set<int> expand_seed(const PatchGraph& graph, int seed);

// 4-connected patch-grid component of the seed within the member set; the
// detection box is drawn around this spatial component so that isolated
// far-away members do not inflate it.
std::set<int> spatial_component(const std::set<int>& members, int seed, int grid_w);

DetectionBox box_from_patches(const std::set<int>& members, int patch_size, int grid_w,
                              int image_h, int image_w);

double iou(const Rect& a, const Rect& b);

struct CorLocResult {
  double percent = 0.0;
  int evaluated = 0;  // images with ground truth
  int skipped = 0;    // images without ground truth (excluded)
  int correct = 0;
};

CorLocResult corloc(const std::vector<Rect>& predictions,
                    const std::vector<std::vector<Rect>>& ground_truth);

}  // namespace vino
