#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <utility>
#include <unordered_map>
#include <vector>

#include "vino/common.hpp"
#include "vino/image.hpp"

namespace vino {

struct EncoderConfig {
  int patch_size = 8;
  int embed_dim = 64;
  int depth = 3;
  int num_heads = 4;
  int mlp_ratio = 4;
  int head_hidden = 128;
  int head_bottleneck = 64;
  int head_output_dim = 256;  // prototype count
  int global_input = 64;      // square input for global views; pos table lives here
  int local_input = 32;
  bool use_pos_embed = true;
  double norm_mean = 0.5;
  double norm_std = 0.25;

  int head_dim() const { return embed_dim / num_heads; }
  int patch_dim() const { return 3 * patch_size * patch_size; }
  int pos_grid() const { return global_input / patch_size; }
  void validate() const;
};

struct TensorSpec {
  std::string name;
  int rows = 0, cols = 0;
  long offset = 0;
  bool decay = false;  // weight decay applies (2-D weights only)
};

// Flat parameter vector with named matrix views. One layout serves the
// student, teacher, optimizer state, and checkpoints.
struct ParamLayout {
  std::vector<TensorSpec> tensors;
  std::unordered_map<std::string, size_t> index;
  long total = 0;

  static ParamLayout build(const EncoderConfig& cfg);

  const TensorSpec& spec(const std::string& name) const;
  Eigen::Map<Eigen::MatrixXd> view(Eigen::VectorXd& p, const std::string& name) const;
  Eigen::Map<const Eigen::MatrixXd> view(const Eigen::VectorXd& p, const std::string& name) const;
};

Eigen::VectorXd init_params(const EncoderConfig& cfg, const ParamLayout& layout, Rng& rng);

struct EncoderOutput {
  Eigen::VectorXd cls_embedding;            // embed_dim
  Eigen::VectorXd logits;                   // head_output_dim
  Eigen::MatrixXd patch_tokens;             // N x embed_dim
  std::vector<Eigen::MatrixXd> last_keys;   // per head, N x head_dim (patch rows)
  Eigen::MatrixXd cls_attention;            // heads x N, each row sums to 1
  int grid_h = 0, grid_w = 0;
};

struct BlockCache {
  Eigen::MatrixXd x_in, xhat1, xn1, qkv, attn_out, x_mid, xhat2, xn2, mlp_pre;
  Eigen::VectorXd istd1, istd2;
  std::vector<Eigen::MatrixXd> attn;  // per head, T x T softmax rows
};

struct ForwardCache {
  Eigen::MatrixXd patches;  // N x patch_dim (normalized pixels)
  std::vector<BlockCache> blocks;
  Eigen::MatrixXd xhat_f;
  Eigen::VectorXd istd_f;
  Eigen::MatrixXd y;  // final tokens
  // head intermediates (row vectors)
  Eigen::RowVectorXd h_a1, h_a2, h_a3, h_xhat;
  double h_norm = 0;
  // positional interpolation (grid -> input grid), empty when identity
  std::vector<std::array<std::pair<int, double>, 4>> pos_interp;
  int grid_h = 0, grid_w = 0;
};

// Row-major non-overlapping patches, (y, x) within patch, RGB interleaved.
Eigen::MatrixXd patchify(const Image& image, int patch_size);

EncoderOutput forward(const EncoderConfig& cfg, const ParamLayout& layout,
                      const Eigen::VectorXd& params, const Image& image,
                      ForwardCache* cache = nullptr);

// Accumulates d(loss)/d(params) into grads, given d(loss)/d(logits).
void backward(const EncoderConfig& cfg, const ParamLayout& layout, const Eigen::VectorXd& params,
              const ForwardCache& cache, const Eigen::VectorXd& dlogits, Eigen::VectorXd& grads);

// Head-averaged class-token attention reshaped to the patch grid.
Eigen::MatrixXd attention_map(const EncoderOutput& out);

}  // namespace vino
