#include "vino/encoder.hpp"

#include <cmath>

namespace vino {

namespace {
constexpr double kLnEps = 1e-6;
constexpr double kNormEps = 1e-8;
constexpr double kSqrt2Pi = 2.5066282746310002;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }
double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * std::exp(-0.5 * x * x) / kSqrt2Pi;
}
}  // namespace

void EncoderConfig::validate() const {
  if (embed_dim % num_heads != 0) throw ConfigError("encoder: embed_dim not divisible by heads");
  if (global_input % patch_size != 0 || local_input % patch_size != 0)
    throw ConfigError("encoder: input size not divisible by patch_size");
  if (depth < 1 || head_output_dim < 2) throw ConfigError("encoder: bad depth/head dims");
}

ParamLayout ParamLayout::build(const EncoderConfig& cfg) {
  ParamLayout lay;
  auto add = [&](const std::string& name, int rows, int cols, bool decay) {
    lay.index[name] = lay.tensors.size();
    lay.tensors.push_back({name, rows, cols, lay.total, decay});
    lay.total += static_cast<long>(rows) * cols;
  };
  const int d = cfg.embed_dim, g = cfg.pos_grid();
  add("cls_token", 1, d, false);
  add("patch_w", cfg.patch_dim(), d, true);
  add("patch_b", 1, d, false);
  add("pos_cls", 1, d, false);
  add("pos_grid", g * g, d, false);
  for (int i = 0; i < cfg.depth; ++i) {
    std::string p = "blk" + std::to_string(i) + ".";
    add(p + "ln1_g", 1, d, false);
    add(p + "ln1_b", 1, d, false);
    add(p + "qkv_w", d, 3 * d, true);
    add(p + "qkv_b", 1, 3 * d, false);
    add(p + "proj_w", d, d, true);
    add(p + "proj_b", 1, d, false);
    add(p + "ln2_g", 1, d, false);
    add(p + "ln2_b", 1, d, false);
    add(p + "fc1_w", d, cfg.mlp_ratio * d, true);
    add(p + "fc1_b", 1, cfg.mlp_ratio * d, false);
    add(p + "fc2_w", cfg.mlp_ratio * d, d, true);
    add(p + "fc2_b", 1, d, false);
  }
  add("ln_f_g", 1, d, false);
  add("ln_f_b", 1, d, false);
  add("head.w1", d, cfg.head_hidden, true);
  add("head.b1", 1, cfg.head_hidden, false);
  add("head.w2", cfg.head_hidden, cfg.head_hidden, true);
  add("head.b2", 1, cfg.head_hidden, false);
  add("head.w3", cfg.head_hidden, cfg.head_bottleneck, true);
  add("head.b3", 1, cfg.head_bottleneck, false);
  add("head.proto", cfg.head_bottleneck, cfg.head_output_dim, true);
  return lay;
}

const TensorSpec& ParamLayout::spec(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) throw ConfigError("unknown tensor: " + name);
  return tensors[it->second];
}

Eigen::Map<Eigen::MatrixXd> ParamLayout::view(Eigen::VectorXd& p, const std::string& name) const {
  const TensorSpec& s = spec(name);
  return {p.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::MatrixXd> ParamLayout::view(const Eigen::VectorXd& p,
                                                    const std::string& name) const {
  const TensorSpec& s = spec(name);
  return {p.data() + s.offset, s.rows, s.cols};
}

Eigen::VectorXd init_params(const EncoderConfig& cfg, const ParamLayout& layout, Rng& rng) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(layout.total);
  for (const auto& t : layout.tensors) {
    auto m = Eigen::Map<Eigen::MatrixXd>(p.data() + t.offset, t.rows, t.cols);
    if (t.name.ends_with("ln1_g") || t.name.ends_with("ln2_g") || t.name == "ln_f_g") {
      m.setOnes();
    } else if (t.decay || t.name == "cls_token" || t.name.starts_with("pos_")) {
      for (long i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, 0.02);
    }
    // biases and ln shifts stay zero
  }
  return p;
}

Eigen::MatrixXd patchify(const Image& image, int patch_size) {
  if (image.h % patch_size != 0 || image.w % patch_size != 0)
    throw ConfigError("patchify: image size not divisible by patch_size");
  const int gh = image.h / patch_size, gw = image.w / patch_size;
  Eigen::MatrixXd out(gh * gw, 3 * patch_size * patch_size);
  for (int pr = 0; pr < gh; ++pr)
    for (int pc = 0; pc < gw; ++pc) {
      int row = pr * gw + pc;
      int col = 0;
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x)
          for (int c = 0; c < 3; ++c)
            out(row, col++) = image.at(pr * patch_size + y, pc * patch_size + x, c);
    }
  return out;
}

namespace {

// LayerNorm over rows: y = xhat .* g + b
void layernorm_fwd(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& g,
                   const Eigen::RowVectorXd& b, Eigen::MatrixXd& xhat, Eigen::VectorXd& istd,
                   Eigen::MatrixXd& y) {
  const long T = x.rows(), D = x.cols();
  xhat.resize(T, D);
  istd.resize(T);
  y.resize(T, D);
  for (long i = 0; i < T; ++i) {
    double mu = x.row(i).mean();
    double var = (x.row(i).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + kLnEps);
    istd(i) = is;
    xhat.row(i) = (x.row(i).array() - mu) * is;
    y.row(i) = xhat.row(i).cwiseProduct(g) + b;
  }
}

// dY -> dX, accumulating dg/db.
Eigen::MatrixXd layernorm_bwd(const Eigen::MatrixXd& dy, const Eigen::MatrixXd& xhat,
                              const Eigen::VectorXd& istd, const Eigen::RowVectorXd& g,
                              Eigen::Map<Eigen::MatrixXd> dg, Eigen::Map<Eigen::MatrixXd> db) {
  const long T = dy.rows(), D = dy.cols();
  dg += (dy.cwiseProduct(xhat)).colwise().sum();
  db += dy.colwise().sum();
  Eigen::MatrixXd dx(T, D);
  for (long i = 0; i < T; ++i) {
    Eigen::RowVectorXd dxh = dy.row(i).cwiseProduct(g);
    double m1 = dxh.mean();
    double m2 = dxh.cwiseProduct(xhat.row(i)).mean();
    dx.row(i) = istd(i) * (dxh.array() - m1 - xhat.row(i).array() * m2);
  }
  return dx;
}

std::vector<std::array<std::pair<int, double>, 4>> pos_interp_weights(int gh, int gw, int g0) {
  // Bilinear, align-corners, from the g0 x g0 stored grid to gh x gw.
  std::vector<std::array<std::pair<int, double>, 4>> out;
  out.reserve(static_cast<size_t>(gh) * gw);
  auto coord = [&](int i, int n) {
    if (n <= 1) return (g0 - 1) / 2.0;
    return static_cast<double>(i) * (g0 - 1) / (n - 1);
  };
  for (int i = 0; i < gh; ++i) {
    double fy = coord(i, gh);
    int y0 = std::min(static_cast<int>(std::floor(fy)), g0 - 1);
    int y1 = std::min(y0 + 1, g0 - 1);
    double wy = fy - y0;
    for (int j = 0; j < gw; ++j) {
      double fx = coord(j, gw);
      int x0 = std::min(static_cast<int>(std::floor(fx)), g0 - 1);
      int x1 = std::min(x0 + 1, g0 - 1);
      double wx = fx - x0;
      out.push_back({std::pair{y0 * g0 + x0, (1 - wy) * (1 - wx)},
                     std::pair{y0 * g0 + x1, (1 - wy) * wx},
                     std::pair{y1 * g0 + x0, wy * (1 - wx)},
                     std::pair{y1 * g0 + x1, wy * wx}});
    }
  }
  return out;
}

}  // namespace

EncoderOutput forward(const EncoderConfig& cfg, const ParamLayout& layout,
                      const Eigen::VectorXd& params, const Image& image, ForwardCache* cache) {
  cfg.validate();
  if (image.h % cfg.patch_size != 0 || image.w % cfg.patch_size != 0)
    throw ConfigError("forward: image size not divisible by patch_size");
  const int gh = image.h / cfg.patch_size, gw = image.w / cfg.patch_size;
  const int N = gh * gw, T = N + 1, D = cfg.embed_dim, H = cfg.num_heads, dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // Normalize pixels, then patchify.
  Image norm = image;
  for (auto& v : norm.px)
    v = static_cast<float>((v - cfg.norm_mean) / cfg.norm_std);
  Eigen::MatrixXd P = patchify(norm, cfg.patch_size);

  ForwardCache local_cache;
  ForwardCache& cc = cache ? *cache : local_cache;
  cc.grid_h = gh;
  cc.grid_w = gw;
  cc.patches = P;
  cc.blocks.assign(static_cast<size_t>(cfg.depth), {});

  Eigen::MatrixXd X(T, D);
  X.row(0) = layout.view(params, "cls_token");
  X.bottomRows(N) = P * layout.view(params, "patch_w");
  X.bottomRows(N).rowwise() += Eigen::RowVectorXd(layout.view(params, "patch_b"));

  cc.pos_interp.clear();
  if (cfg.use_pos_embed) {
    X.row(0) += layout.view(params, "pos_cls");
    auto pos = layout.view(params, "pos_grid");
    const int g0 = cfg.pos_grid();
    if (gh == g0 && gw == g0) {
      X.bottomRows(N) += pos;
    } else {
      cc.pos_interp = pos_interp_weights(gh, gw, g0);
      for (int i = 0; i < N; ++i)
        for (const auto& [idx, w] : cc.pos_interp[static_cast<size_t>(i)])
          X.row(1 + i) += w * pos.row(idx);
    }
  }

  EncoderOutput out;
  for (int b = 0; b < cfg.depth; ++b) {
    BlockCache& bc = cc.blocks[static_cast<size_t>(b)];
    const std::string p = "blk" + std::to_string(b) + ".";
    bc.x_in = X;
    Eigen::RowVectorXd g1 = layout.view(params, p + "ln1_g");
    Eigen::RowVectorXd b1 = layout.view(params, p + "ln1_b");
    layernorm_fwd(bc.x_in, g1, b1, bc.xhat1, bc.istd1, bc.xn1);

    bc.qkv = bc.xn1 * layout.view(params, p + "qkv_w");
    bc.qkv.rowwise() += Eigen::RowVectorXd(layout.view(params, p + "qkv_b"));

    bc.attn.assign(static_cast<size_t>(H), {});
    bc.attn_out.resize(T, D);
    for (int h = 0; h < H; ++h) {
      auto Q = bc.qkv.block(0, h * dh, T, dh);
      auto K = bc.qkv.block(0, D + h * dh, T, dh);
      auto V = bc.qkv.block(0, 2 * D + h * dh, T, dh);
      Eigen::MatrixXd S = scale * (Q * K.transpose());
      for (long i = 0; i < T; ++i) {
        double mx = S.row(i).maxCoeff();
        S.row(i) = (S.row(i).array() - mx).exp();
        S.row(i) /= S.row(i).sum();
      }
      bc.attn[static_cast<size_t>(h)] = S;
      bc.attn_out.block(0, h * dh, T, dh) = S * V;
    }
    Eigen::MatrixXd proj = bc.attn_out * layout.view(params, p + "proj_w");
    proj.rowwise() += Eigen::RowVectorXd(layout.view(params, p + "proj_b"));
    bc.x_mid = bc.x_in + proj;

    Eigen::RowVectorXd g2 = layout.view(params, p + "ln2_g");
    Eigen::RowVectorXd b2 = layout.view(params, p + "ln2_b");
    layernorm_fwd(bc.x_mid, g2, b2, bc.xhat2, bc.istd2, bc.xn2);
    bc.mlp_pre = bc.xn2 * layout.view(params, p + "fc1_w");
    bc.mlp_pre.rowwise() += Eigen::RowVectorXd(layout.view(params, p + "fc1_b"));
    Eigen::MatrixXd act = bc.mlp_pre.unaryExpr([](double v) { return gelu(v); });
    Eigen::MatrixXd mlp = act * layout.view(params, p + "fc2_w");
    mlp.rowwise() += Eigen::RowVectorXd(layout.view(params, p + "fc2_b"));
    X = bc.x_mid + mlp;

    if (b == cfg.depth - 1) {
      out.last_keys.clear();
      out.cls_attention.resize(H, N);
      for (int h = 0; h < H; ++h) {
        out.last_keys.push_back(bc.qkv.block(1, D + h * dh, N, dh));
        Eigen::RowVectorXd row = bc.attn[static_cast<size_t>(h)].row(0).segment(1, N);
        double s = row.sum();
        out.cls_attention.row(h) = s > 0 ? Eigen::RowVectorXd(row / s) : row;
      }
    }
  }

  Eigen::RowVectorXd gf = layout.view(params, "ln_f_g");
  Eigen::RowVectorXd bf = layout.view(params, "ln_f_b");
  layernorm_fwd(X, gf, bf, cc.xhat_f, cc.istd_f, cc.y);

  out.grid_h = gh;
  out.grid_w = gw;
  out.cls_embedding = cc.y.row(0).transpose();
  out.patch_tokens = cc.y.bottomRows(N);

  // projection head
  Eigen::RowVectorXd e = cc.y.row(0);
  cc.h_a1 = e * layout.view(params, "head.w1") + Eigen::RowVectorXd(layout.view(params, "head.b1"));
  Eigen::RowVectorXd hg1 = cc.h_a1.unaryExpr([](double v) { return gelu(v); });
  cc.h_a2 = hg1 * layout.view(params, "head.w2") + Eigen::RowVectorXd(layout.view(params, "head.b2"));
  Eigen::RowVectorXd hg2 = cc.h_a2.unaryExpr([](double v) { return gelu(v); });
  cc.h_a3 = hg2 * layout.view(params, "head.w3") + Eigen::RowVectorXd(layout.view(params, "head.b3"));
  cc.h_norm = std::max(cc.h_a3.norm(), kNormEps);
  cc.h_xhat = cc.h_a3 / cc.h_norm;

  auto proto = layout.view(params, "head.proto");
  out.logits.resize(cfg.head_output_dim);
  for (int j = 0; j < cfg.head_output_dim; ++j) {
    double n = std::max(proto.col(j).norm(), kNormEps);
    out.logits(j) = cc.h_xhat.dot(proto.col(j)) / n;
  }
  return out;
}

void backward(const EncoderConfig& cfg, const ParamLayout& layout, const Eigen::VectorXd& params,
              const ForwardCache& cc, const Eigen::VectorXd& dlogits, Eigen::VectorXd& grads) {
  const int N = cc.grid_h * cc.grid_w, T = N + 1, D = cfg.embed_dim, H = cfg.num_heads;
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (grads.size() != params.size()) throw ConfigError("backward: grads size mismatch");

  auto gv = [&](const std::string& name) { return layout.view(grads, name); };

  // head
  auto proto = layout.view(params, "head.proto");
  auto dproto = gv("head.proto");
  Eigen::RowVectorXd dxhat = Eigen::RowVectorXd::Zero(cfg.head_bottleneck);
  for (int j = 0; j < cfg.head_output_dim; ++j) {
    double n = std::max(proto.col(j).norm(), kNormEps);
    Eigen::VectorXd wn = proto.col(j) / n;
    double z = cc.h_xhat.dot(wn);
    dxhat += dlogits(j) * wn.transpose();
    dproto.col(j) += dlogits(j) * (cc.h_xhat.transpose() - z * wn) / n;
  }
  Eigen::RowVectorXd da3 = (dxhat - cc.h_xhat * dxhat.dot(cc.h_xhat)) / cc.h_norm;

  Eigen::RowVectorXd hg2 = cc.h_a2.unaryExpr([](double v) { return gelu(v); });
  Eigen::RowVectorXd hg1 = cc.h_a1.unaryExpr([](double v) { return gelu(v); });
  gv("head.w3") += hg2.transpose() * da3;
  gv("head.b3") += da3;
  Eigen::RowVectorXd dg2v = da3 * layout.view(params, "head.w3").transpose();
  Eigen::RowVectorXd da2 =
      dg2v.cwiseProduct(cc.h_a2.unaryExpr([](double v) { return gelu_grad(v); }));
  gv("head.w2") += hg1.transpose() * da2;
  gv("head.b2") += da2;
  Eigen::RowVectorXd dg1v = da2 * layout.view(params, "head.w2").transpose();
  Eigen::RowVectorXd da1 =
      dg1v.cwiseProduct(cc.h_a1.unaryExpr([](double v) { return gelu_grad(v); }));
  gv("head.w1") += cc.y.row(0).transpose() * da1;
  gv("head.b1") += da1;
  Eigen::RowVectorXd de = da1 * layout.view(params, "head.w1").transpose();

  // final layernorm (only the cls row carries gradient)
  Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(T, D);
  dy.row(0) = de;
  Eigen::RowVectorXd gf = layout.view(params, "ln_f_g");
  Eigen::MatrixXd dX = layernorm_bwd(dy, cc.xhat_f, cc.istd_f, gf, gv("ln_f_g"), gv("ln_f_b"));

  for (int b = cfg.depth - 1; b >= 0; --b) {
    const BlockCache& bc = cc.blocks[static_cast<size_t>(b)];
    const std::string p = "blk" + std::to_string(b) + ".";

    // MLP branch
    Eigen::MatrixXd act = bc.mlp_pre.unaryExpr([](double v) { return gelu(v); });
    gv(p + "fc2_w") += act.transpose() * dX;
    gv(p + "fc2_b") += dX.colwise().sum();
    Eigen::MatrixXd dact = dX * layout.view(params, p + "fc2_w").transpose();
    Eigen::MatrixXd dpre =
        dact.cwiseProduct(bc.mlp_pre.unaryExpr([](double v) { return gelu_grad(v); }));
    gv(p + "fc1_w") += bc.xn2.transpose() * dpre;
    gv(p + "fc1_b") += dpre.colwise().sum();
    Eigen::MatrixXd dxn2 = dpre * layout.view(params, p + "fc1_w").transpose();
    Eigen::RowVectorXd g2 = layout.view(params, p + "ln2_g");
    Eigen::MatrixXd dx_mid =
        dX + layernorm_bwd(dxn2, bc.xhat2, bc.istd2, g2, gv(p + "ln2_g"), gv(p + "ln2_b"));

    // attention branch
    gv(p + "proj_w") += bc.attn_out.transpose() * dx_mid;
    gv(p + "proj_b") += dx_mid.colwise().sum();
    Eigen::MatrixXd dO = dx_mid * layout.view(params, p + "proj_w").transpose();
    Eigen::MatrixXd dqkv = Eigen::MatrixXd::Zero(T, 3 * D);
    for (int h = 0; h < H; ++h) {
      const Eigen::MatrixXd& A = bc.attn[static_cast<size_t>(h)];
      auto Q = bc.qkv.block(0, h * dh, T, dh);
      auto K = bc.qkv.block(0, D + h * dh, T, dh);
      auto V = bc.qkv.block(0, 2 * D + h * dh, T, dh);
      auto dOh = dO.block(0, h * dh, T, dh);
      Eigen::MatrixXd dA = dOh * V.transpose();
      dqkv.block(0, 2 * D + h * dh, T, dh) = A.transpose() * dOh;
      // softmax jacobian, rowwise
      Eigen::MatrixXd dS = A.cwiseProduct(dA);
      for (long i = 0; i < T; ++i) {
        double s = dS.row(i).sum();
        dS.row(i) -= s * A.row(i);
      }
      dqkv.block(0, h * dh, T, dh) = scale * (dS * K);
      dqkv.block(0, D + h * dh, T, dh) = scale * (dS.transpose() * Q);
    }
    gv(p + "qkv_w") += bc.xn1.transpose() * dqkv;
    gv(p + "qkv_b") += dqkv.colwise().sum();
    Eigen::MatrixXd dxn1 = dqkv * layout.view(params, p + "qkv_w").transpose();
    Eigen::RowVectorXd g1 = layout.view(params, p + "ln1_g");
    dX = dx_mid + layernorm_bwd(dxn1, bc.xhat1, bc.istd1, g1, gv(p + "ln1_g"), gv(p + "ln1_b"));
  }

  gv("cls_token") += dX.row(0);
  gv("patch_w") += cc.patches.transpose() * dX.bottomRows(N);
  gv("patch_b") += dX.bottomRows(N).colwise().sum();
  if (cfg.use_pos_embed) {
    gv("pos_cls") += dX.row(0);
    auto dpos = gv("pos_grid");
    if (cc.pos_interp.empty()) {
      dpos += dX.bottomRows(N);
    } else {
      for (int i = 0; i < N; ++i)
        for (const auto& [idx, w] : cc.pos_interp[static_cast<size_t>(i)])
          dpos.row(idx) += w * dX.row(1 + i);
    }
  }
}

Eigen::MatrixXd attention_map(const EncoderOutput& out) {
  Eigen::RowVectorXd avg = out.cls_attention.colwise().mean();
  Eigen::MatrixXd grid(out.grid_h, out.grid_w);
  for (int i = 0; i < out.grid_h; ++i)
    for (int j = 0; j < out.grid_w; ++j) grid(i, j) = avg(i * out.grid_w + j);
  return grid;
}

}  // namespace vino
