#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "vino/distill.hpp"
#include "vino/encoder.hpp"

using namespace vino;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.patch_size = 4;
  c.embed_dim = 16;
  c.depth = 1;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  c.head_hidden = 16;
  c.head_bottleneck = 8;
  c.head_output_dim = 16;
  c.global_input = 8;
  c.local_input = 8;
  return c;
}

Image random_image(int h, int w, Rng& rng) {
  Image img(h, w);
  for (auto& p : img.px) p = static_cast<float>(rng.uniform());
  return img;
}

}  // namespace

TEST_CASE("patchify layout and round trip") {
  Rng rng(1);
  Image img = random_image(32, 32, rng);
  Eigen::MatrixXd p = patchify(img, 16);
  CHECK(p.rows() == 4);
  CHECK(p.cols() == 3 * 16 * 16);

  // constant image: all rows identical
  Image flat = Image::filled(32, 32, 0.3f, 0.5f, 0.7f);
  Eigen::MatrixXd pf = patchify(flat, 16);
  for (int r = 1; r < pf.rows(); ++r) CHECK((pf.row(r) - pf.row(0)).norm() == 0.0);

  // reassemble and compare to the original
  Image back(32, 32);
  int grid = 2;
  for (int pr = 0; pr < grid; ++pr)
    for (int pc = 0; pc < grid; ++pc) {
      const auto row = p.row(pr * grid + pc);
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
          for (int c = 0; c < 3; ++c)
            back.at(pr * 16 + y, pc * 16 + x, c) =
                static_cast<float>(row((y * 16 + x) * 3 + c));
    }
  for (size_t i = 0; i < img.px.size(); ++i)
    CHECK(back.px[i] == doctest::Approx(img.px[i]).epsilon(1e-6));

  CHECK_THROWS_AS(patchify(img, 5), ConfigError);
}

TEST_CASE("forward shapes, determinism, attention normalization") {
  EncoderConfig cfg;  // defaults: 64x64 global input
  cfg.validate();
  ParamLayout layout = ParamLayout::build(cfg);
  Rng rng(7);
  Eigen::VectorXd params = init_params(cfg, layout, rng);
  Image img = random_image(64, 64, rng);

  EncoderOutput a = forward(cfg, layout, params, img);
  EncoderOutput b = forward(cfg, layout, params, img);
  CHECK((a.logits - b.logits).norm() == 0.0);
  CHECK((a.cls_embedding - b.cls_embedding).norm() == 0.0);

  int n = (64 / cfg.patch_size) * (64 / cfg.patch_size);
  CHECK(a.logits.size() == cfg.head_output_dim);
  CHECK(a.cls_embedding.size() == cfg.embed_dim);
  CHECK(a.patch_tokens.rows() == n);
  CHECK(a.patch_tokens.cols() == cfg.embed_dim);
  REQUIRE(static_cast<int>(a.last_keys.size()) == cfg.num_heads);
  for (auto& k : a.last_keys) {
    CHECK(k.rows() == n);
    CHECK(k.cols() == cfg.head_dim());
  }
  REQUIRE(a.cls_attention.rows() == cfg.num_heads);
  REQUIRE(a.cls_attention.cols() == n);
  for (int h = 0; h < cfg.num_heads; ++h) {
    CHECK(a.cls_attention.row(h).sum() == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(a.cls_attention.row(h).minCoeff() >= 0.0);
  }

  // local input works through the same parameters (interpolated positions)
  Image small = random_image(32, 32, rng);
  EncoderOutput s = forward(cfg, layout, params, small);
  CHECK(s.patch_tokens.rows() == (32 / cfg.patch_size) * (32 / cfg.patch_size));
}

TEST_CASE("attention_map matches cls_attention layout") {
  EncoderConfig cfg = tiny_config();
  ParamLayout layout = ParamLayout::build(cfg);
  Rng rng(11);
  Eigen::VectorXd params = init_params(cfg, layout, rng);
  EncoderOutput out = forward(cfg, layout, params, random_image(8, 8, rng));

  Eigen::MatrixXd grid = attention_map(out);
  REQUIRE(grid.rows() == out.grid_h);
  REQUIRE(grid.cols() == out.grid_w);
  CHECK(grid.sum() == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(grid.minCoeff() >= 0.0);
  for (int r = 0; r < grid.rows(); ++r)
    for (int c = 0; c < grid.cols(); ++c)
      CHECK(grid(r, c) ==
            doctest::Approx(out.cls_attention.col(r * grid.cols() + c).mean()).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences") {
  EncoderConfig cfg = tiny_config();
  ParamLayout layout = ParamLayout::build(cfg);
  REQUIRE(layout.total <= 5000);

  Rng rng(3);
  Eigen::VectorXd params = init_params(cfg, layout, rng);
  Image img = random_image(8, 8, rng);

  // fixed target distribution; loss = H(q, p) with p the student softmax
  Eigen::VectorXd q(cfg.head_output_dim);
  for (int i = 0; i < q.size(); ++i) q(i) = rng.uniform(0.1, 1.0);
  q /= q.sum();
  const double tau = 0.1;

  auto loss_at = [&](const Eigen::VectorXd& p) {
    EncoderOutput out = forward(cfg, layout, p, img);
    return cross_entropy(q, student_distribution(out.logits, tau));
  };

  ForwardCache cache;
  EncoderOutput out = forward(cfg, layout, params, img, &cache);
  Eigen::VectorXd pdist = student_distribution(out.logits, tau);
  Eigen::VectorXd dlogits = (pdist - q) / tau;
  Eigen::VectorXd grads = Eigen::VectorXd::Zero(layout.total);
  backward(cfg, layout, params, cache, dlogits, grads);

  const double h = 1e-5;
  int checked = 0;
  Rng pick(17);
  for (int trial = 0; trial < 60; ++trial) {
    long i = static_cast<long>(pick.uniform_int(0, static_cast<int>(layout.total) - 1));
    Eigen::VectorXd pp = params, pm = params;
    pp(i) += h;
    pm(i) -= h;
    double fd = (loss_at(pp) - loss_at(pm)) / (2 * h);
    double an = grads(i);
    double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
    if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;  // dead coordinate
    CHECK(std::abs(fd - an) / denom <= 1e-4);
    ++checked;
  }
  CHECK(checked >= 50);
}

TEST_CASE("patch permutation without positional embeddings permutes tokens") {
  EncoderConfig cfg = tiny_config();
  cfg.use_pos_embed = false;
  ParamLayout layout = ParamLayout::build(cfg);
  Rng rng(5);
  Eigen::VectorXd params = init_params(cfg, layout, rng);

  Image img = random_image(8, 8, rng);
  // swap patch (0,0) with patch (1,1) — patches are 4x4
  Image swapped = img;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) {
        swapped.at(y, x, c) = img.at(y + 4, x + 4, c);
        swapped.at(y + 4, x + 4, c) = img.at(y, x, c);
      }

  EncoderOutput a = forward(cfg, layout, params, img);
  EncoderOutput b = forward(cfg, layout, params, swapped);
  // patches 0 and 3 trade places; 1 and 2 stay put
  CHECK((a.patch_tokens.row(0) - b.patch_tokens.row(3)).norm() < 1e-10);
  CHECK((a.patch_tokens.row(3) - b.patch_tokens.row(0)).norm() < 1e-10);
  CHECK((a.patch_tokens.row(1) - b.patch_tokens.row(1)).norm() < 1e-10);
  CHECK((a.logits - b.logits).norm() < 1e-10);  // cls output is set-invariant

  // with positional embeddings the same swap must change the cls logits
  EncoderConfig cfg_pos = tiny_config();
  ParamLayout layout_pos = ParamLayout::build(cfg_pos);
  Rng rng2(5);
  Eigen::VectorXd params_pos = init_params(cfg_pos, layout_pos, rng2);
  EncoderOutput ap = forward(cfg_pos, layout_pos, params_pos, img);
  EncoderOutput bp = forward(cfg_pos, layout_pos, params_pos, swapped);
  CHECK((ap.logits - bp.logits).norm() > 1e-10);
}

TEST_CASE("config validation") {
  EncoderConfig bad;
  bad.embed_dim = 30;  // not divisible by heads=4
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  EncoderConfig bad2;
  bad2.global_input = 60;  // not divisible by patch 8
  CHECK_THROWS_AS(bad2.validate(), ConfigError);
}
