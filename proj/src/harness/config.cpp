#include "vino/harness/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace vino {

namespace {

using FieldRef = std::variant<int*, long*, double*, bool*, float*, uint64_t*>;

// Enumerates every configurable field with its dotted name.
void visit_fields(ExperimentConfig& c, const std::function<void(const char*, FieldRef)>& f) {
  f("run.steps", &c.steps);
  f("run.micro_batch", &c.micro_batch);
  f("run.grad_accum", &c.grad_accum);
  f("run.seed", &c.seed);
  f("run.ckpt_every", &c.ckpt_every);

  f("optim.lr", &c.optim.lr);
  f("optim.beta1", &c.optim.beta1);
  f("optim.beta2", &c.optim.beta2);
  f("optim.eps", &c.optim.eps);
  f("optim.weight_decay", &c.optim.weight_decay);
  f("optim.cosine_decay", &c.cosine_decay);
  f("optim.min_lr", &c.min_lr);

  f("data.tube_len", &c.tube_len);
  f("data.stride", &c.stride);
  f("data.min_area_frac", &c.filter.min_area_frac);
  f("data.min_confidence", &c.filter.min_confidence);
  f("data.max_objects", &c.filter.max_objects);

  f("views.global_size", &c.views.global_size);
  f("views.local_size", &c.views.local_size);
  f("views.locals_per_frame", &c.views.locals_per_frame);
  f("views.globals_per_frame", &c.views.globals_per_frame);
  f("views.global_scale_lo", &c.views.global_scale_lo);
  f("views.global_scale_hi", &c.views.global_scale_hi);
  f("views.hflip_prob", &c.views.hflip_prob);
  f("views.local_area_lo", &c.views.local_area_lo);
  f("views.local_area_hi", &c.views.local_area_hi);
  f("views.local_alpha", &c.views.local_alpha);
  f("views.bbox_pad", &c.views.bbox_pad);
  f("views.precrop_min_frac", &c.views.precrop_min_frac);
  f("views.whole_local_scale_lo", &c.views.whole_local_scale_lo);
  f("views.whole_local_scale_hi", &c.views.whole_local_scale_hi);
  f("views.fill_value", &c.views.fill_value);
  f("views.photo.jitter_prob", &c.views.photo.jitter_prob);
  f("views.photo.jitter_strength", &c.views.photo.jitter_strength);
  f("views.photo.blur_prob", &c.views.photo.blur_prob);
  f("views.photo.blur_sigma_lo", &c.views.photo.blur_sigma_lo);
  f("views.photo.blur_sigma_hi", &c.views.photo.blur_sigma_hi);
  f("views.photo.solarize_prob", &c.views.photo.solarize_prob);
  f("views.photo.solarize_threshold", &c.views.photo.solarize_threshold);

  f("encoder.patch_size", &c.encoder.patch_size);
  f("encoder.embed_dim", &c.encoder.embed_dim);
  f("encoder.depth", &c.encoder.depth);
  f("encoder.num_heads", &c.encoder.num_heads);
  f("encoder.mlp_ratio", &c.encoder.mlp_ratio);
  f("encoder.head_hidden", &c.encoder.head_hidden);
  f("encoder.head_bottleneck", &c.encoder.head_bottleneck);
  f("encoder.head_output_dim", &c.encoder.head_output_dim);
  f("encoder.global_input", &c.encoder.global_input);
  f("encoder.local_input", &c.encoder.local_input);
  f("encoder.use_pos_embed", &c.encoder.use_pos_embed);
  f("encoder.norm_mean", &c.encoder.norm_mean);
  f("encoder.norm_std", &c.encoder.norm_std);

  f("distill.tau_s", &c.tau_s);
  f("distill.tau_t", &c.tau_t);
  f("distill.mu", &c.mu);
  f("distill.lambda_local", &c.lambda_local);
  f("distill.lambda_mask", &c.lambda_mask);
  f("distill.lambda_temp", &c.lambda_temp);
  f("distill.center_rate", &c.center_rate);

  f("synth.num_sprites", &c.synth.num_sprites);
  f("synth.sprite_min_size", &c.synth.sprite_min_size);
  f("synth.sprite_max_size", &c.synth.sprite_max_size);
  f("synth.frame_h", &c.synth.frame_h);
  f("synth.frame_w", &c.synth.frame_w);
  f("synth.background_density", &c.synth.background_density);
  f("synth.background_block", &c.synth.background_block);
  f("synth.ego_velocity_x", &c.synth.ego_velocity_x);
  f("synth.ego_velocity_y", &c.synth.ego_velocity_y);
  f("synth.sprite_velocity", &c.synth.sprite_velocity);
  f("synth.num_frames", &c.synth.num_frames);
  f("synth.seed", &c.synth.seed);
}

std::string field_to_string(const FieldRef& ref) {
  std::ostringstream os;
  os.precision(17);
  std::visit([&](auto* p) {
    using T = std::remove_pointer_t<decltype(p)>;
    if constexpr (std::is_same_v<T, bool>)
      os << (*p ? "true" : "false");
    else
      os << *p;
  }, ref);
  return os.str();
}

void field_from_string(const FieldRef& ref, const std::string& key, const std::string& val) {
  std::visit([&](auto* p) {
    using T = std::remove_pointer_t<decltype(p)>;
    if constexpr (std::is_same_v<T, bool>) {
      if (val == "true" || val == "1")
        *p = true;
      else if (val == "false" || val == "0")
        *p = false;
      else
        throw ConfigError("config: bad boolean for " + key + ": " + val);
    } else {
      std::istringstream is(val);
      T v{};
      if (!(is >> v) || !is.eof())
        throw ConfigError("config: bad value for " + key + ": " + val);
      *p = v;
    }
  }, ref);
}

}  // namespace

DistillState ExperimentConfig::make_distill_state() const {
  DistillState s;
  s.center = Eigen::VectorXd::Zero(encoder.head_output_dim);
  s.tau_s = tau_s;
  s.tau_t = tau_t;
  s.mu = mu;
  s.lambda_local = lambda_local;
  s.lambda_mask = lambda_mask;
  s.lambda_temp = lambda_temp;
  s.center_rate = center_rate;
  return s;
}

void ExperimentConfig::validate() const {
  encoder.validate();
  if (views.global_size != encoder.global_input || views.local_size != encoder.local_input)
    throw ConfigError("config: views.global/local_size must match encoder input sizes");
  if (tau_s <= 0 || tau_t <= 0) throw ConfigError("config: temperatures must be positive");
  if (mu < 0 || mu > 1) throw ConfigError("config: mu must be in [0,1]");
  if (lambda_local < 0 || lambda_mask < 0 || lambda_temp < 0)
    throw ConfigError("config: loss weights must be non-negative");
  if (steps < 0 || micro_batch < 1 || grad_accum < 1)
    throw ConfigError("config: bad run parameters");
  if (tube_len < 1 || stride < 1) throw ConfigError("config: bad tube parameters");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::map<std::string, FieldRef> fields;
  visit_fields(cfg, [&](const char* name, FieldRef ref) { fields.emplace(name, ref); });

  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: missing '=' on line " + std::to_string(lineno));
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    auto it = fields.find(key);
    if (it == fields.end())
      throw ConfigError("config: unknown key '" + key + "' on line " + std::to_string(lineno));
    try {
      field_from_string(it->second, key, val);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
    }
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  // visit_fields needs a mutable reference; values are only read.
  auto& mut = const_cast<ExperimentConfig&>(cfg);
  visit_fields(mut, [&](const char* name, FieldRef ref) {
    os << name << " = " << field_to_string(ref) << "\n";
  });
  return os.str();
}

uint64_t config_hash(const ExperimentConfig& cfg) {
  std::string s = dump_config(cfg);
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace vino
