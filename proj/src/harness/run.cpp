#include "vino/harness/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"
#include "vino/viewgen.hpp"

namespace fs = std::filesystem;

namespace vino {

bool deterministic_mode() {
  const char* v = std::getenv("VINO_DETERMINISTIC");
  return v && std::string(v) == "1";
}

void run_synth_gen(const ExperimentConfig& cfg, const std::string& out_dir) {
  Video video = generate_synthetic_video(cfg.synth);
  write_video_dir(out_dir, video);
  std::ofstream boxes(fs::path(out_dir) / "boxes.txt");
  for (size_t t = 0; t < video.frames.size(); ++t) {
    char id[32];
    std::snprintf(id, sizeof id, "frame_%05zu", t);
    for (const auto& inst : video.annotations[t]) {
      if (inst.grid.empty_mask()) continue;
      Rect b = bbox_of_mask(inst.grid);
      boxes << id << " " << b.x << " " << b.y << " " << b.w << " " << b.h << "\n";
    }
  }
}

namespace {

std::vector<Video> load_corpus(const std::string& data_dir) {
  std::vector<Video> corpus;
  if (fs::exists(fs::path(data_dir) / "annotations.vinomsk") ||
      !fs::is_directory(data_dir)) {
    corpus.push_back(load_video_dir(data_dir));
    return corpus;
  }
  std::vector<std::string> subdirs;
  for (const auto& e : fs::directory_iterator(data_dir))
    if (e.is_directory()) subdirs.push_back(e.path().string());
  std::sort(subdirs.begin(), subdirs.end());
  if (subdirs.empty()) {
    corpus.push_back(load_video_dir(data_dir));
  } else {
    for (const auto& d : subdirs) corpus.push_back(load_video_dir(d));
  }
  return corpus;
}

std::string format_term(const TermValue& t) {
  if (!t.active) return "inactive";
  std::ostringstream os;
  os << std::setprecision(10) << t.value;
  return os.str();
}

}  // namespace

PretrainResult run_pretrain(const ExperimentConfig& cfg, const std::string& data_dir,
                            const std::string& out_dir, const std::string& resume_ckpt,
                            bool force_resume) {
  cfg.validate();
  fs::create_directories(out_dir);
  std::vector<Video> corpus = load_corpus(data_dir);

  ParamLayout layout = ParamLayout::build(cfg.encoder);
  DistillState state = cfg.make_distill_state();
  AdamOptimizer opt(layout.total, cfg.optim);
  Rng master(derive_seed(cfg.seed, 0));
  Eigen::VectorXd student, teacher;
  long start_step = 0;
  long tube_counter = 0;
  const uint64_t chash = config_hash(cfg);

  if (!resume_ckpt.empty()) {
    Checkpoint c = load_checkpoint(resume_ckpt);
    if (c.config_hash != chash && !force_resume)
      throw ConfigError("resume: config hash mismatch (use --force to override)");
    if (c.student.size() != layout.total)
      throw ConfigError("resume: parameter count mismatch");
    student = c.student;
    teacher = c.teacher;
    state.center = c.center;
    opt.m = c.adam_m;
    opt.v = c.adam_v;
    opt.step_count = c.adam_steps;
    master.set_state(c.rng_state);
    start_step = c.step;
    tube_counter = c.tube_counter;
  } else {
    Rng init_rng(derive_seed(cfg.seed, 1));
    student = init_params(cfg.encoder, layout, init_rng);
    teacher = student;
  }

  const std::string log_path = (fs::path(out_dir) / "train.log").string();
  std::ofstream log(log_path, start_step > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot open log: " + log_path);
  const bool det = deterministic_mode();

  auto save = [&](long step, const std::string& name) {
    Checkpoint c;
    c.config_hash = chash;
    c.step = step;
    c.tube_counter = tube_counter;
    c.student = student;
    c.teacher = teacher;
    c.center = state.center;
    c.adam_m = opt.m;
    c.adam_v = opt.v;
    c.adam_steps = opt.step_count;
    c.rng_state = master.state();
    save_checkpoint((fs::path(out_dir) / name).string(), c);
  };

  if (start_step == 0) save(0, "ckpt_initial.bin");

  const int tubes_per_step = cfg.micro_batch * cfg.grad_accum;
  for (long step = start_step + 1; step <= cfg.steps; ++step) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<ViewBatch> batch;
    for (int i = 0; i < tubes_per_step; ++i) {
      // per-tube generator derived from (seed, counter): resumable and
      // independent of worker scheduling
      Rng tube_rng(derive_seed(cfg.seed, 0x7B0 + static_cast<uint64_t>(tube_counter++)));
      const Video& vid = corpus[static_cast<size_t>(tube_rng.uniform_int(
          0, static_cast<int>(corpus.size()) - 1))];
      Tube tube = sample_tube(vid, cfg.tube_len, cfg.stride, tube_rng, cfg.filter);
      batch.push_back(build_tube_views(tube, cfg.views, tube_rng));
    }

    double lr = cfg.optim.lr;
    if (cfg.cosine_decay && cfg.steps > 0)
      lr = cfg.min_lr + 0.5 * (cfg.optim.lr - cfg.min_lr) *
                            (1.0 + std::cos(M_PI * static_cast<double>(step - 1) /
                                            static_cast<double>(cfg.steps)));

    StepStats stats;
    try {
      stats = train_step(cfg.encoder, layout, student, teacher, state, batch, opt, lr);
    } catch (const NumericError&) {
      // diagnostic dump of the offending batch before propagating
      std::string dump_dir = (fs::path(out_dir) / "diagnostic_batch").string();
      for (size_t i = 0; i < batch.size(); ++i)
        dump_views(dump_dir + "/tube_" + std::to_string(i), batch[i]);
      std::ofstream diag(fs::path(out_dir) / "diagnostic.txt");
      diag << "non-finite loss at step " << step << ", batch dumped to " << dump_dir << "\n";
      throw;
    }

    auto t1 = std::chrono::steady_clock::now();
    long wall_ms =
        det ? 0 : std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    log << "step=" << step << " effective_batch=" << tubes_per_step
        << " local=" << format_term(stats.l_local) << " mask=" << format_term(stats.l_mask)
        << " temp=" << format_term(stats.l_temp) << " total=" << std::setprecision(10)
        << stats.total << " mu=" << state.mu << " lr=" << lr << " wall_ms=" << wall_ms << "\n";
    log.flush();

    if (cfg.ckpt_every > 0 && step % cfg.ckpt_every == 0) {
      char name[48];
      std::snprintf(name, sizeof name, "ckpt_step_%06ld.bin", step);
      save(step, name);
    }
    if (step == cfg.steps) save(step, "ckpt_final.bin");
  }
  if (cfg.steps == 0 || start_step >= cfg.steps) save(std::max(start_step, 0L), "ckpt_final.bin");

  return {cfg.steps, (fs::path(out_dir) / "ckpt_final.bin").string(), log_path};
}

std::vector<std::pair<std::string, Rect>> load_boxes_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open boxes file: " + path);
  std::vector<std::pair<std::string, Rect>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string id;
    Rect r;
    if (!(is >> id >> r.x >> r.y >> r.w >> r.h))
      throw DataError("boxes file: malformed line " + std::to_string(lineno));
    out.emplace_back(id, r);
  }
  return out;
}

namespace {

// Keys from the frozen teacher encoder: heads concatenated, one row per patch.
Eigen::MatrixXd concat_keys(const EncoderOutput& out) {
  const long N = out.last_keys[0].rows();
  long d = 0;
  for (const auto& k : out.last_keys) d += k.cols();
  Eigen::MatrixXd keys(N, d);
  long col = 0;
  for (const auto& k : out.last_keys) {
    keys.middleCols(col, k.cols()) = k;
    col += k.cols();
  }
  return keys;
}

// Test hook: indicator keys from ground-truth masks (e1 foreground, e2
// background) at patch resolution.
Eigen::MatrixXd oracle_keys(const std::vector<InstanceMask>& masks, int input, int patch) {
  const int g = input / patch;
  Eigen::MatrixXd keys = Eigen::MatrixXd::Zero(g * g, 2);
  std::vector<BinaryMask> grids;
  for (const auto& m : masks) grids.push_back(m.grid);
  BinaryMask u = grids.empty() ? BinaryMask(input, input) : union_mask(grids);
  // resample union mask to the eval input size
  CropGeometry to_input{{0, 0, u.w, u.h}, input, input, false};
  BinaryMask m = warp_mask(u, to_input);
  for (int pr = 0; pr < g; ++pr)
    for (int pc = 0; pc < g; ++pc) {
      bool fg = false;
      for (int y = pr * patch; y < (pr + 1) * patch && !fg; ++y)
        for (int x = pc * patch; x < (pc + 1) * patch && !fg; ++x)
          if (m.at(y, x)) fg = true;
      keys(pr * g + pc, fg ? 0 : 1) = 1.0;
    }
  return keys;
}

}  // namespace

CorLocResult run_eval_corloc(const ExperimentConfig& cfg, const EvalOptions& opt) {
  cfg.validate();
  std::vector<std::string> image_paths;
  if (!fs::is_directory(opt.images_dir)) throw DataError("not a directory: " + opt.images_dir);
  for (const auto& e : fs::directory_iterator(opt.images_dir))
    if (e.path().extension() == ".ppm") image_paths.push_back(e.path().string());
  std::sort(image_paths.begin(), image_paths.end());
  if (image_paths.empty()) throw DataError("no images in " + opt.images_dir);

  std::map<std::string, std::vector<Rect>> gt;
  for (const auto& [id, r] : load_boxes_file(opt.boxes_file)) gt[id].push_back(r);

  ParamLayout layout = ParamLayout::build(cfg.encoder);
  Eigen::VectorXd teacher;
  if (opt.oracle_masks.empty()) {
    Checkpoint c = load_checkpoint(opt.ckpt_path);
    if (c.teacher.size() != layout.total)
      throw ConfigError("eval: checkpoint does not match encoder config");
    teacher = c.teacher;
  }
  std::vector<std::vector<InstanceMask>> oracle_anns;
  if (!opt.oracle_masks.empty()) oracle_anns = load_annotations(opt.oracle_masks);

  const int input = cfg.encoder.global_input;
  const int patch = cfg.encoder.patch_size;
  std::vector<Rect> preds;
  std::vector<std::vector<Rect>> gts;
  nlohmann::json per_image = nlohmann::json::array();

  bool any_gt = false;
  for (size_t i = 0; i < image_paths.size(); ++i) {
    Image img = read_ppm(image_paths[i]);
    Eigen::MatrixXd keys;
    if (!opt.oracle_masks.empty()) {
      if (i >= oracle_anns.size()) throw DataError("oracle masks: fewer frames than images");
      keys = oracle_keys(oracle_anns[i], input, patch);
    } else {
      Image resized = resize_bilinear(img, input, input);
      EncoderOutput out = forward(cfg.encoder, layout, teacher, resized);
      keys = concat_keys(out);
    }
    PatchGraph graph = build_patch_graph(keys);
    int seed = select_seed(graph);
    auto members = spatial_component(expand_seed(graph, seed), seed, input / patch);
    DetectionBox box = box_from_patches(members, patch, input / patch, input, input);

    // map back to original pixel coordinates
    double sx = static_cast<double>(img.w) / input, sy = static_cast<double>(img.h) / input;
    Rect pred{static_cast<int>(std::lround(box.rect.x * sx)),
              static_cast<int>(std::lround(box.rect.y * sy)),
              std::max(1, static_cast<int>(std::lround(box.rect.w * sx))),
              std::max(1, static_cast<int>(std::lround(box.rect.h * sy)))};

    std::string id = fs::path(image_paths[i]).stem().string();
    auto it = gt.find(id);
    std::vector<Rect> boxes = it == gt.end() ? std::vector<Rect>{} : it->second;
    if (!boxes.empty()) any_gt = true;
    double best_iou = 0;
    for (const Rect& g : boxes) best_iou = std::max(best_iou, iou(pred, g));

    preds.push_back(pred);
    gts.push_back(boxes);
    per_image.push_back({{"image", id},
                         {"seed", seed},
                         {"box", {pred.x, pred.y, pred.w, pred.h}},
                         {"iou", boxes.empty() ? nlohmann::json() : nlohmann::json(best_iou)}});
  }
  if (!any_gt) throw DataError("eval: no ground-truth boxes for any image");

  CorLocResult res = corloc(preds, gts);
  if (!opt.report_path.empty()) {
    nlohmann::json report{{"corloc", res.percent},
                          {"evaluated", res.evaluated},
                          {"skipped_no_gt", res.skipped},
                          {"correct", res.correct},
                          {"per_image", per_image}};
    std::ofstream f(opt.report_path);
    if (!f) throw DataError("cannot write report: " + opt.report_path);
    f << report.dump(2) << "\n";
  }
  return res;
}

void run_attn_viz(const ExperimentConfig& cfg, const std::string& ckpt_path,
                  const std::string& image_path, const std::string& out_path) {
  cfg.validate();
  Image img = read_ppm(image_path);
  if (img.h % cfg.encoder.patch_size != 0 || img.w % cfg.encoder.patch_size != 0)
    throw ConfigError("attn-viz: image size must be divisible by patch_size " +
                      std::to_string(cfg.encoder.patch_size));
  ParamLayout layout = ParamLayout::build(cfg.encoder);
  Checkpoint c = load_checkpoint(ckpt_path);
  if (c.teacher.size() != layout.total)
    throw ConfigError("attn-viz: checkpoint does not match encoder config");
  EncoderOutput out = forward(cfg.encoder, layout, c.teacher, img);
  Eigen::MatrixXd grid = attention_map(out);
  double mx = grid.maxCoeff();
  if (mx <= 0) mx = 1;

  const int p = cfg.encoder.patch_size;
  Image overlay = img;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      float a = static_cast<float>(grid(y / p, x / p) / mx);
      overlay.at(y, x, 0) = 0.5f * img.at(y, x, 0) + 0.5f * a;
      overlay.at(y, x, 1) = 0.5f * img.at(y, x, 1);
      overlay.at(y, x, 2) = 0.5f * img.at(y, x, 2);
    }
  write_image(out_path, overlay);
}

}  // namespace vino
