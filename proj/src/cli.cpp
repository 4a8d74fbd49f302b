#include "rinktrack/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rinktrack/errors.hpp"
#include "rinktrack/io.hpp"
#include "rinktrack/metrics.hpp"
#include "rinktrack/simulator.hpp"
#include "rinktrack/tracker.hpp"
#include "rinktrack/training.hpp"

namespace rinktrack {
namespace {

bool is_sequence_dir(const fs::path& p) { return fs::exists(p / "seq.ini"); }

void add_sim_flags(CLI::App& app, sim::SimConfig& c) {
  app.add_option("--name", c.name, "Sequence name");
  app.add_option("--n-players", c.n_players, "Players on the ice");
  app.add_option("--fps", c.fps, "Frame rate (30 or 60)");
  app.add_option("--duration", c.duration_s, "Duration in seconds");
  app.add_option("--occlusion-radius", c.occlusion_radius, "Occlusion radius (rink units)");
  app.add_option("--occlusion-drop-prob", c.occlusion_drop_prob,
                 "Probability that an occlusion drops the farther player");
  app.add_option("--embed-noise-sigma", c.embed_noise_sigma,
                 "Expected norm of per-frame embedding noise");
  app.add_option("--occlusion-mix", c.occlusion_mix, "Embedding mix weight under occlusion");
  app.add_option("--seed", c.seed, "Random seed");
  app.add_option("--img-width", c.img_width, "Image width in pixels");
  app.add_option("--img-height", c.img_height, "Image height in pixels");
  app.add_option("--max-speed", c.max_speed, "Speed cap (rink units per second)");
  app.add_option("--team-similarity", c.team_similarity,
                 "Weight of the shared team appearance direction");
  app.add_flag("--static-camera", c.static_camera, "Keep the camera fixed");
  app.add_option("--crossing-interval", c.crossing_interval_s,
                 "Seconds between forced crossings (0 disables)");
}

int cmd_simgen(const sim::SimConfig& base, const fs::path& out, int count) {
  if (count <= 1) {
    sim::emit_dataset(out, base);
    return 0;
  }
  for (int k = 0; k < count; ++k) {
    sim::SimConfig c = base;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03d", base.name.c_str(), k);
    c.name = buf;
    c.seed = base.seed + static_cast<std::uint64_t>(k);
    sim::emit_dataset(out / c.name, c);
  }
  return 0;
}

std::vector<Sequence> load_all(const std::vector<std::string>& dirs) {
  std::vector<Sequence> out;
  for (const auto& d : dirs) {
    auto s = load_sequences(d);
    for (auto& q : s) out.push_back(std::move(q));
  }
  return out;
}

int cmd_train(const std::vector<std::string>& data,
              const std::vector<std::string>& val, TrainConfig cfg,
              const fs::path& out, const std::string& log_path) {
  const std::vector<Sequence> train_set = load_all(data);
  const std::vector<Sequence> val_set = load_all(val);
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path);
  }
  cfg.on_epoch = [&](const EpochRecord& r) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["loss"] = r.loss;
    j["lr"] = r.lr;
    j["val_idf1"] = r.val_idf1 ? nlohmann::ordered_json(*r.val_idf1)
                               : nlohmann::ordered_json(nullptr);
    const std::string line = j.dump();
    if (log.is_open()) log << line << "\n" << std::flush;
    std::cerr << line << "\n";
  };
  const TrainResult res = train(train_set, val_set, cfg);
  save_checkpoint(out, res.best);
  return 0;
}

int cmd_infer(const fs::path& model, const fs::path& seq_dir,
              const TrackerConfig& cfg, const fs::path& out) {
  const LoadedModel m = load_model(model);
  const Sequence seq = parse_sequence(seq_dir);
  write_tracks(out, run_sequence(seq, m.params, cfg));
  return 0;
}

std::string eval_name(const fs::path& gt) {
  const fs::path parent = gt.parent_path().filename();
  return gt.filename() == "gt.csv" && !parent.empty() ? parent.string()
                                                     : gt.stem().string();
}

int cmd_eval(const std::vector<std::string>& gt,
             const std::vector<std::string>& pred, double iou_min,
             const std::string& out) {
  if (gt.size() != pred.size()) {
    throw InvalidConfig("eval needs one --pred per --gt");
  }
  std::vector<EvalInput> inputs;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    inputs.push_back({eval_name(gt[k]), parse_tracks(gt[k]), parse_tracks(pred[k])});
  }
  const std::string json = metrics_json(evaluate(inputs, iou_min));
  if (out.empty() || out == "-") {
    std::cout << json;
  } else {
    write_file(out, json);
  }
  return 0;
}

}  // namespace

std::vector<Sequence> load_sequences(const fs::path& dir) {
  if (is_sequence_dir(dir)) return {parse_sequence(dir)};
  if (!fs::is_directory(dir)) {
    throw IoError(dir.string() + " is not a sequence directory");
  }
  std::vector<fs::path> subs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && is_sequence_dir(e.path())) subs.push_back(e.path());
  }
  std::sort(subs.begin(), subs.end());
  if (subs.empty()) throw IoError(dir.string() + " contains no sequences");
  std::vector<Sequence> out;
  for (const auto& s : subs) out.push_back(parse_sequence(s));
  return out;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Online multi-player tracking on the rink plane"};
  app.require_subcommand(1);

  sim::SimConfig sim_cfg;
  std::string sim_out;
  int sim_count = 1;
  auto* simgen = app.add_subcommand("simgen", "Generate synthetic sequences");
  add_sim_flags(*simgen, sim_cfg);
  simgen->add_option("--out", sim_out, "Output directory")->required();
  simgen->add_option("--count", sim_count,
                     "Number of sequences (seeds seed..seed+count-1)");

  TrainConfig train_cfg;
  std::vector<std::string> data, val;
  std::string train_out, log_path;
  bool no_homography = false;
  auto* train_cmd = app.add_subcommand("train", "Train the association model");
  train_cmd->add_option("--data", data, "Training sequence directory")->required();
  train_cmd->add_option("--val", val, "Validation sequence directory");
  train_cmd->add_option("--epochs", train_cfg.epochs, "Training epochs");
  train_cmd->add_option("--batch", train_cfg.batch, "Frame pairs per step");
  train_cmd->add_option("--steps", train_cfg.steps, "Message-passing steps L");
  train_cmd->add_option("--alpha", train_cfg.alpha, "Focal loss alpha");
  train_cmd->add_option("--gamma", train_cfg.gamma, "Focal loss gamma");
  train_cmd->add_option("--seed", train_cfg.seed, "Random seed");
  train_cmd->add_option("--threads", train_cfg.threads, "Worker threads");
  train_cmd->add_option("--out", train_out, "Model file")->required();
  train_cmd->add_option("--log", log_path, "Line-delimited JSON training log");
  train_cmd->add_flag("--no-homography", no_homography,
                      "Zero the projected position features");

  std::string model_path, seq_dir, infer_out, resolve = "greedy";
  TrackerConfig tracker_cfg;
  bool carry_prev = false;
  auto* infer = app.add_subcommand("infer", "Track one sequence");
  infer->add_option("--model", model_path, "Model file")->required();
  infer->add_option("--seq", seq_dir, "Sequence directory")->required();
  infer->add_option("--xi", tracker_cfg.xi, "Edge pruning threshold");
  infer->add_option("--out", infer_out, "Output tracks CSV")->required();
  infer->add_option("--resolve", resolve, "greedy or optimal")
      ->check(CLI::IsMember({"greedy", "optimal"}));
  infer->add_flag("--carry-states", carry_prev,
                  "Reuse previous-frame node states instead of re-encoding them");

  std::vector<std::string> gt_files, pred_files;
  double iou_min = 0.5;
  std::string eval_out = "metrics.json";
  auto* eval = app.add_subcommand("eval", "Score tracks against ground truth");
  eval->add_option("--gt", gt_files, "Ground-truth CSV")->required();
  eval->add_option("--pred", pred_files, "Predicted tracks CSV")->required();
  eval->add_option("--iou", iou_min, "IoU threshold");
  eval->add_option("--out", eval_out, "Metrics JSON ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*simgen) return cmd_simgen(sim_cfg, sim_out, sim_count);
    if (*train_cmd) {
      train_cfg.use_projection = !no_homography;
      return cmd_train(data, val, train_cfg, train_out, log_path);
    }
    if (*infer) {
      tracker_cfg.resolve =
          resolve == "optimal" ? ResolveMode::kOptimal : ResolveMode::kGreedy;
      tracker_cfg.carry_states = carry_prev;
      return cmd_infer(model_path, seq_dir, tracker_cfg, infer_out);
    }
    if (*eval) return cmd_eval(gt_files, pred_files, iou_min, eval_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kUsage);
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace rinktrack
