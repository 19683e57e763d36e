#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "cad/cli/cli.hpp"
#include "cad/cli/plot.hpp"
#include "cad/eval/evaluation.hpp"
#include "cad/io/dataset_io.hpp"
#include "cad/sim/lidar_sim.hpp"

namespace cad::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ConfigError:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::InsufficientLabels:
    case ErrorCode::InsufficientData:
    case ErrorCode::PlacementFailure:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::EmptyBatch:
      return 2;
    case ErrorCode::Io:
    case ErrorCode::MalformedFile:
    case ErrorCode::MalformedLine:
    case ErrorCode::NonOrthonormal:
      return 3;
    case ErrorCode::MissingPrerequisite:
    case ErrorCode::MissingTags:
    case ErrorCode::NoGroundReference:
      return 4;
    case ErrorCode::SpecMismatch:
      return 5;
    default:
      return 1;
  }
}

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(attempt)};
  std::array<std::uint32_t, 2> v;
  seq.generate(v.begin(), v.end());
  return (static_cast<std::uint64_t>(v[0]) << 32) | v[1];
}

namespace {

// Reads keys of `j` into the given setters, rejecting unknown ones.
template <typename Fields>
void read_object(const json& j, const std::string& where, const Fields& fields) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) fail(ErrorCode::ConfigError, "unknown key '" + key + "' in " + where);
    try {
      it->second(value);
    } catch (const json::exception& e) {
      fail(ErrorCode::ConfigError, where + "." + key + ": " + e.what());
    }
  }
}

using Setters = std::map<std::string, std::function<void(const json&)>>;

template <typename V>
std::function<void(const json&)> into(V& v) {
  return [&v](const json& j) { v = j.get<V>(); };
}

json parse_config(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string(what) + " is not valid JSON: " + e.what());
  }
}

PolarGridSpec named_grid(const std::string& name) {
  if (name == "desk") return PolarGridSpec::desk();
  if (name == "full") return PolarGridSpec::full();
  fail(ErrorCode::ConfigError, "unknown grid '" + name + "' (desk|full)");
}

sim::LidarModel named_lidar(const std::string& name, const PolarGridSpec& grid) {
  if (name == "vlp16") return sim::LidarModel::vlp16();
  if (name == "dense") return sim::LidarModel::survey(0.15, grid.max_radius + 1.0, 1.0);
  fail(ErrorCode::ConfigError, "unknown lidar '" + name + "' (vlp16|dense)");
}

io::SplitFractions parse_fractions(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      fail(ErrorCode::ConfigError, "bad split fraction '" + part + "'");
    }
  }
  if (v.size() != 3) fail(ErrorCode::ConfigError, "--fractions needs three comma-separated values");
  return {v[0], v[1], v[2]};
}

fs::path manifest_path(const fs::path& dataset) { return dataset / kManifestName; }

std::vector<PointFrame> aligned_frames(const Sample& s) { return s.aligned(); }

bool all_tagged(const std::vector<PointFrame>& frames) {
  return std::all_of(frames.begin(), frames.end(), [](const PointFrame& f) { return f.tags.has_value(); });
}

void ensure_compatible(const net::CadNet<float>& model, const io::DatasetManifest& m) {
  if (!(model.grid() == m.grid)) fail(ErrorCode::SpecMismatch, "checkpoint grid differs from the dataset grid");
  if (model.config().sam.f != m.f) {
    fail(ErrorCode::SpecMismatch, "checkpoint expects f = " + std::to_string(model.config().sam.f) +
                                      " history frames, dataset has " + std::to_string(m.f));
  }
}

const io::SampleRecord& find_record(const io::DatasetManifest& m, const std::string& id) {
  for (const auto& r : m.records) {
    if (r.id == id) return r;
  }
  fail(ErrorCode::InvalidArgument, "no sample '" + id + "' in the manifest");
}

std::string percent(long num, long den) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", den ? 100.0 * static_cast<double>(num) / static_cast<double>(den) : 0.0);
  return buf;
}

// ---- sim-gen

struct SimGenArgs {
  fs::path out;
  int scenes = 10;
  std::uint64_t seed = 0;
  std::string profile = "desk";
  int frames = 2;
  std::string grid = "desk";
  std::string lidar = "vlp16";
  double period = 0.5;
  double speed = 1.0;
};

int sim_gen(const SimGenArgs& a, std::ostream& out) {
  if (a.scenes < 1) fail(ErrorCode::ConfigError, "--scenes must be >= 1");
  if (a.frames < 0) fail(ErrorCode::ConfigError, "--frames must be >= 0");
  const PolarGridSpec grid = named_grid(a.grid);
  const sim::DifficultyProfile profile = sim::DifficultyProfile::named(a.profile);
  const sim::LidarModel lidar = named_lidar(a.lidar, grid);
  // Keep the ego's past path inside the obstacle-free corridor of the scene.
  const double speed = a.frames > 0 ? std::min(a.speed, profile.path_length / (a.frames * a.period)) : a.speed;
  const sim::SequenceSpec seq = sim::SequenceSpec::straight(a.frames, a.period, speed);

  io::DatasetManifest m;
  m.grid = grid;
  m.f = a.frames;
  for (int i = 0; i < a.scenes; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "%06d", i);
    sim::SceneSpec scene;
    for (std::uint64_t attempt = 0;; ++attempt) {
      try {
        scene = sim::sample_random_scene(sample_seed(a.seed, i, attempt), profile);
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::PlacementFailure || attempt == 9) throw;
      }
    }
    Sample s = sim::generate_sequence(scene, seq, lidar, sample_seed(a.seed, i, 1000));
    s.id = id;
    io::SampleRecord r = io::write_sample(a.out, s, grid);
    r.scene_path = std::string("scenes/") + id + ".json";
    io::write_file(a.out / *r.scene_path, sim::scene_to_json(scene) + "\n");
    r.split = io::Split::UnlabeledTrain;
    m.records.push_back(std::move(r));
  }
  io::write_manifest(manifest_path(a.out), m);
  out << "wrote " << a.scenes << " samples (" << a.frames + 1 << " frames each) to " << a.out.string() << "\n";
  return 0;
}

// ---- label

struct LabelArgs {
  fs::path dataset;
  std::optional<fs::path> rules;
  bool from_points = false;
  std::string fractions = "0.25,0.5,0.25";
  bool keep_splits = false;
  std::uint64_t seed = 0;
};

int label(const LabelArgs& a, std::ostream& out) {
  const oracle::TraversabilityRules rules =
      a.rules ? rules_from_json(io::read_file(*a.rules)) : oracle::TraversabilityRules{};
  rules.validate();
  std::optional<io::SplitFractions> fractions;
  if (!a.keep_splits) fractions = parse_fractions(a.fractions);
  io::DatasetManifest m = io::read_manifest(manifest_path(a.dataset));
  if (!a.from_points) {
    for (const auto& r : m.records) {
      if (!r.scene_path) {
        fail(ErrorCode::MissingPrerequisite,
             "sample " + r.id + " has no scene spec; use --from-points to label from the point clouds");
      }
    }
  }

  long covered = 0, directions = 0, compared = 0, agree = 0;
  for (auto& r : m.records) {
    const Sample s = io::load_sample(a.dataset, r, m.grid);
    const std::vector<PointFrame> frames = aligned_frames(s);
    std::optional<CadProfile> scene_label;
    if (r.scene_path) {
      const sim::SceneSpec scene = sim::scene_from_json(io::read_file(a.dataset / *r.scene_path));
      scene_label = oracle::label_scene(scene, s.frames[0].pose, m.grid, rules).profile;
    }
    const CadProfile profile = a.from_points ? oracle::label_from_points(frames, m.grid, rules) : *scene_label;
    const auto counts = oracle::pillar_point_counts(frames, m.grid);
    for (int j = 0; j < m.grid.n_phi; ++j) {
      ++directions;
      bool seen = false;
      for (int d = 0; d <= profile.depth_index[j] && !seen; ++d) seen = counts[d * m.grid.n_phi + j] > 0;
      covered += seen;
      if (a.from_points && scene_label && oracle::direction_covered(counts, m.grid, j, scene_label->depth_index[j])) {
        ++compared;
        agree += std::abs(profile.depth_index[j] - scene_label->depth_index[j]) <= 1;
      }
    }
    r.label_path = "labels/" + r.id + ".json";
    io::write_label(a.dataset / *r.label_path, profile, m.grid);
  }
  if (fractions) m = io::split_dataset(m, *fractions, a.seed);
  io::write_manifest(manifest_path(a.dataset), m);

  out << "labeled " << m.records.size() << " samples from " << (a.from_points ? "points" : "scene specs")
      << "; directions with points before the depth " << percent(covered, directions) << " (" << covered << "/" << directions << ")\n";
  if (a.from_points && compared > 0) {
    out << "point labels within 1 bin of scene labels on " << percent(agree, compared) << " of covered directions ("
        << agree << "/" << compared << ")\n";
  } else if (a.from_points) {
    out << "no direction is covered up to its scene depth; agreement with scene labels not measured\n";
  }
  if (fractions) {
    out << "splits: labeled " << m.in_split(io::Split::LabeledTrain).size() << ", unlabeled "
        << m.in_split(io::Split::UnlabeledTrain).size() << ", validation "
        << m.in_split(io::Split::Validation).size() << "\n";
  }
  return 0;
}

// ---- train

struct TrainArgs {
  fs::path dataset;
  fs::path out;
  std::optional<fs::path> config;
  std::optional<fs::path> log;
  std::optional<int> epochs;
  bool labeled_only = false;
  std::uint64_t seed = 0;
};

int train_cmd(const TrainArgs& a, std::ostream& out) {
  const io::DatasetManifest m = io::read_manifest(manifest_path(a.dataset));
  TrainSettings s = settings_from_json(a.config ? io::read_file(*a.config) : "{}", m.grid, m.f);
  s.model.init_seed = a.seed;
  s.train.seed = a.seed;
  if (a.epochs) s.train.epochs = *a.epochs;
  if (a.labeled_only) s.train.use_unlabeled = false;
  if (s.train.checkpoint_every > 0) s.train.checkpoint_dir = a.out.parent_path() / "checkpoints";
  s.model.validate();
  s.train.validate();
  s.loss.validate(s.model.grid.n_r);

  const train::TrainData data = train::load_train_data(a.dataset, m, s.model.pillar.augmented);
  if (!s.train.checkpoint_dir.empty()) fs::create_directories(s.train.checkpoint_dir);
  if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
  const fs::path log_path = a.log ? *a.log : fs::path(a.out.string() + ".log.jsonl");
  std::ofstream log(log_path, std::ios::binary);
  if (!log) fail(ErrorCode::Io, "cannot write " + log_path.string());

  net::CadNet<float> model(s.model);
  const auto logs = train::fit(model, data, s.train, s.loss, &log);
  model.save(a.out);
  const train::EpochLog& last = logs.back();
  out << "trained " << logs.size() << " epochs on " << data.labeled.size() << " labeled + "
      << (s.train.use_unlabeled ? data.unlabeled.size() : 0) << " unlabeled samples; final loss " << last.loss
      << ", train MAE " << last.train_mae << " m";
  if (last.val_mae) out << ", validation MAE " << *last.val_mae << " m";
  out << "\n";
  return 0;
}

// ---- eval

struct EvalArgs {
  fs::path dataset;
  std::optional<fs::path> ckpt;
  bool baseline = false;
  std::optional<fs::path> rules;
  fs::path report;
  std::string split = "validation";
  double threshold = 0.5;
  double ihd_epsilon = 0.3;
};

int eval_cmd(const EvalArgs& a, std::ostream& out) {
  if (!a.ckpt && !a.baseline) fail(ErrorCode::ConfigError, "eval needs --ckpt or --baseline");
  const io::DatasetManifest m = io::read_manifest(manifest_path(a.dataset));
  std::optional<net::CadNet<float>> model;
  if (a.ckpt) {
    model.emplace(net::CadNet<float>::load(*a.ckpt));
    ensure_compatible(*model, m);
  }
  const oracle::TraversabilityRules rules =
      a.rules ? rules_from_json(io::read_file(*a.rules)) : oracle::TraversabilityRules{};

  std::vector<const io::SampleRecord*> records;
  if (a.split == "all") {
    for (const auto& r : m.records) records.push_back(&r);
  } else if (a.split == "validation") {
    records = m.in_split(io::Split::Validation);
  } else if (a.split == "labeled") {
    records = m.in_split(io::Split::LabeledTrain);
  } else if (a.split == "unlabeled") {
    records = m.in_split(io::Split::UnlabeledTrain);
  } else {
    fail(ErrorCode::ConfigError, "unknown split '" + a.split + "' (validation|labeled|unlabeled|all)");
  }
  if (records.empty()) fail(ErrorCode::InsufficientData, "no samples in split '" + a.split + "'");

  eval::Evaluator ev(m.grid, a.threshold, a.ihd_epsilon);
  for (const io::SampleRecord* r : records) {
    if (!r->label_path) fail(ErrorCode::MissingPrerequisite, "sample " + r->id + " has no label; run `label` first");
    const Sample s = io::load_sample(a.dataset, *r, m.grid);
    const std::vector<PointFrame> frames = aligned_frames(s);
    const CadProfile pred = model ? net::predict(*model, frames, m.grid).profile
                                  : oracle::label_from_points(frames, m.grid, rules);
    ev.add(pred, *s.label, all_tagged(frames) ? std::span<const PointFrame>(frames) : std::span<const PointFrame>());
  }
  const eval::EvalReport rep = ev.report();
  if (!a.report.parent_path().empty()) fs::create_directories(a.report.parent_path());
  io::write_file(a.report, rep.to_json());
  fs::path table = a.report;
  table.replace_extension(".txt");
  io::write_file(table, rep.to_table());
  out << rep.to_table();
  return 0;
}

// ---- predict

struct PredictArgs {
  fs::path ckpt;
  fs::path dataset;
  std::string sample;
  fs::path out;
};

int predict_cmd(const PredictArgs& a, std::ostream& out) {
  const io::DatasetManifest m = io::read_manifest(manifest_path(a.dataset));
  const net::CadNet<float> model = net::CadNet<float>::load(a.ckpt);
  ensure_compatible(model, m);
  const Sample s = io::load_sample(a.dataset, find_record(m, a.sample), m.grid);
  const net::Prediction p = net::predict(model, aligned_frames(s), m.grid);
  io::write_label(a.out, p.profile, m.grid);
  double conf = 0;
  for (double c : p.profile.confidence) conf += c / static_cast<double>(p.profile.confidence.size());
  out << "wrote profile for " << a.sample << " to " << a.out.string() << " (mean confidence " << conf << ")\n";
  return 0;
}

// ---- plot

struct PlotArgs {
  fs::path profile;
  std::optional<fs::path> gt;
  std::vector<fs::path> points;
  std::optional<fs::path> dataset;
  std::optional<std::string> sample;
  fs::path out;
};

int plot_cmd(const PlotArgs& a, std::ostream& out) {
  const std::string text = io::read_file(a.profile);
  PlotInput in;
  in.grid = io::label_grid(text);
  in.profile = io::label_from_json(text, in.grid);
  if (a.gt) in.ground_truth = io::read_label(*a.gt, in.grid);
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    in.frames.push_back(io::read_kitti_bin(a.points[k]));
    in.frames.back().frame_index = static_cast<int>(k);
  }
  if (a.sample) {
    if (!a.dataset) fail(ErrorCode::ConfigError, "--sample needs --dataset");
    const io::DatasetManifest m = io::read_manifest(manifest_path(*a.dataset));
    if (!(m.grid == in.grid)) fail(ErrorCode::SpecMismatch, "profile grid differs from the dataset grid");
    in.frames = aligned_frames(io::load_sample(*a.dataset, find_record(m, *a.sample), m.grid));
  }
  io::write_file(a.out, render_svg(in));
  out << "wrote " << a.out.string() << "\n";
  return 0;
}

}  // namespace

oracle::TraversabilityRules rules_from_json(const std::string& text) {
  oracle::TraversabilityRules r;
  read_object(parse_config(text, "rules file"), "rules",
              Setters{{"h_obs", into(r.h_obs)},
                      {"h_neg", into(r.h_neg)},
                      {"g_max", into(r.g_max)},
                      {"ground_window", into(r.ground_window)},
                      {"vehicle_clearance", into(r.vehicle_clearance)},
                      {"seed_radius", into(r.seed_radius)},
                      {"reference_window", into(r.reference_window)}});
  r.validate();
  return r;
}

TrainSettings settings_from_json(const std::string& text, const PolarGridSpec& dataset_grid, int dataset_f) {
  TrainSettings s;
  s.model.grid = dataset_grid;
  s.model.sam.f = dataset_f;
  const json j = parse_config(text, "training config");
  std::string fusion = "sam", optimizer = "adam";
  std::optional<PolarGridSpec> grid;
  read_object(
      j, "config",
      Setters{
          {"model",
           [&](const json& mj) {
             read_object(mj, "model",
                         Setters{{"augmented", into(s.model.pillar.augmented)},
                                 {"pillar_widths", into(s.model.pillar.widths)},
                                 {"sam_embed", into(s.model.sam.embed)},
                                 {"sam_fused", into(s.model.sam.fused)},
                                 {"backbone", into(s.model.backbone.channels)},
                                 {"fusion", into(fusion)},
                                 {"grid", [&](const json& g) {
                                    grid = PolarGridSpec{g.at("max_radius").get<double>(), g.at("z_min").get<double>(),
                                                         g.at("z_max").get<double>(), g.at("n_r").get<int>(),
                                                         g.at("n_phi").get<int>()};
                                  }}});
           }},
          {"train",
           [&](const json& tj) {
             read_object(tj, "train",
                         Setters{{"epochs", into(s.train.epochs)},
                                 {"batch_labeled", into(s.train.batch_labeled)},
                                 {"batch_unlabeled", into(s.train.batch_unlabeled)},
                                 {"learning_rate", into(s.train.learning_rate)},
                                 {"optimizer", into(optimizer)},
                                 {"use_unlabeled", into(s.train.use_unlabeled)},
                                 {"schedule_scale", into(s.train.schedule_scale)},
                                 {"checkpoint_every", into(s.train.checkpoint_every)}});
           }},
          {"loss",
           [&](const json& lj) {
             read_object(lj, "loss",
                         Setters{{"alpha", into(s.loss.alpha)},
                                 {"beta", into(s.loss.beta)},
                                 {"lambda", into(s.loss.lambda)},
                                 {"sigma1", into(s.loss.sigma1)},
                                 {"mu1", into(s.loss.mu1)},
                                 {"sigma2", into(s.loss.sigma2)},
                                 {"mu2", into(s.loss.mu2)},
                                 {"sigma_g", into(s.loss.sigma_g)},
                                 {"b", into(s.loss.b)}});
           }},
      });
  if (fusion != "sam" && fusion != "merge") fail(ErrorCode::ConfigError, "fusion must be 'sam' or 'merge'");
  s.model.fusion = fusion == "sam" ? net::Fusion::Sam : net::Fusion::Merge;
  if (optimizer != "adam" && optimizer != "sgd") fail(ErrorCode::ConfigError, "optimizer must be 'adam' or 'sgd'");
  s.train.optimizer = optimizer == "adam" ? train::Optimizer::Adam : train::Optimizer::Sgd;
  if (grid && !(*grid == dataset_grid)) fail(ErrorCode::SpecMismatch, "configured grid differs from the dataset grid");
  s.model.validate();
  s.train.validate();
  s.loss.validate(s.model.grid.n_r);
  return s;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Circular accessible depth: simulate, label, train, evaluate and plot."};
  app.name(args.empty() ? "cad" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads; all commands currently run single-threaded")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  SimGenArgs sg;
  auto* c_sim = app.add_subcommand("sim-gen", "Generate a simulated dataset with scene specs");
  c_sim->add_option("--out", sg.out, "Output dataset directory")->required();
  c_sim->add_option("--scenes", sg.scenes, "Number of samples")->capture_default_str();
  c_sim->add_option("--seed", sg.seed, "Random seed")->capture_default_str();
  c_sim->add_option("--profile", sg.profile, "Difficulty profile: bare|desk|dynamic|dense")->capture_default_str();
  c_sim->add_option("--frames", sg.frames, "History frames f per sample (f+1 scans)")->capture_default_str();
  c_sim->add_option("--grid", sg.grid, "Polar grid: desk (12 m, 32x48) | full (15 m, 128x384)")
      ->capture_default_str();
  c_sim->add_option("--lidar", sg.lidar, "Sensor model: vlp16 | dense")->capture_default_str();
  c_sim->add_option("--period", sg.period, "Seconds between frames")->capture_default_str();
  c_sim->add_option("--speed", sg.speed, "Ego speed in m/s (capped to the clear path)")->capture_default_str();

  LabelArgs lb;
  std::string rules_path;
  auto* c_label = app.add_subcommand("label", "Write label files and assign training splits");
  c_label->add_option("--dataset", lb.dataset, "Dataset directory")->required();
  c_label->add_option("--rules", rules_path, "Traversability rules JSON");
  c_label->add_flag("--from-points", lb.from_points, "Label from aggregated points instead of scene specs");
  auto* o_frac = c_label->add_option("--fractions", lb.fractions, "Labeled,unlabeled,validation split fractions")
                     ->capture_default_str();
  auto* o_keep = c_label->add_flag("--keep-splits", lb.keep_splits, "Leave the manifest splits unchanged");
  o_keep->excludes(o_frac);
  c_label->add_option("--seed", lb.seed, "Split seed")->capture_default_str();

  TrainArgs tr;
  std::string config_path, log_path;
  int epochs = 0;
  auto* c_train = app.add_subcommand("train", "Train a model and write a checkpoint plus a JSONL log");
  c_train->add_option("--dataset", tr.dataset, "Dataset directory")->required();
  c_train->add_option("--out", tr.out, "Checkpoint path")->required();
  c_train->add_option("--config", config_path, "Training config JSON (model/train/loss sections)");
  c_train->add_option("--log", log_path, "Log path (default: <out>.log.jsonl)");
  auto* o_epochs = c_train->add_option("--epochs", epochs, "Override the configured epoch count");
  c_train->add_flag("--labeled-only", tr.labeled_only, "Ignore the unlabeled split");
  c_train->add_option("--seed", tr.seed, "Initialization and shuffling seed")->capture_default_str();

  EvalArgs ev;
  std::string ckpt_path;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint or the geometric baseline");
  c_eval->add_option("--dataset", ev.dataset, "Dataset directory")->required();
  auto* o_ckpt = c_eval->add_option("--ckpt", ckpt_path, "Model checkpoint");
  auto* o_base = c_eval->add_flag("--baseline", ev.baseline, "Evaluate the point-based geometric labeler instead");
  o_ckpt->excludes(o_base);
  std::string eval_rules;
  c_eval->add_option("--rules", eval_rules, "Traversability rules JSON for --baseline")->needs(o_base);
  c_eval->add_option("--report", ev.report, "Report path (JSON; the table goes next to it as .txt)")->required();
  c_eval->add_option("--split", ev.split, "validation|labeled|unlabeled|all")->capture_default_str();
  c_eval->add_option("--threshold", ev.threshold, "Accuracy threshold in metres")->capture_default_str();
  c_eval->add_option("--ihd-epsilon", ev.ihd_epsilon, "IHD proximity in metres")->capture_default_str();

  PredictArgs pr;
  auto* c_pred = app.add_subcommand("predict", "Predict the profile of one sample");
  c_pred->add_option("--ckpt", pr.ckpt, "Model checkpoint")->required();
  c_pred->add_option("--dataset", pr.dataset, "Dataset directory")->required();
  c_pred->add_option("--sample", pr.sample, "Sample id")->required();
  c_pred->add_option("--out", pr.out, "Output profile file")->required();

  PlotArgs pl;
  std::string plot_gt, plot_dataset, plot_sample;
  auto* c_plot = app.add_subcommand("plot", "Render a profile as an SVG polar plot");
  c_plot->add_option("--profile", pl.profile, "Profile or label file")->required();
  c_plot->add_option("--gt", plot_gt, "Ground-truth label file drawn as an outline");
  auto* o_points = c_plot->add_option("--points", pl.points, "KITTI .bin frames in current coordinates, newest first");
  auto* o_sample = c_plot->add_option("--sample", plot_sample, "Overlay the aligned frames of this sample");
  auto* o_pdata = c_plot->add_option("--dataset", plot_dataset, "Dataset holding --sample");
  o_points->excludes(o_sample);
  o_sample->needs(o_pdata);
  c_plot->add_option("--out", pl.out, "Output SVG")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c_sim) return sim_gen(sg, out);
    if (*c_label) {
      if (!rules_path.empty()) lb.rules = rules_path;
      return label(lb, out);
    }
    if (*c_train) {
      if (!config_path.empty()) tr.config = config_path;
      if (!log_path.empty()) tr.log = log_path;
      if (*o_epochs) tr.epochs = epochs;
      return train_cmd(tr, out);
    }
    if (*c_eval) {
      if (!ckpt_path.empty()) ev.ckpt = ckpt_path;
      if (!eval_rules.empty()) ev.rules = eval_rules;
      return eval_cmd(ev, out);
    }
    if (*c_pred) return predict_cmd(pr, out);
    if (*c_plot) {
      if (!plot_gt.empty()) pl.gt = plot_gt;
      if (!plot_sample.empty()) pl.sample = plot_sample;
      if (!plot_dataset.empty()) pl.dataset = plot_dataset;
      return plot_cmd(pl, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace cad::cli
