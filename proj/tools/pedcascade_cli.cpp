// pedcascade command-line tool. Talks to the library through the C API only.

#include "pedcascade/pedcascade.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Failure {
  int code;
  std::string message;
};

int exit_code(pc_status s) {
  switch (s) {
    case PC_OK: return kOk;
    case PC_ERR_INVALID_ARGUMENT: return kUsage;
    case PC_ERR_NUMERIC: return kNumeric;
    case PC_ERR_DATA:
    case PC_ERR_IO:
    case PC_ERR_INTERNAL: return kData;
  }
  return kData;
}

void check(pc_status s, const std::string& what) {
  if (s != PC_OK) throw Failure{exit_code(s), what + ": " + pc_last_error()};
}

std::string take_string(char* s) {
  std::string out = s ? s : "";
  pc_free_string(s);
  return out;
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  operator T*() const { return p; }
};

using Dataset = Handle<pc_dataset, pc_dataset_free>;
using Forest = Handle<pc_forest, pc_forest_free>;
using Compiled = Handle<pc_compiled, pc_compiled_free>;
using Net = Handle<pc_net, pc_net_free>;
using Svm = Handle<pc_svm, pc_svm_free>;
using Cascade = Handle<pc_cascade, pc_cascade_free>;
using Dets = Handle<pc_detections, pc_detections_free>;
using Curve = Handle<pc_curve, pc_curve_free>;

fs::path out_dir() {
  const char* env = std::getenv("PEDCASCADE_OUT_DIR");
  return env && *env ? fs::path(env) : fs::path(".");
}

/// Relative output paths land in $PEDCASCADE_OUT_DIR when it is set.
std::string out_path(const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  const fs::path full = path.is_absolute() ? path : out_dir() / path;
  if (full.has_parent_path()) fs::create_directories(full.parent_path());
  return full.string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{kData, path + ": cannot open for writing"};
  out << text;
  if (!out) throw Failure{kData, path + ": write failed"};
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw Failure{kData, path + ": cannot open"};
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Failure{kData, path + ": " + e.what()};
  }
  if (!j.is_object()) throw Failure{kData, path + ": config must be a JSON object"};
  if (j.contains("version")) {
    if (j["version"] != 1) throw Failure{kData, path + ": unsupported config version"};
    j.erase("version");
  }
  return j;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

/// Provenance record written before any output of a run.
struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  json seeds = json::object();
  std::map<std::string, std::string> inputs;  // path -> sha256

  void input(const std::string& path) {
    if (path.empty()) return;
    char* hex = nullptr;
    check(pc_sha256_path(path.c_str(), &hex), "hashing " + path);
    inputs[path] = take_string(hex);
  }

  void write(const std::string& primary_output) const {
    const std::string path =
        primary_output.empty() ? out_path(command + ".manifest.json") : primary_output + ".manifest.json";
    json in = json::object();
    for (const auto& [p, h] : inputs) in[p] = h;
    const json j{{"format", "pedcascade.manifest"},
                 {"version", 1},
                 {"command", command},
                 {"argv", argv},
                 {"config", config},
                 {"seeds", seeds},
                 {"inputs", in},
                 {"tool_version", pc_version()},
                 {"wall_clock", utc_now()}};
    write_file(path, j.dump(1) + "\n");
  }
};

struct Common {
  int jobs = 1;
};

void load_data(Dataset& ds, const std::string& path, Manifest& m) {
  m.input(path);
  check(pc_dataset_load(path.c_str(), ds.out()), "loading dataset " + path);
}

void load_forest(Forest& f, const std::string& path, Manifest& m) {
  m.input(path);
  check(pc_forest_load(path.c_str(), f.out()), "loading forest " + path);
}

// Subcommands ---------------------------------------------------------------

struct SynthArgs {
  std::string config, out;
  int n_frames = -1;
  std::uint64_t seed = 1;
};

void run_synth(const SynthArgs& a, Manifest& m) {
  json cfg = read_config(a.config);
  if (a.n_frames >= 0) cfg["n_frames"] = a.n_frames;
  m.config = cfg;
  m.seeds["synth"] = a.seed;
  m.input(a.config);
  const std::string out = out_path(a.out);
  m.write(out);
  Dataset ds;
  check(pc_dataset_synth(cfg.dump().c_str(), a.seed, ds.out()), "synth");
  check(pc_dataset_save(ds, out.c_str()), "saving dataset");
  std::printf("%zu frames written to %s\n", pc_dataset_size(ds), out.c_str());
}

struct TrainForestArgs {
  std::string data, config, out, report;
  int trees = -1;
  std::int64_t seed = -1;
};

void run_train_forest(const TrainForestArgs& a, Manifest& m) {
  json cfg = read_config(a.config);
  if (a.trees > 0) cfg["n_trees"] = a.trees;
  if (a.seed >= 0) cfg["seed"] = a.seed;
  m.config = cfg;
  m.seeds["forest"] = cfg.value("seed", 1);
  m.input(a.config);
  Dataset ds;
  load_data(ds, a.data, m);
  const std::string out = out_path(a.out);
  m.write(out);
  Forest f;
  char* report = nullptr;
  check(pc_forest_train(ds, cfg.dump().c_str(), f.out(), &report), "training forest");
  const std::string rep = take_string(report);
  check(pc_forest_save(f, out.c_str()), "saving forest");
  if (!a.report.empty()) write_file(out_path(a.report), rep + "\n");
  std::printf("%zu trees written to %s\n", pc_forest_trees(f), out.c_str());
}

struct CompileArgs {
  std::string forest, out;
  double sharpness = 0.0;
  bool verify = false;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  double min_margin = 0.0;
};

int run_compile(const CompileArgs& a, Manifest& m) {
  m.config = {{"sharpness", a.sharpness}, {"verify", a.verify}, {"samples", a.samples}, {"min_margin", a.min_margin}};
  m.seeds["verify"] = a.seed;
  Forest f;
  load_forest(f, a.forest, m);
  const std::string out = out_path(a.out);
  m.write(out);
  Compiled c;
  check(pc_compile_forest(f, a.sharpness, c.out()), "compiling forest");
  if (!out.empty()) check(pc_compiled_save_net(c, out.c_str()), "saving compiled net");
  if (!a.verify) return kOk;
  const json opts{{"samples", a.samples}, {"seed", a.seed}, {"min_margin", a.min_margin}};
  char* report = nullptr;
  check(pc_compiled_verify(f, c, opts.dump().c_str(), &report), "verifying");
  const json r = json::parse(take_string(report));
  std::printf("%zu mismatches, max score diff %.3g over %zu windows",
              r["decision_mismatches"].get<std::size_t>(), r["max_score_diff"].get<double>(),
              r["windows"].get<std::size_t>());
  if (r["skipped"].get<std::size_t>() > 0) std::printf(" (%zu skipped)", r["skipped"].get<std::size_t>());
  std::printf("\n");
  return kOk;
}

struct TrainNetArgs {
  std::string data, forest, config, out, log, report;
  int epochs = -1;
  std::int64_t seed = -1;
};

void run_train_net(const TrainNetArgs& a, Manifest& m) {
  json cfg = read_config(a.config);
  if (a.epochs >= 0) cfg["train"]["epochs"] = a.epochs;
  if (a.seed >= 0) cfg["train"]["seed"] = a.seed;
  m.config = cfg;
  m.seeds["train"] = cfg.contains("train") ? cfg["train"].value("seed", 1) : 1;
  m.input(a.config);
  Dataset ds;
  load_data(ds, a.data, m);
  Forest f;
  load_forest(f, a.forest, m);
  const std::string out = out_path(a.out);
  m.write(out);
  Net n;
  char* report = nullptr;
  check(pc_net_train(ds, f, cfg.dump().c_str(), n.out(), &report), "training net");
  const std::string rep = take_string(report);
  check(pc_net_save(n, out.c_str()), "saving net");
  if (!a.log.empty()) {
    char* csv = nullptr;
    check(pc_net_log_csv(n, &csv), "training log");
    write_file(out_path(a.log), take_string(csv));
  }
  if (!a.report.empty()) write_file(out_path(a.report), rep + "\n");
  std::printf("net with %zu parameters written to %s\n", pc_net_parameters(n), out.c_str());
}

struct TrainSvmArgs {
  std::string data, forest, net, config, out;
};

void run_train_svm(const TrainSvmArgs& a, Manifest& m) {
  const json cfg = read_config(a.config);
  m.config = cfg;
  m.input(a.config);
  Dataset ds;
  load_data(ds, a.data, m);
  Forest f;
  load_forest(f, a.forest, m);
  Net n;
  m.input(a.net);
  check(pc_net_load(a.net.c_str(), n.out()), "loading net " + a.net);
  const std::string out = out_path(a.out);
  m.write(out);
  Svm s;
  check(pc_svm_train(ds, f, n, cfg.dump().c_str(), s.out()), "training SVM");
  check(pc_svm_save(s, out.c_str()), "saving SVM");
  std::printf("SVM written to %s\n", out.c_str());
}

struct DetectArgs {
  std::string data, cascade, forest, net, svm, rescorer = "identity", config, out, proposals_out, save_cascade;
  std::string timing_out;
};

void build_cascade(const DetectArgs& a, Cascade& c, Manifest& m) {
  if (!a.cascade.empty()) {
    m.input(a.cascade);
    check(pc_cascade_load(a.cascade.c_str(), c.out()), "loading cascade " + a.cascade);
    return;
  }
  if (a.forest.empty()) throw Failure{kUsage, "either --cascade or --forest is required"};
  const json cfg = read_config(a.config);
  m.config = {{"rescorer", a.rescorer}, {"options", cfg}};
  m.input(a.config);
  Forest f;
  load_forest(f, a.forest, m);
  Net n;
  Svm s;
  if (!a.net.empty()) {
    m.input(a.net);
    check(pc_net_load(a.net.c_str(), n.out()), "loading net " + a.net);
  }
  if (!a.svm.empty()) {
    m.input(a.svm);
    check(pc_svm_load(a.svm.c_str(), s.out()), "loading SVM " + a.svm);
  }
  check(pc_cascade_create(f, a.rescorer.c_str(), n, s, cfg.dump().c_str(), c.out()), "building cascade");
}

std::string run_cascade(const DetectArgs& a, const Common& common, Manifest& m, const std::string& primary,
                        Dets* dets_out) {
  Cascade c;
  build_cascade(a, c, m);
  Dataset ds;
  load_data(ds, a.data, m);
  m.write(primary);
  if (!a.save_cascade.empty()) check(pc_cascade_save(c, out_path(a.save_cascade).c_str()), "saving cascade");
  Dets props;
  char* timing = nullptr;
  check(pc_cascade_run(c, ds, common.jobs, dets_out ? dets_out->out() : nullptr, props.out(), &timing),
        "running cascade");
  if (!a.proposals_out.empty()) check(pc_detections_save(props, out_path(a.proposals_out).c_str()), "saving proposals");
  return take_string(timing);
}

void run_detect(const DetectArgs& a, const Common& common, Manifest& m) {
  const std::string out = out_path(a.out);
  Dets dets;
  const std::string timing = run_cascade(a, common, m, out, &dets);
  check(pc_detections_save(dets, out.c_str()), "saving detections");
  if (!a.timing_out.empty()) write_file(out_path(a.timing_out), timing + "\n");
  std::printf("%zu detections written to %s\n", pc_detections_count(dets), out.c_str());
}

void run_bench(const DetectArgs& a, const Common& common, Manifest& m) {
  const std::string out = out_path(a.timing_out.empty() ? "bench.json" : a.timing_out);
  const json t = json::parse(run_cascade(a, common, m, out, nullptr));
  write_file(out, t.dump(1) + "\n");
  std::printf("ms/window %.4f\nms/image proposals %.4f\nms/image rescoring %.4f\nms/image total %.4f\n",
              t["ms_per_window"].get<double>(), t["ms_per_image_proposals"].get<double>(),
              t["ms_per_image_rescoring"].get<double>(), t["ms_per_image_total"].get<double>());
  std::printf("windows %zu, images %zu, consistent %s\n", t["windows_scored"].get<std::size_t>(),
              t["images"].get<std::size_t>(), t["consistent"].get<bool>() ? "yes" : "no");
}

struct EvalArgs {
  std::string kind, dets, ann, ann_format = "json", csv, svg;
  double match_iou = 0.5;
  int bins = 10;
  double bin_width = 10.0;
  double iou_step = 0.05;
};

void run_evaluate(const EvalArgs& a, Manifest& m) {
  const json opts = a.kind == "heights" ? json{{"bin_width", a.bin_width}}
                    : a.kind == "fp-hist" ? json{{"match_iou", a.match_iou}, {"bins", a.bins}}
                    : a.kind == "recall"  ? json{{"iou_step", a.iou_step}}
                                          : json{{"match_iou", a.match_iou}};
  m.config = {{"kind", a.kind}, {"options", opts}, {"annotation_format", a.ann_format}};
  if (a.kind != "heights" && a.dets.empty()) throw Failure{kUsage, "--dets is required for " + a.kind};
  m.input(a.ann);
  m.input(a.dets);
  const std::string csv = out_path(a.csv.empty() ? a.kind + ".csv" : a.csv);
  const std::string svg = out_path(a.svg);
  m.write(csv);

  std::string ann = a.ann;
  if (a.ann_format == "json" && fs::is_directory(ann)) ann = (fs::path(ann) / "annotations.json").string();
  Dataset frames;
  check(pc_annotations_load(ann.c_str(), a.ann_format.c_str(), frames.out()), "loading annotations " + a.ann);
  Dets dets;
  if (!a.dets.empty()) check(pc_detections_load(a.dets.c_str(), dets.out()), "loading detections " + a.dets);
  Curve curve;
  check(pc_evaluate(a.kind.c_str(), dets, frames, opts.dump().c_str(), curve.out()), "evaluating " + a.kind);

  char* text = nullptr;
  check(pc_curve_csv(curve, &text), "curve CSV");
  write_file(csv, take_string(text));
  if (!svg.empty()) {
    check(pc_curve_svg(curve, &text), "curve SVG");
    write_file(svg, take_string(text));
  }
  check(pc_curve_info_json(curve, &text), "curve info");
  const json info = json::parse(take_string(text));
  if (a.kind == "touching-fp") {
    std::printf("standard %.5f\nfiltered %.5f\ndelta %.5f\nremoved %zu\n", info["mr_standard"].get<double>(),
                info["mr_filtered"].get<double>(), info["delta"].get<double>(), info["removed"].get<std::size_t>());
  } else {
    std::printf("%.5f\n", pc_curve_summary(curve));
  }
}

struct SweepArgs {
  std::string config, out;
};

void run_sweep(const SweepArgs& a, const Common& common, Manifest& m) {
  json cfg = read_config(a.config);
  cfg["version"] = 1;
  m.config = cfg;
  m.seeds["sweep"] = cfg.value("seeds", json::array({1}));
  m.input(a.config);
  const std::string out = out_path(a.out.empty() ? "sweep.csv" : a.out);
  m.write(out);
  char* csv = nullptr;
  check(pc_sweep(cfg.dump().c_str(), common.jobs, &csv), "sweep");
  const std::string text = take_string(csv);
  write_file(out, text);
  std::fputs(text.c_str(), stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pedestrian detection cascade toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pc_version()));
  Common common;
  app.add_option("--jobs,-j", common.jobs, "Worker threads for per-image and per-cell work")
      ->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  s_synth->add_option("--config", synth.config, "Synthetic spec JSON")->check(CLI::ExistingFile);
  s_synth->add_option("--n-frames", synth.n_frames, "Number of frames");
  s_synth->add_option("--seed", synth.seed, "Generator seed");
  s_synth->add_option("--out,-o", synth.out, "Output directory")->required();

  TrainForestArgs tf;
  auto* s_tf = app.add_subcommand("train-forest", "Train the proposal forest");
  s_tf->add_option("--data", tf.data, "Dataset directory")->required();
  s_tf->add_option("--config", tf.config, "Forest config JSON")->check(CLI::ExistingFile);
  s_tf->add_option("--trees", tf.trees, "Number of trees");
  s_tf->add_option("--seed", tf.seed, "Seed for negative sampling");
  s_tf->add_option("--report", tf.report, "Training report JSON");
  s_tf->add_option("--out,-o", tf.out, "Forest JSON")->required();

  CompileArgs cf;
  auto* s_cf = app.add_subcommand("compile-forest", "Compile a forest to a network");
  s_cf->add_option("--forest", cf.forest, "Forest JSON")->required()->check(CLI::ExistingFile);
  s_cf->add_option("--sharpness", cf.sharpness, "Sigmoid sharpness (0: hard step)");
  s_cf->add_option("--out,-o", cf.out, "Network file");
  s_cf->add_flag("--verify", cf.verify, "Compare forest and network on random windows");
  s_cf->add_option("--samples", cf.samples, "Windows to compare");
  s_cf->add_option("--seed", cf.seed, "Verification seed");
  s_cf->add_option("--min-margin", cf.min_margin, "Skip windows with a node this close to its threshold");

  TrainNetArgs tn;
  auto* s_tn = app.add_subcommand("train-net", "Train the convnet rescorer");
  s_tn->add_option("--data", tn.data, "Dataset directory")->required();
  s_tn->add_option("--forest", tn.forest, "Proposal forest")->required()->check(CLI::ExistingFile);
  s_tn->add_option("--config", tn.config, "Rescorer config JSON")->check(CLI::ExistingFile);
  s_tn->add_option("--epochs", tn.epochs, "Epochs at the base learning rate");
  s_tn->add_option("--seed", tn.seed, "Training seed");
  s_tn->add_option("--log", tn.log, "Training log CSV");
  s_tn->add_option("--report", tn.report, "Training report JSON");
  s_tn->add_option("--out,-o", tn.out, "Network file")->required();

  TrainSvmArgs ts;
  auto* s_ts = app.add_subcommand("train-svm", "Train an SVM head on network features");
  s_ts->add_option("--data", ts.data, "Dataset directory")->required();
  s_ts->add_option("--forest", ts.forest, "Proposal forest")->required()->check(CLI::ExistingFile);
  s_ts->add_option("--net", ts.net, "Network file")->required()->check(CLI::ExistingFile);
  s_ts->add_option("--config", ts.config, "SVM config JSON")->check(CLI::ExistingFile);
  s_ts->add_option("--out,-o", ts.out, "SVM JSON")->required();

  DetectArgs det;
  auto add_cascade_options = [&](CLI::App* sc) {
    sc->add_option("--data", det.data, "Dataset directory")->required();
    sc->add_option("--cascade", det.cascade, "Saved cascade directory");
    sc->add_option("--forest", det.forest, "Proposal forest");
    sc->add_option("--rescorer", det.rescorer, "identity, softmax, svm or compiled");
    sc->add_option("--net", det.net, "Network file");
    sc->add_option("--svm", det.svm, "SVM JSON");
    sc->add_option("--config", det.config, "Cascade options JSON")->check(CLI::ExistingFile);
    sc->add_option("--proposals-out", det.proposals_out, "Filtered proposals JSON");
    sc->add_option("--save-cascade", det.save_cascade, "Write the assembled cascade to this directory");
  };
  auto* s_det = app.add_subcommand("detect", "Run the cascade");
  add_cascade_options(s_det);
  s_det->add_option("--timing", det.timing_out, "Timing report JSON");
  s_det->add_option("--out,-o", det.out, "Detections JSON")->required();
  auto* s_bench = app.add_subcommand("bench", "Timing report of the cascade");
  add_cascade_options(s_bench);
  s_bench->add_option("--out,-o", det.timing_out, "Timing report JSON");

  EvalArgs ev;
  auto* s_ev = app.add_subcommand("evaluate", "Evaluate detections");
  s_ev->add_option("kind", ev.kind, "lamr, ap, recall, fp-hist, touching-fp or heights")
      ->required()
      ->check(CLI::IsMember({"lamr", "ap", "recall", "fp-hist", "touching-fp", "heights"}));
  s_ev->add_option("--dets", ev.dets, "Detections JSON")->check(CLI::ExistingFile);
  s_ev->add_option("--ann", ev.ann, "Annotations (JSON file, dataset directory or KITTI labels)")->required();
  s_ev->add_option("--ann-format", ev.ann_format, "json or kitti")->check(CLI::IsMember({"json", "kitti"}));
  s_ev->add_option("--match-iou", ev.match_iou, "Matching IoU threshold");
  s_ev->add_option("--bins", ev.bins, "Histogram bins (fp-hist)");
  s_ev->add_option("--bin-width", ev.bin_width, "Bin width in pixels (heights)");
  s_ev->add_option("--iou-step", ev.iou_step, "IoU grid step (recall)");
  s_ev->add_option("--csv", ev.csv, "Curve CSV (default <kind>.csv)");
  s_ev->add_option("--svg", ev.svg, "Curve SVG");

  SweepArgs sw;
  auto* s_sw = app.add_subcommand("sweep", "Grid of synthetic train/test experiments");
  s_sw->add_option("--config", sw.config, "Sweep config JSON")->required()->check(CLI::ExistingFile);
  s_sw->add_option("--out,-o", sw.out, "Results CSV (default sweep.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  Manifest m;
  m.argv.assign(argv, argv + argc);
  try {
    CLI::App* sc = app.get_subcommands().front();
    m.command = sc->get_name();
    if (sc == s_synth) run_synth(synth, m);
    if (sc == s_tf) run_train_forest(tf, m);
    if (sc == s_cf) return run_compile(cf, m);
    if (sc == s_tn) run_train_net(tn, m);
    if (sc == s_ts) run_train_svm(ts, m);
    if (sc == s_det) run_detect(det, common, m);
    if (sc == s_bench) run_bench(det, common, m);
    if (sc == s_ev) run_evaluate(ev, m);
    if (sc == s_sw) run_sweep(sw, common, m);
  } catch (const Failure& f) {
    std::cerr << "pedcascade " << m.command << ": " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "pedcascade " << m.command << ": " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
