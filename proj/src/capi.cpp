#include "pedcascade/pedcascade.h"

#include "pedcascade/cascade.hpp"
#include "pedcascade/config.hpp"
#include "pedcascade/errors.hpp"
#include "pedcascade/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <string>

using namespace pedcascade;
using nlohmann::json;
namespace fs = std::filesystem;

struct pc_dataset {
  SynthDataset ds;
};
struct pc_forest {
  ForestModel model;
};
struct pc_compiled {
  CompiledNet net;
};
struct pc_net {
  NetModel model;
  ChannelConfig channels{ChannelKind::RGB, 6, false};
};
struct pc_svm {
  LinearSvm svm;
  SvmConfig cfg;
};
struct pc_cascade {
  CascadeConfig cfg;
};
struct pc_detections {
  std::vector<FrameDetections> frames;
};
struct pc_curve {
  EvalCurve curve;
  json info;
};

namespace {

thread_local std::string g_last_error;

template <class F>
pc_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return PC_OK;
  } catch (const DataError& e) {
    g_last_error = e.what();
    return PC_ERR_DATA;
  } catch (const NumericError& e) {
    g_last_error = e.what();
    return PC_ERR_NUMERIC;
  } catch (const json::exception& e) {
    g_last_error = std::string("malformed JSON: ") + e.what();
    return PC_ERR_DATA;
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return PC_ERR_IO;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return PC_ERR_INVALID_ARGUMENT;
  } catch (const std::out_of_range& e) {
    g_last_error = e.what();
    return PC_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return PC_ERR_INTERNAL;
  }
}

template <class T>
void need(const T* p, const char* what) {
  if (p == nullptr) throw std::invalid_argument(std::string(what) + " is NULL");
}

json parse_config(const char* text) {
  if (text == nullptr || *text == '\0') return json::object();
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("config is not valid JSON: ") + e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_string(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

template <class T, class... Args>
void put_handle(T** out, Args&&... args) {
  need(out, "output handle");
  *out = new T{std::forward<Args>(args)...};
}

/// Splits a JSON object into the keys listed and the rest.
json take(json& j, std::initializer_list<const char*> keys) {
  json taken = json::object();
  for (const char* k : keys) {
    if (j.contains(k)) {
      taken[k] = j[k];
      j.erase(k);
    }
  }
  return taken;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("SHA-256 init");
  }
  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw std::runtime_error("SHA-256 update");
  }
  void update_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError(p.string() + ": cannot open");
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) update(buf, static_cast<std::size_t>(in.gcount()));
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md, &n) != 1) throw std::runtime_error("SHA-256 final");
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < n; ++i) {
      s += digits[md[i] >> 4];
      s += digits[md[i] & 15];
    }
    return s;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

ChannelConfig channels_or(const json& j, const char* key, ChannelConfig fallback) {
  return j.contains(key) ? channel_cfg_from_json(j.at(key)) : fallback;
}

}  // namespace

extern "C" {

const char* pc_version(void) { return "1.0.0"; }

const char* pc_last_error(void) { return g_last_error.c_str(); }

void pc_free_string(char* s) { std::free(s); }

const char* pc_status_name(pc_status status) {
  switch (status) {
    case PC_OK: return "ok";
    case PC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PC_ERR_DATA: return "data error";
    case PC_ERR_NUMERIC: return "numeric error";
    case PC_ERR_IO: return "I/O error";
    case PC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

pc_status pc_sha256_path(const char* path, char** hex_out) {
  return guard([&] {
    need(path, "path");
    const fs::path root(path);
    Sha256 h;
    if (fs::is_directory(root)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root));
      std::sort(files.begin(), files.end());
      for (const auto& rel : files) {
        const std::string name = rel.generic_string();
        h.update(name.data(), name.size() + 1);
        h.update_file(root / rel);
      }
    } else {
      h.update_file(root);
    }
    put_string(hex_out, h.hex());
  });
}

// Datasets ------------------------------------------------------------------

pc_status pc_dataset_synth(const char* spec_json, uint64_t seed, pc_dataset** out) {
  return guard([&] {
    const SynthSpec spec = synth_spec_from_json(parse_config(spec_json));
    put_handle(out, synth_dataset(spec, seed));
  });
}

pc_status pc_dataset_load(const char* path, pc_dataset** out) {
  return guard([&] {
    need(path, "path");
    put_handle(out, load_dataset(path));
  });
}

pc_status pc_dataset_load_kitti(const char* image_dir, const char* label_dir, pc_dataset** out) {
  return guard([&] {
    need(image_dir, "image_dir");
    need(label_dir, "label_dir");
    SynthDataset ds;
    ds.frames = load_annotations(label_dir, AnnotationFormat::KittiTxt);
    for (auto& f : ds.frames) {
      fs::path img = fs::path(image_dir) / (f.id + ".ppm");
      if (!fs::exists(img)) img = fs::path(image_dir) / (f.id + ".pgm");
      if (!fs::exists(img)) throw DataError("no .ppm/.pgm image for frame '" + f.id + "' in " + image_dir);
      ds.images.push_back(read_pnm(img));
      f.image = img.string();
    }
    put_handle(out, std::move(ds));
  });
}

pc_status pc_annotations_load(const char* path, const char* format, pc_dataset** out) {
  return guard([&] {
    need(path, "path");
    const std::string fmt = format ? format : "json";
    SynthDataset ds;
    if (fmt == "json") {
      ds.frames = annotations_from_json(read_json_file(path));
    } else if (fmt == "kitti") {
      ds.frames = load_annotations(path, AnnotationFormat::KittiTxt);
    } else {
      throw std::invalid_argument("unknown annotation format '" + fmt + "' (json, kitti)");
    }
    put_handle(out, std::move(ds));
  });
}

pc_status pc_dataset_save(const pc_dataset* ds, const char* dir) {
  return guard([&] {
    need(ds, "dataset");
    need(dir, "dir");
    if (ds->ds.images.size() != ds->ds.frames.size()) throw std::invalid_argument("dataset has no images");
    SynthDataset copy = ds->ds;
    for (std::size_t i = 0; i < copy.frames.size(); ++i) copy.frames[i].image = copy.frames[i].id + ".ppm";
    save_dataset(dir, copy);
  });
}

size_t pc_dataset_size(const pc_dataset* ds) { return ds ? ds->ds.frames.size() : 0; }

pc_status pc_dataset_annotations_json(const pc_dataset* ds, char** json_out) {
  return guard([&] {
    need(ds, "dataset");
    put_string(json_out, annotations_to_json(ds->ds.frames).dump(1) + "\n");
  });
}

pc_status pc_dataset_resample(pc_dataset* ds, int stride) {
  return guard([&] {
    need(ds, "dataset");
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
    SynthDataset out;
    for (std::size_t i = 0; i < ds->ds.frames.size(); i += static_cast<std::size_t>(stride)) {
      out.frames.push_back(ds->ds.frames[i]);
      if (i < ds->ds.images.size()) out.images.push_back(ds->ds.images[i]);
    }
    ds->ds = std::move(out);
  });
}

pc_status pc_dataset_reasonable(pc_dataset* ds, double min_height, int max_occlusion) {
  return guard([&] {
    need(ds, "dataset");
    ds->ds.frames = reasonable_filter(ds->ds.frames, min_height, max_occlusion);
  });
}

void pc_dataset_free(pc_dataset* ds) { delete ds; }

// Forest --------------------------------------------------------------------

pc_status pc_forest_train(const pc_dataset* ds, const char* config_json, pc_forest** out, char** report_json) {
  return guard([&] {
    need(ds, "dataset");
    const ForestStageConfig cfg = forest_stage_from_json(parse_config(config_json));
    ForestStageReport rep;
    ForestModel m = train_proposal_forest(ds->ds.images, ds->ds.frames, cfg, &rep);
    put_string(report_json,
               json{{"positives", rep.positives},
                    {"negatives_per_round", rep.negatives_per_round},
                    {"trees_per_round", rep.trees_per_round},
                    {"config", forest_stage_to_json(cfg)}}
                   .dump());
    put_handle(out, std::move(m));
  });
}

pc_status pc_forest_load(const char* path, pc_forest** out) {
  return guard([&] {
    need(path, "path");
    put_handle(out, load_forest(path));
  });
}

pc_status pc_forest_save(const pc_forest* f, const char* path) {
  return guard([&] {
    need(f, "forest");
    need(path, "path");
    save_forest(path, f->model);
  });
}

size_t pc_forest_trees(const pc_forest* f) { return f ? f->model.trees.size() : 0; }

void pc_forest_free(pc_forest* f) { delete f; }

// Compiled forest -----------------------------------------------------------

pc_status pc_compile_forest(const pc_forest* f, double sharpness, pc_compiled** out) {
  return guard([&] {
    need(f, "forest");
    CompiledNet net = compile(f->model);
    if (sharpness > 0.0 && sharpness != std::numeric_limits<double>::infinity()) net = soften(net, sharpness);
    put_handle(out, std::move(net));
  });
}

pc_status pc_compiled_verify(const pc_forest* f, const pc_compiled* c, const char* options_json,
                             char** report_json) {
  return guard([&] {
    need(f, "forest");
    need(c, "compiled net");
    const json j = parse_config(options_json);
    check_keys(j, {"samples", "seed", "min_margin"}, "verify options");
    EquivalenceOptions o;
    o.samples = j.value("samples", o.samples);
    o.seed = j.value("seed", o.seed);
    o.min_margin = j.value("min_margin", o.min_margin);
    const EquivalenceReport r = verify_equivalence(f->model, c->net, o);
    put_string(report_json, json{{"windows", r.windows},
                                 {"skipped", r.skipped},
                                 {"decision_mismatches", r.decision_mismatches},
                                 {"max_score_diff", r.max_score_diff},
                                 {"exact", r.exact()}}
                                .dump());
  });
}

pc_status pc_compiled_save_net(const pc_compiled* c, const char* path) {
  return guard([&] {
    need(c, "compiled net");
    need(path, "path");
    save_net(path, to_net_model(c->net));
  });
}

void pc_compiled_free(pc_compiled* c) { delete c; }

// Net -----------------------------------------------------------------------

pc_status pc_net_train(const pc_dataset* ds, const pc_forest* f, const char* config_json, pc_net** out,
                       char** report_json) {
  return guard([&] {
    need(ds, "dataset");
    need(f, "forest");
    json j = parse_config(config_json);
    const json extra = take(j, {"sliding"});
    RescorerTrainConfig cfg = rescorer_train_from_json(j);
    cfg.svm_head = false;
    SlidingWindowConfig sliding;
    sliding.score_threshold = -std::numeric_limits<double>::infinity();
    if (extra.contains("sliding")) sliding = sliding_from_json(extra["sliding"], sliding);
    RescorerTrainReport rep;
    Rescorer r = train_rescorer(ds->ds.images, ds->ds.frames, f->model, sliding, cfg, &rep);
    put_string(report_json, json{{"positives", rep.positives},
                                 {"negatives", rep.negatives},
                                 {"ignored", rep.ignored},
                                 {"batches", rep.batches},
                                 {"ratio_violations", rep.ratio_violations},
                                 {"parameters", r.net.parameter_count()},
                                 {"config", rescorer_train_to_json(cfg)},
                                 {"sliding", sliding_to_json(sliding)}}
                                .dump());
    put_handle(out, std::move(r.net), cfg.channels);
  });
}

pc_status pc_net_load(const char* path, pc_net** out) {
  return guard([&] {
    need(path, "path");
    put_handle(out, load_net(path));
  });
}

pc_status pc_net_save(const pc_net* n, const char* path) {
  return guard([&] {
    need(n, "net");
    need(path, "path");
    save_net(path, n->model);
  });
}

pc_status pc_net_spec_json(const pc_net* n, char** json_out) {
  return guard([&] {
    need(n, "net");
    put_string(json_out, net_spec_to_json(n->model.spec).dump(1) + "\n");
  });
}

pc_status pc_net_log_csv(const pc_net* n, char** csv_out) {
  return guard([&] {
    need(n, "net");
    put_string(csv_out, training_log_csv(n->model));
  });
}

size_t pc_net_parameters(const pc_net* n) { return n ? n->model.parameter_count() : 0; }

void pc_net_free(pc_net* n) { delete n; }

// SVM -----------------------------------------------------------------------

pc_status pc_svm_train(const pc_dataset* ds, const pc_forest* f, const pc_net* n, const char* config_json,
                       pc_svm** out) {
  return guard([&] {
    need(ds, "dataset");
    need(f, "forest");
    need(n, "net");
    json j = parse_config(config_json);
    const json extra = take(j, {"train_proposal_avg", "sliding", "channels"});
    const SvmConfig cfg = svm_config_from_json(j);
    SlidingWindowConfig sliding;
    sliding.score_threshold = -std::numeric_limits<double>::infinity();
    if (extra.contains("sliding")) sliding = sliding_from_json(extra["sliding"], sliding);
    const double avg = extra.value("train_proposal_avg", RescorerTrainConfig{}.train_proposal_avg);
    const ChannelConfig channels = channels_or(extra, "channels", n->channels);
    const FrameDets props = filter_proposals(propose(ds->ds.images, f->model, sliding), avg).filtered;
    LinearSvm svm = train_svm_head(ds->ds.images, ds->ds.frames, props, n->model, channels, f->model.geometry, cfg);
    put_handle(out, std::move(svm), cfg);
  });
}

pc_status pc_svm_load(const char* path, pc_svm** out) {
  return guard([&] {
    need(path, "path");
    SvmConfig cfg;
    LinearSvm s = svm_from_json(read_json_file(path), &cfg);
    put_handle(out, std::move(s), cfg);
  });
}

pc_status pc_svm_save(const pc_svm* s, const char* path) {
  return guard([&] {
    need(s, "svm");
    need(path, "path");
    write_text_file(path, svm_to_json(s->svm, s->cfg).dump(1) + "\n");
  });
}

void pc_svm_free(pc_svm* s) { delete s; }

// Cascade -------------------------------------------------------------------

pc_status pc_cascade_create(const pc_forest* f, const char* rescorer, const pc_net* n, const pc_svm* s,
                            const char* options_json, pc_cascade** out) {
  return guard([&] {
    need(f, "forest");
    json j = parse_config(options_json);
    const json extra = take(j, {"net_channels", "sharpness"});
    CascadeConfig cfg;
    cfg.proposal_model = f->model;
    cfg.sliding.score_threshold = -std::numeric_limits<double>::infinity();
    cascade_options_from_json(j, cfg);
    const RescorerKind kind = parse_rescorer_kind(rescorer ? rescorer : "identity");
    switch (kind) {
      case RescorerKind::Identity: break;
      case RescorerKind::SvmHead:
        need(s, "svm");
        cfg.rescorer.svm = s->svm;
        cfg.rescorer.svm_cfg = s->cfg;
        [[fallthrough]];
      case RescorerKind::Softmax:
        need(n, "net");
        cfg.rescorer.net = n->model;
        cfg.rescorer.net_channels = channels_or(extra, "net_channels", n->channels);
        break;
      case RescorerKind::Compiled: {
        const double k = extra.value("sharpness", std::numeric_limits<double>::infinity());
        cfg.rescorer = compiled_rescorer(f->model, k > 0.0 ? k : std::numeric_limits<double>::infinity());
        break;
      }
    }
    cfg.rescorer.kind = kind;
    cfg.validate();
    put_handle(out, std::move(cfg));
  });
}

pc_status pc_cascade_load(const char* dir, pc_cascade** out) {
  return guard([&] {
    need(dir, "dir");
    put_handle(out, load_cascade(dir));
  });
}

pc_status pc_cascade_save(const pc_cascade* c, const char* dir) {
  return guard([&] {
    need(c, "cascade");
    need(dir, "dir");
    save_cascade(dir, c->cfg);
  });
}

namespace {

std::vector<FrameDetections> with_ids(const FrameDets& dets, const std::vector<FrameAnnotation>& frames) {
  std::vector<FrameDetections> out;
  for (std::size_t i = 0; i < dets.size(); ++i) out.push_back({frames[i].id, dets[i]});
  return out;
}

}  // namespace

pc_status pc_cascade_run(const pc_cascade* c, const pc_dataset* ds, int jobs, pc_detections** detections,
                         pc_detections** proposals, char** timing_json) {
  return guard([&] {
    need(c, "cascade");
    need(ds, "dataset");
    if (ds->ds.images.size() != ds->ds.frames.size()) throw std::invalid_argument("dataset has no images");
    std::vector<std::string> ids;
    for (const auto& f : ds->ds.frames) ids.push_back(f.id);
    const CascadeResult r = run_cascade(ds->ds.images, c->cfg, std::max(1, jobs), ids);
    if (detections != nullptr) *detections = new pc_detections{with_ids(r.detections, ds->ds.frames)};
    if (proposals != nullptr) *proposals = new pc_detections{with_ids(r.proposals, ds->ds.frames)};
    json t = r.timing.to_json();
    t["consistent"] = r.timing.consistent();
    t["proposal_threshold"] =
        std::isfinite(r.proposal_threshold) ? json(r.proposal_threshold) : json(nullptr);
    put_string(timing_json, t.dump());
  });
}

void pc_cascade_free(pc_cascade* c) { delete c; }

// Detections ----------------------------------------------------------------

pc_status pc_detections_load(const char* path, pc_detections** out) {
  return guard([&] {
    need(path, "path");
    put_handle(out, load_detections(path));
  });
}

pc_status pc_detections_save(const pc_detections* d, const char* path) {
  return guard([&] {
    need(d, "detections");
    need(path, "path");
    save_detections(path, d->frames);
  });
}

size_t pc_detections_count(const pc_detections* d) {
  if (d == nullptr) return 0;
  std::size_t n = 0;
  for (const auto& f : d->frames) n += f.detections.size();
  return n;
}

void pc_detections_free(pc_detections* d) { delete d; }

// Evaluation ----------------------------------------------------------------

pc_status pc_evaluate(const char* kind, const pc_detections* dets, const pc_dataset* annotations,
                      const char* options_json, pc_curve** out) {
  return guard([&] {
    need(kind, "kind");
    need(annotations, "annotations");
    const json o = parse_config(options_json);
    check_keys(o, {"match_iou", "bins", "bin_width", "iou_step"}, "evaluation options");
    const std::string k = kind;
    const auto& frames = annotations->ds.frames;
    if (k == "heights") {
      EvalCurve c = height_histogram(frames, o.value("bin_width", 10.0));
      put_handle(out, std::move(c), json{{"kind", c.kind}, {"summary", c.summary}, {"meta", c.meta}});
      return;
    }
    need(dets, "detections");
    const FrameDets d = align_by_id(dets->frames, frames);
    LamrConfig lc;
    lc.match_iou = o.value("match_iou", lc.match_iou);
    EvalCurve c;
    json info;
    if (k == "lamr") {
      c = lamr(d, frames, lc);
    } else if (k == "ap") {
      c = average_precision(d, frames, 11, lc.match_iou);
    } else if (k == "recall") {
      c = recall_vs_iou(d, frames, iou_grid(o.value("iou_step", 0.05)));
    } else if (k == "fp-hist") {
      c = fp_overlap_histogram(d, frames, o.value("bins", 10), lc.match_iou);
    } else if (k == "touching-fp") {
      const TouchingFpResult t = touching_fp_analysis(d, frames, lc);
      c = t.filtered;
      info = {{"mr_standard", t.mr_standard}, {"mr_filtered", t.mr_filtered}, {"delta", t.delta},
              {"removed", t.removed}};
    } else {
      throw std::invalid_argument("unknown evaluation '" + k + "' (lamr, ap, recall, fp-hist, touching-fp, heights)");
    }
    if (info.is_null()) info = json::object();
    info["kind"] = c.kind;
    info["summary"] = c.summary;
    info["meta"] = c.meta;
    put_handle(out, std::move(c), std::move(info));
  });
}

double pc_curve_summary(const pc_curve* c) { return c ? c->curve.summary : 0.0; }

pc_status pc_curve_csv(const pc_curve* c, char** csv_out) {
  return guard([&] {
    need(c, "curve");
    put_string(csv_out, curve_csv(c->curve));
  });
}

pc_status pc_curve_svg(const pc_curve* c, char** svg_out) {
  return guard([&] {
    need(c, "curve");
    put_string(svg_out, curve_svg(c->curve));
  });
}

pc_status pc_curve_info_json(const pc_curve* c, char** json_out) {
  return guard([&] {
    need(c, "curve");
    put_string(json_out, c->info.dump());
  });
}

void pc_curve_free(pc_curve* c) { delete c; }

// Experiments ---------------------------------------------------------------

pc_status pc_sweep(const char* config_json, int jobs, char** csv_out) {
  return guard([&] {
    const SweepConfig cfg = sweep_config_from_json(parse_config(config_json));
    const auto cells = run_sweep(cfg, std::max(1, jobs));
    put_string(csv_out, sweep_csv(cfg.axes, cells));
  });
}

pc_status pc_experiment(const char* config_json, char** result_json) {
  return guard([&] {
    const ExperimentConfig cfg = experiment_from_json(parse_config(config_json));
    const ExperimentResult r = run_experiment(cfg);
    put_string(result_json, r.to_json().dump());
  });
}

}  // extern "C"
