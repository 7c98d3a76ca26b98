#include "pedcascade/cascade.hpp"

#include "pedcascade/errors.hpp"
#include "pedcascade/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

namespace pedcascade {

namespace fs = std::filesystem;

std::string to_string(RescorerKind kind) {
  switch (kind) {
    case RescorerKind::Identity: return "identity";
    case RescorerKind::Softmax: return "softmax";
    case RescorerKind::SvmHead: return "svm";
    case RescorerKind::Compiled: return "compiled";
  }
  return "?";
}

RescorerKind parse_rescorer_kind(const std::string& s) {
  for (RescorerKind k : {RescorerKind::Identity, RescorerKind::Softmax, RescorerKind::SvmHead, RescorerKind::Compiled}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown rescorer kind '" + s + "'");
}

Rescorer compiled_rescorer(const ForestModel& forest, double sharpness) {
  Rescorer r;
  r.kind = RescorerKind::Compiled;
  r.compiled_forest = forest;
  r.compiled = compile(forest);
  if (sharpness != std::numeric_limits<double>::infinity()) r.compiled = soften(r.compiled, sharpness);
  return r;
}

void CascadeConfig::validate() const {
  proposal_model.validate(channel_count(proposal_model.channel_cfg));
  sliding.validate();
  if (!(proposal_filter_avg > 0.0)) throw std::invalid_argument("proposal_filter_avg must be > 0");
  if (!(final_nms_iou >= 0.0 && final_nms_iou <= 1.0)) throw std::invalid_argument("final_nms_iou must be in [0, 1]");
  switch (rescorer.kind) {
    case RescorerKind::Identity: break;
    case RescorerKind::Softmax:
    case RescorerKind::SvmHead: {
      rescorer.net.validate();
      const Shape in = rescorer.net.spec.input;
      if (in.c != channel_count(rescorer.net_channels) || in.h != static_cast<int>(proposal_model.geometry.window_h) ||
          in.w != static_cast<int>(proposal_model.geometry.window_w)) {
        throw std::invalid_argument("rescorer net input does not match its channel config and the model window");
      }
      if (rescorer.kind == RescorerKind::Softmax && !rescorer.net.spec.ends_with_softmax()) {
        throw std::invalid_argument("softmax rescorer needs a net ending in softmax");
      }
      if (rescorer.kind == RescorerKind::SvmHead) {
        const int layer = rescorer.net.spec.layer_index(rescorer.svm_cfg.feature_layer);
        const auto shapes = rescorer.net.spec.shapes();
        if (shapes[static_cast<std::size_t>(layer) + 1].size() != rescorer.svm.w.size()) {
          throw std::invalid_argument("SVM weight length does not match the feature layer");
        }
      }
      break;
    }
    case RescorerKind::Compiled:
      if (!(rescorer.compiled.channel_cfg == proposal_model.channel_cfg)) {
        throw std::invalid_argument("compiled rescorer and proposal forest use different channel configs");
      }
      break;
  }
}

bool TimingReport::consistent() const {
  const double tol = 1e-6;
  if (std::abs(ms_per_image_total - (ms_per_image_proposals + ms_per_image_rescoring)) > tol) return false;
  if (windows_scored > 0 &&
      std::abs(ms_per_window * static_cast<double>(windows_scored) -
               ms_per_image_rescoring * static_cast<double>(images)) > tol * static_cast<double>(windows_scored)) {
    return false;
  }
  return ms_per_window >= 0.0 && ms_per_image_proposals >= 0.0 && ms_per_image_rescoring >= 0.0;
}

nlohmann::json TimingReport::to_json() const {
  return {{"ms_per_window", ms_per_window},
          {"ms_per_image_proposals", ms_per_image_proposals},
          {"ms_per_image_rescoring", ms_per_image_rescoring},
          {"ms_per_image_total", ms_per_image_total},
          {"windows_scored", windows_scored},
          {"images", images}};
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string frame_name(std::span<const std::string> ids, std::size_t i) {
  return i < ids.size() ? ids[i] : "#" + std::to_string(i);
}

template <class F>
void with_frame(std::span<const std::string> ids, std::size_t i, F&& f) {
  try {
    f();
  } catch (const DataError& e) {
    throw DataError("frame " + frame_name(ids, i) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("frame " + frame_name(ids, i) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("frame " + frame_name(ids, i) + ": " + e.what());
  } catch (const std::out_of_range& e) {
    throw std::out_of_range("frame " + frame_name(ids, i) + ": " + e.what());
  }
}

FrameDets propose_timed(std::span<const Image> images, const ForestModel& forest, const SlidingWindowConfig& sliding,
                        int jobs, std::vector<double>& ms, std::span<const std::string> ids) {
  FrameDets out(images.size());
  ms.assign(images.size(), 0.0);
  parallel_for(images.size(), jobs, [&](std::size_t i) {
    with_frame(ids, i, [&] {
      const auto t0 = Clock::now();
      out[i] = detect(images[i], forest, sliding);
      ms[i] = ms_since(t0);
    });
  });
  return out;
}

}  // namespace

FrameDets propose(std::span<const Image> images, const ForestModel& forest, const SlidingWindowConfig& sliding,
                  int jobs) {
  std::vector<double> ms;
  return propose_timed(images, forest, sliding, jobs, ms, {});
}

double rescore(const Rescorer& r, const Image& img, const ChannelStack* forest_stack, const Detection& det) {
  switch (r.kind) {
    case RescorerKind::Identity: return det.score;
    case RescorerKind::Softmax: {
      const auto x = window_tensor(extract_window(img, det.box, WindowGeometry{}), r.net_channels);
      return forward(r.net, x).score;
    }
    case RescorerKind::SvmHead: {
      const auto x = window_tensor(extract_window(img, det.box, WindowGeometry{}), r.net_channels);
      return r.svm.score(layer_output(r.net, x, r.svm_cfg.feature_layer));
    }
    case RescorerKind::Compiled: {
      if (forest_stack == nullptr) throw std::invalid_argument("compiled rescorer needs the forest channel stack");
      return evaluate(r.compiled, *forest_stack, window_for_box(det.box, r.compiled.geometry));
    }
  }
  return det.score;
}

CascadeResult run_cascade(std::span<const Image> images, const CascadeConfig& cfg, int jobs,
                          std::span<const std::string> ids) {
  cfg.validate();
  CascadeResult res;
  if (images.empty()) return res;

  std::vector<double> prop_ms;
  const FrameDets raw = propose_timed(images, cfg.proposal_model, cfg.sliding, jobs, prop_ms, ids);
  ProposalFilter filtered = filter_proposals(raw, cfg.proposal_filter_avg);
  res.proposal_threshold = filtered.threshold;
  res.proposals = std::move(filtered.filtered);
  res.raw_proposals = raw;

  std::vector<double> rescore_ms(images.size(), 0.0);
  res.detections.resize(images.size());
  parallel_for(images.size(), jobs, [&](std::size_t i) {
    with_frame(ids, i, [&] {
      const auto t0 = Clock::now();
      std::optional<ChannelStack> stack;
      if (cfg.rescorer.kind == RescorerKind::Compiled && !res.proposals[i].empty()) {
        stack = compute_channels(images[i], cfg.proposal_model.channel_cfg);
      }
      std::vector<Detection> scored = res.proposals[i];
      for (Detection& d : scored) {
        const double s = rescore(cfg.rescorer, images[i], stack ? &*stack : nullptr, d);
        if (!std::isfinite(s)) throw NumericError("rescorer produced a non-finite score");
        if (cfg.score_blend == ScoreBlend::Replace) d.score = s;
      }
      if (cfg.final_nms) {
        res.detections[i] = nms(scored, cfg.final_nms_iou);
      } else {
        for (std::size_t k : score_order(scored)) res.detections[i].push_back(scored[k]);
      }
      rescore_ms[i] = ms_since(t0);
    });
  });

  TimingReport& t = res.timing;
  t.images = images.size();
  double prop_total = 0.0, rescore_total = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    prop_total += prop_ms[i];
    rescore_total += rescore_ms[i];
    t.windows_scored += res.proposals[i].size();
  }
  const double n = static_cast<double>(t.images);
  t.ms_per_image_proposals = prop_total / n;
  t.ms_per_image_rescoring = rescore_total / n;
  t.ms_per_image_total = t.ms_per_image_proposals + t.ms_per_image_rescoring;
  t.ms_per_window = t.windows_scored > 0 ? rescore_total / static_cast<double>(t.windows_scored) : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Training

void ForestStageConfig::validate() const {
  if (options.n_trees < 1) throw std::invalid_argument("forest n_trees must be >= 1");
  if (bootstrap_rounds < 0 || random_negatives_per_frame < 0 || hard_negatives_per_frame < 0) {
    throw std::invalid_argument("forest stage counts must be >= 0");
  }
  if (square_sizes.empty() || grid < 1) throw std::invalid_argument("forest candidate grid is empty");
  sliding.validate();
}

namespace {

Box mirror(const Box& b, int width) { return {width - b.x - b.w, b.y, b.w, b.h}; }

std::pair<double, double> gt_height_range(const std::vector<FrameAnnotation>& frames) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& f : frames)
    for (const Box& g : f.gt) {
      lo = std::min(lo, g.h);
      hi = std::max(hi, g.h);
    }
  if (!(hi > 0.0)) return {50.0, 100.0};
  return {lo, hi};
}

bool is_background(const Box& b, const FrameAnnotation& f, double neg_iou) {
  for (const Box& g : f.gt)
    if (iou(b, g) >= neg_iou) return false;
  for (const Box& g : f.ignore)
    if (iou(b, g) >= neg_iou) return false;
  return true;
}

void check_training_inputs(std::span<const Image> images, const std::vector<FrameAnnotation>& frames) {
  if (images.size() != frames.size()) throw std::invalid_argument("images and annotations differ in count");
  if (images.empty()) throw std::invalid_argument("no training frames");
}

}  // namespace

ForestModel train_proposal_forest(std::span<const Image> images, const std::vector<FrameAnnotation>& frames,
                                  const ForestStageConfig& cfg, ForestStageReport* report) {
  cfg.validate();
  check_training_inputs(images, frames);
  const WindowGeometry geom;
  const auto candidates = squares_candidates(channel_count(cfg.channels), geom, cfg.square_sizes, cfg.grid);
  const auto [min_h, max_h] = gt_height_range(frames);
  std::mt19937_64 rng(cfg.seed);

  FeatureRows rows;
  ForestStageReport rep;
  auto add_window = [&](const ChannelStack& stack, const Box& box, bool positive) {
    const WindowPlacement p = window_for_box(box, geom);
    if (!window_fits(stack, p, geom)) return false;
    rows.add(stack, p, candidates, positive);
    return true;
  };

  // Positives (and mirrored positives), then random negatives.
  for (std::size_t i = 0; i < images.size(); ++i) {
    with_frame({}, i, [&] {
      if (frames[i].gt.empty()) return;
      const ChannelStack stack = compute_channels(images[i], cfg.channels);
      for (const Box& g : frames[i].gt) rep.positives += add_window(stack, g, true);
      if (cfg.flip_positives) {
        const ChannelStack flipped = compute_channels(flip_horizontal(images[i]), cfg.channels);
        for (const Box& g : frames[i].gt) rep.positives += add_window(flipped, mirror(g, images[i].width), true);
      }
    });
  }
  std::size_t negatives = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    with_frame({}, i, [&] {
      const ChannelStack stack = compute_channels(images[i], cfg.channels);
      const auto boxes = random_negatives(frames[i], images[i].width, images[i].height,
                                          cfg.random_negatives_per_frame, min_h, max_h, cfg.neg_iou, rng, geom);
      for (const Box& b : boxes) negatives += add_window(stack, b, false);
    });
  }
  rep.negatives_per_round.push_back(negatives);

  ForestTrainResult result = train_forest(rows, candidates, cfg.options, cfg.channels, geom);
  rep.trees_per_round.push_back(result.model.trees.size());

  SlidingWindowConfig mining = cfg.sliding;
  mining.score_threshold = -std::numeric_limits<double>::infinity();
  for (int round = 0; round < cfg.bootstrap_rounds; ++round) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      with_frame({}, i, [&] {
        const ChannelStack stack = compute_channels(images[i], cfg.channels);
        int added = 0;
        for (const Detection& d : detect(stack, result.model, mining)) {
          if (added >= cfg.hard_negatives_per_frame) break;
          if (!is_background(d.box, frames[i], cfg.neg_iou)) continue;
          if (add_window(stack, d.box, false)) {
            ++added;
            ++negatives;
          }
        }
      });
    }
    rep.negatives_per_round.push_back(negatives);
    result = train_forest(rows, candidates, cfg.options, cfg.channels, geom);
    rep.trees_per_round.push_back(result.model.trees.size());
  }
  if (report != nullptr) *report = rep;
  return result.model;
}

void RescorerTrainConfig::validate() const {
  policy.validate();
  train.validate();
  if (!(train_proposal_avg > 0.0)) throw std::invalid_argument("train_proposal_avg must be > 0");
  if (random_negatives_per_frame < 0) throw std::invalid_argument("random_negatives_per_frame must be >= 0");
  if (ratio) ratio->validate();
  if (svm_head) svm.validate();
}

namespace {

struct WindowSample {
  std::size_t frame;
  Box box;
  int label;
};

}  // namespace

Rescorer train_rescorer(std::span<const Image> images, const std::vector<FrameAnnotation>& frames,
                        const ForestModel& forest, const SlidingWindowConfig& sliding, const RescorerTrainConfig& cfg,
                        RescorerTrainReport* report) {
  cfg.validate();
  check_training_inputs(images, frames);
  RescorerTrainReport rep;

  const FrameDets raw = propose(images, forest, sliding);
  const ProposalFilter kept = filter_proposals(raw, cfg.train_proposal_avg);
  const auto [min_h, max_h] = gt_height_range(frames);
  std::mt19937_64 rng(cfg.train.seed ^ 0x5bd1e995ULL);

  std::vector<WindowSample> samples;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    std::vector<Box> props;
    for (const Detection& d : kept.filtered[f]) props.push_back(d.box);
    for (const Box& g : frames[f].gt) samples.push_back({f, g, 1});
    const auto labels = label_proposals(props, frames[f].gt, cfg.policy, frames[f].ignore);
    for (std::size_t k = 0; k < props.size(); ++k) {
      if (labels[k] == ProposalLabel::Positive) {
        samples.push_back({f, props[k], 1});
      } else if (labels[k] == ProposalLabel::Negative && cfg.negatives == NegativeSource::Proposals) {
        samples.push_back({f, props[k], 0});
      } else if (labels[k] == ProposalLabel::Ignore) {
        ++rep.ignored;
      }
    }
    if (cfg.negatives == NegativeSource::Random) {
      for (const Box& b : random_negatives(frames[f], images[f].width, images[f].height,
                                           cfg.random_negatives_per_frame, min_h, max_h, cfg.policy.neg_iou, rng)) {
        samples.push_back({f, b, 0});
      }
    }
  }
  std::vector<int> labels;
  for (const auto& s : samples) {
    labels.push_back(s.label);
    (s.label ? rep.positives : rep.negatives)++;
  }
  if (rep.positives == 0 || rep.negatives == 0) {
    throw std::invalid_argument("rescorer training needs both positive and negative windows");
  }

  const WindowGeometry geom = forest.geometry;
  const NetSpec spec = NetSpec::cifarnet(channel_count(cfg.channels), cfg.filters, cfg.kernels, cfg.fc_units,
                                         {PoolKind::Max, PoolKind::Mean, PoolKind::Mean},
                                         static_cast<int>(geom.window_h), static_cast<int>(geom.window_w));
  NetModel net = init_net(spec, cfg.train.init_sigma, cfg.train.first_layer_sigma, cfg.train.seed);
  BatchSampler sampler(labels, cfg.ratio, cfg.train.batch, cfg.train.seed);
  const ChannelConfig channels = cfg.channels;
  auto input = [&](std::size_t id, bool flip, std::vector<double>& out) {
    const WindowSample& s = samples[id];
    Image crop = extract_window(images[s.frame], s.box, geom);
    if (flip) crop = flip_horizontal(crop);
    out = window_tensor(crop, channels);
  };
  net = train(std::move(net), sampler, input, cfg.train);
  rep.batches = sampler.history().size();
  rep.ratio_violations = sampler.ratio_violations();

  Rescorer r;
  r.kind = RescorerKind::Softmax;
  r.net = std::move(net);
  r.net_channels = cfg.channels;

  if (cfg.svm_head) {
    r.svm = train_svm_head(images, frames, kept.filtered, r.net, r.net_channels, geom, cfg.svm);
    r.svm_cfg = cfg.svm;
    r.kind = RescorerKind::SvmHead;
  }
  if (report != nullptr) *report = rep;
  return r;
}

LinearSvm train_svm_head(std::span<const Image> images, const std::vector<FrameAnnotation>& frames,
                         const FrameDets& proposals, const NetModel& net, const ChannelConfig& channels,
                         const WindowGeometry& geom, const SvmConfig& cfg) {
  cfg.validate();
  check_training_inputs(images, frames);
  if (proposals.size() != frames.size()) throw std::invalid_argument("proposals and annotations differ in count");
  LabelingPolicy policy;
  policy.neg_iou = cfg.neg_overlap;
  std::vector<std::vector<double>> feats;
  std::vector<int> ys;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    std::vector<Box> props;
    for (const Detection& d : proposals[f]) props.push_back(d.box);
    for (const LabeledBox& lb : training_boxes(props, frames[f], policy)) {
      const auto x = window_tensor(extract_window(images[f], lb.box, geom), channels);
      feats.push_back(layer_output(net, x, cfg.feature_layer));
      ys.push_back(lb.label);
    }
  }
  return train_svm(feats, ys, cfg);
}

CascadeConfig train_cascade(std::span<const Image> images, const std::vector<FrameAnnotation>& frames,
                            const CascadeTrainConfig& cfg) {
  CascadeConfig out;
  out.proposal_model = train_proposal_forest(images, frames, cfg.forest);
  out.sliding = cfg.forest.sliding;
  out.rescorer = train_rescorer(images, frames, out.proposal_model, out.sliding, cfg.rescorer);
  out.proposal_filter_avg = cfg.proposal_filter_avg;
  out.final_nms_iou = cfg.final_nms_iou;
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

nlohmann::json sliding_to_json(const SlidingWindowConfig& c) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"stride", c.stride},
          {"scale_step", c.scale_step},
          {"min_height", c.min_height},
          {"max_height", finite_or_null(c.max_height)},
          {"score_threshold", finite_or_null(c.score_threshold)},
          {"nms_iou", c.nms_iou},
          {"apply_nms", c.apply_nms}};
}

SlidingWindowConfig sliding_from_json(const nlohmann::json& j, SlidingWindowConfig c) {
  check_keys(j, {"stride", "scale_step", "min_height", "max_height", "score_threshold", "nms_iou", "apply_nms"},
             "sliding-window config");
  try {
    c.stride = j.value("stride", c.stride);
    c.scale_step = j.value("scale_step", c.scale_step);
    c.min_height = j.value("min_height", c.min_height);
    if (j.contains("max_height")) {
      c.max_height = j["max_height"].is_null() ? std::numeric_limits<double>::infinity()
                                               : j["max_height"].get<double>();
    }
    if (j.contains("score_threshold")) {
      c.score_threshold = j["score_threshold"].is_null() ? -std::numeric_limits<double>::infinity()
                                                         : j["score_threshold"].get<double>();
    }
    c.nms_iou = j.value("nms_iou", c.nms_iou);
    c.apply_nms = j.value("apply_nms", c.apply_nms);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed sliding-window config: ") + e.what());
  }
  c.validate();
  return c;
}

void save_cascade(const fs::path& dir, const CascadeConfig& cfg) {
  cfg.validate();
  fs::create_directories(dir);
  save_forest(dir / "forest.json", cfg.proposal_model);
  nlohmann::json r{{"kind", to_string(cfg.rescorer.kind)}};
  switch (cfg.rescorer.kind) {
    case RescorerKind::Identity: break;
    case RescorerKind::SvmHead:
      write_text_file(dir / "svm.json", svm_to_json(cfg.rescorer.svm, cfg.rescorer.svm_cfg).dump(1) + "\n");
      r["svm"] = "svm.json";
      [[fallthrough]];
    case RescorerKind::Softmax:
      save_net(dir / "net.pcnet", cfg.rescorer.net);
      r["net"] = "net.pcnet";
      r["net_channels"] = channel_cfg_to_json(cfg.rescorer.net_channels);
      break;
    case RescorerKind::Compiled:
      save_forest(dir / "compiled_forest.json", cfg.rescorer.compiled_forest);
      r["compiled_forest"] = "compiled_forest.json";
      r["sharpness"] = cfg.rescorer.compiled.hard() ? nlohmann::json(nullptr)
                                                    : nlohmann::json(cfg.rescorer.compiled.sharpness);
      break;
  }
  const nlohmann::json manifest{{"format", "pedcascade.cascade"},
                                {"version", 1},
                                {"proposal_model", "forest.json"},
                                {"sliding", sliding_to_json(cfg.sliding)},
                                {"proposal_filter_avg", cfg.proposal_filter_avg},
                                {"final_nms_iou", cfg.final_nms_iou},
                                {"final_nms", cfg.final_nms},
                                {"score_blend", cfg.score_blend == ScoreBlend::Replace ? "replace" : "none"},
                                {"rescorer", r}};
  write_text_file(dir / "cascade.json", manifest.dump(1) + "\n");
}

CascadeConfig load_cascade(const fs::path& dir) {
  const nlohmann::json m = read_json_file(dir / "cascade.json");
  CascadeConfig cfg;
  try {
    if (m.at("format").get<std::string>() != "pedcascade.cascade" || m.at("version").get<int>() != 1) {
      throw DataError("not a version 1 cascade manifest");
    }
    cfg.proposal_model = load_forest(dir / m.at("proposal_model").get<std::string>());
    cfg.sliding = sliding_from_json(m.at("sliding"));
    cfg.proposal_filter_avg = m.at("proposal_filter_avg").get<double>();
    cfg.final_nms_iou = m.at("final_nms_iou").get<double>();
    cfg.final_nms = m.value("final_nms", true);
    const std::string blend = m.value("score_blend", std::string("replace"));
    if (blend != "replace" && blend != "none") throw DataError("unknown score_blend '" + blend + "'");
    cfg.score_blend = blend == "replace" ? ScoreBlend::Replace : ScoreBlend::None;
    const auto& r = m.at("rescorer");
    cfg.rescorer.kind = parse_rescorer_kind(r.at("kind").get<std::string>());
    switch (cfg.rescorer.kind) {
      case RescorerKind::Identity: break;
      case RescorerKind::SvmHead:
        cfg.rescorer.svm = svm_from_json(read_json_file(dir / r.at("svm").get<std::string>()), &cfg.rescorer.svm_cfg);
        [[fallthrough]];
      case RescorerKind::Softmax:
        cfg.rescorer.net = load_net(dir / r.at("net").get<std::string>());
        cfg.rescorer.net_channels = channel_cfg_from_json(r.at("net_channels"));
        break;
      case RescorerKind::Compiled: {
        const double k = r.value("sharpness", nlohmann::json(nullptr)).is_null()
                             ? std::numeric_limits<double>::infinity()
                             : r.at("sharpness").get<double>();
        cfg.rescorer = compiled_rescorer(load_forest(dir / r.at("compiled_forest").get<std::string>()), k);
        break;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed cascade manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("inconsistent cascade manifest: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("inconsistent cascade: ") + e.what());
  }
  return cfg;
}

}  // namespace pedcascade
