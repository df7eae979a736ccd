#include "ovtok/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ovtok/gradcheck.hpp"
#include "ovtok/tensor_io.hpp"

namespace ovtok {

namespace {

using nlohmann::json;

constexpr const char* kCaptionInstruction = "describe this video .";

struct SampleGraph {
  TokenSequence seq;
  TensorPtr context;
  std::vector<TensorPtr> object_vectors;
  std::vector<int> object_gt_ids;
};

SampleGraph build_sample(Graph& g, const ModelBundle& bundle, const PreparedScene& scene,
                         const TrainSample& sample, bool with_answer) {
  SampleGraph sg;
  // stc_lite = stc_pool + per-token MLP; pooling is cached per scene.
  sg.context = bundle.vidproj.mlp.forward(g, g.leaf(scene.context_pooled));

  if (bundle.use_object_branch) {
    for (const auto& obj : scene.objects) {
      sg.object_vectors.push_back(encode_object(g, g.leaf(obj.pooled), bundle.objproj));
      sg.object_gt_ids.push_back(obj.gt_id >= 0 ? obj.gt_id : obj.track_id);
    }
  }

  const int n_v = sg.context->rows();
  if (!bundle.use_object_branch) {
    // Ablation baseline: no object tokens; a referring <o> stays a plain
    // text token, so the question text carries no object identity.
    sg.seq = assemble_prompt(n_v, {}, sample.instruction, PromptMode::general, -1, bundle.vocab,
                             bundle.decoder.cfg.max_len);
  } else {
    sg.seq = assemble_prompt(n_v, sg.object_gt_ids, sample.instruction, sample.mode,
                             sample.referred_gt_id, bundle.vocab, bundle.decoder.cfg.max_len);
  }
  if (with_answer) append_answer(sg.seq, sample.answer, bundle.vocab);
  return sg;
}

json feat_to_json(const FeaturizerConfig& f) {
  return json{{"patch", f.patch},
              {"dim", f.dim},
              {"height", f.height},
              {"width", f.width},
              {"context_resolution", f.context_resolution}};
}

FeaturizerConfig feat_from_json(const json& j) {
  FeaturizerConfig f;
  f.patch = j.at("patch").get<int>();
  f.dim = j.at("dim").get<int>();
  f.height = j.at("height").get<int>();
  f.width = j.at("width").get<int>();
  f.context_resolution = j.at("context_resolution").get<int>();
  return f;
}

json pipeline_to_json(const PipelineConfig& p) {
  return json{{"theta_a", p.keyframe.theta_a},
              {"theta_b", p.keyframe.theta_b},
              {"tag_sample_count", p.keyframe.tag_sample_count},
              {"tau_track", p.tau_track},
              {"tau_merge", p.tau_merge},
              {"t_o_short", p.t_o_short},
              {"t_o_long", p.t_o_long},
              {"fps", p.fps},
              {"long_video_seconds", p.long_video_seconds}};
}

PipelineConfig pipeline_from_json(const json& j) {
  PipelineConfig p;
  p.keyframe.theta_a = j.at("theta_a").get<int>();
  p.keyframe.theta_b = j.at("theta_b").get<int>();
  p.keyframe.tag_sample_count = j.at("tag_sample_count").get<int>();
  p.tau_track = j.at("tau_track").get<double>();
  p.tau_merge = j.at("tau_merge").get<double>();
  p.t_o_short = j.at("t_o_short").get<int>();
  p.t_o_long = j.at("t_o_long").get<int>();
  p.fps = j.at("fps").get<double>();
  p.long_video_seconds = j.at("long_video_seconds").get<double>();
  return p;
}

}  // namespace

ModelBundle ModelBundle::init(const Vocab& vocab, ProjectorVariant variant, std::uint64_t seed,
                              const DecoderConfig& dec_cfg, const FeaturizerConfig& feat_cfg,
                              int hidden_dim, int context_frames) {
  ModelBundle b;
  b.vocab = vocab;
  b.feat = feat_cfg;
  b.hidden_dim = hidden_dim;
  b.context_frames = context_frames;
  Rng rng(seed ^ 0x6f7646c5c9f0a2d1ULL);
  b.vidproj = StcLiteParams::init(feat_cfg.dim, hidden_dim, dec_cfg.dim, rng);
  b.objproj = ProjectorParams::init(variant, feat_cfg.dim, hidden_dim, dec_cfg.dim, rng);
  b.decoder = DecoderParams::init(vocab.size(), dec_cfg, rng);
  return b;
}

NamedParams ModelBundle::vidproj_params() const {
  NamedParams out;
  vidproj.collect("vidproj", out);
  return out;
}

NamedParams ModelBundle::objproj_params() const {
  NamedParams out;
  objproj.collect("objproj", out);
  return out;
}

NamedParams ModelBundle::decoder_params() const {
  NamedParams out;
  decoder.collect("decoder", out);
  return out;
}

NamedParams ModelBundle::all_params() const {
  NamedParams out;
  vidproj.collect("vidproj", out);
  objproj.collect("objproj", out);
  decoder.collect("decoder", out);
  return out;
}

void save_checkpoint(const std::filesystem::path& base, const ModelBundle& bundle) {
  const NamedParams named = bundle.all_params();
  std::size_t total = 0;
  json params = json::array();
  for (const auto& [name, t] : named) {
    params.push_back({{"name", name}, {"dims", t->dims}, {"offset", total}});
    total += t->size();
  }
  Tensor flat({static_cast<int>(total)});
  std::size_t off = 0;
  for (const auto& [name, t] : named) {
    std::copy(t->data.begin(), t->data.end(), flat.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += t->size();
  }
  write_ortn(base.string() + ".ortn", flat, OrtnType::f64);

  json meta{
      {"config",
       {{"dim", bundle.decoder.cfg.dim},
        {"heads", bundle.decoder.cfg.heads},
        {"layers", bundle.decoder.cfg.layers},
        {"ff_hidden", bundle.decoder.cfg.ff_hidden},
        {"max_len", bundle.decoder.cfg.max_len},
        {"variant", variant_name(bundle.objproj.variant)},
        {"hidden_dim", bundle.hidden_dim},
        {"context_frames", bundle.context_frames},
        {"max_object_tokens", bundle.max_object_tokens},
        {"use_object_branch", bundle.use_object_branch},
        {"feat", feat_to_json(bundle.feat)},
        {"pipeline", pipeline_to_json(bundle.pipeline)}}},
      {"vocab", bundle.vocab.words()},
      {"params", params},
  };
  std::ofstream os(base.string() + ".json", std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open sidecar");
  os << meta.dump(2) << "\n";
  if (!os) throw std::runtime_error("save_checkpoint: sidecar write failed");
}

ModelBundle load_checkpoint(const std::filesystem::path& base) {
  std::ifstream is(base.string() + ".json");
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + base.string() + ".json");
  const json meta = json::parse(is);
  const json& cfg = meta.at("config");

  DecoderConfig dec_cfg;
  dec_cfg.dim = cfg.at("dim").get<int>();
  dec_cfg.heads = cfg.at("heads").get<int>();
  dec_cfg.layers = cfg.at("layers").get<int>();
  dec_cfg.ff_hidden = cfg.at("ff_hidden").get<int>();
  dec_cfg.max_len = cfg.at("max_len").get<int>();

  Vocab vocab = Vocab::from_words(meta.at("vocab").get<std::vector<std::string>>());
  ModelBundle bundle = ModelBundle::init(vocab, variant_from_name(cfg.at("variant").get<std::string>()),
                                         0, dec_cfg, feat_from_json(cfg.at("feat")),
                                         cfg.at("hidden_dim").get<int>(),
                                         cfg.at("context_frames").get<int>());
  bundle.pipeline = pipeline_from_json(cfg.at("pipeline"));
  bundle.max_object_tokens = cfg.at("max_object_tokens").get<int>();
  bundle.use_object_branch = cfg.at("use_object_branch").get<bool>();

  const Tensor flat = read_ortn(base.string() + ".ortn");
  NamedParams named = bundle.all_params();
  std::map<std::string, TensorPtr> by_name;
  for (auto& [name, t] : named) by_name[name] = t;
  for (const auto& p : meta.at("params")) {
    const std::string name = p.at("name").get<std::string>();
    const auto dims = p.at("dims").get<std::vector<int>>();
    const auto offset = p.at("offset").get<std::size_t>();
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("load_checkpoint: unknown param " + name);
    if (it->second->dims != dims) throw std::runtime_error("load_checkpoint: shape mismatch " + name);
    if (offset + it->second->size() > flat.size())
      throw std::runtime_error("load_checkpoint: payload too small");
    std::copy(flat.data.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.data.begin() + static_cast<std::ptrdiff_t>(offset + it->second->size()),
              it->second->data.begin());
  }
  return bundle;
}

PreparedScene prepare_scene(const LoadedScene& scene, const ModelBundle& bundle) {
  if (scene.spec.height != bundle.feat.height || scene.spec.width != bundle.feat.width)
    throw std::invalid_argument("prepare_scene: scene resolution does not match featurizer");

  OracleDetector det(scene.masks);
  OracleSegmenter seg(scene.masks);
  static const Lexicon lexicon = Lexicon::from_lines({
      "circle: disc", "square: box", "triangle: wedge", "red: crimson", "green: emerald",
      "blue: azure", "yellow: gold", "purple: violet", "orange: amber",
  });
  VideoInput input;
  input.id = scene.id;
  input.frames = &scene.frames;
  input.raw_tags = scene.tags;
  const MaskSet ms = run_pipeline(input, det, seg, lexicon, bundle.pipeline);

  const auto context_idx = sample_context_frames(scene.spec.frames, bundle.context_frames);
  const FeatureMap fm = featurize_video(scene.frames, context_idx, bundle.feat, scene.id);

  PreparedScene prepared;
  prepared.id = scene.id;
  prepared.caption = scene.caption;
  prepared.qa = scene.qa;
  prepared.true_object_count = static_cast<int>(scene.masks.size());
  prepared.context_pooled = stc_pool(fm);
  prepared.context_t = fm.t / 2;
  prepared.context_h = fm.h / 2;
  prepared.context_w = fm.w / 2;

  // Ground-truth identity per track via first-frame IoU (exact on disjoint scenes).
  std::map<int, int> track_to_gt;
  for (const auto& track : ms.tracks) {
    double best = 0.0;
    int best_gt = -1;
    for (std::size_t j = 0; j < scene.masks.size(); ++j) {
      const auto& gt = scene.masks[j][static_cast<std::size_t>(track.first().frame)];
      if (gt.empty_mask()) continue;
      const double iou = mask_iou(track.first().mask, gt);
      if (iou > best) {
        best = iou;
        best_gt = static_cast<int>(j);
      }
    }
    track_to_gt[track.id] = best >= 0.5 ? best_gt : -1;
  }

  auto pooled = pool_object_features(ms, fm, bundle.max_object_tokens);
  for (auto& obj : pooled) {
    PreparedObject po;
    po.track_id = obj.id;
    po.gt_id = track_to_gt.count(obj.id) ? track_to_gt[obj.id] : -1;
    po.first_frame = obj.first_frame;
    po.frame_count = obj.frame_count;
    po.total_area = obj.total_area;
    po.pooled = std::move(obj.pooled);
    prepared.objects.push_back(std::move(po));
  }
  return prepared;
}

std::string stage_name(TrainStage stage) {
  switch (stage) {
    case TrainStage::stage1: return "1";
    case TrainStage::stage2: return "2";
    case TrainStage::stage3: return "3";
    case TrainStage::refer_ft: return "refer";
  }
  return "3";
}

TrainStage stage_from_name(const std::string& name) {
  if (name == "1") return TrainStage::stage1;
  if (name == "2") return TrainStage::stage2;
  if (name == "3") return TrainStage::stage3;
  if (name == "refer") return TrainStage::refer_ft;
  throw std::invalid_argument("unknown stage: " + name);
}

std::string TrainConfig::to_json() const {
  json j{{"stage", stage_name(stage)},
         {"learning_rate", learning_rate},
         {"warmup_ratio", warmup_ratio},
         {"epochs", epochs},
         {"batch_size", batch_size},
         {"seed", seed},
         {"max_object_tokens", max_object_tokens},
         {"variant", variant}};
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  TrainConfig cfg;
  cfg.stage = stage_from_name(j.at("stage").get<std::string>());
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.warmup_ratio = j.at("warmup_ratio").get<double>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("max_object_tokens")) cfg.max_object_tokens = j.at("max_object_tokens").get<int>();
  if (j.contains("variant")) cfg.variant = j.at("variant").get<std::string>();
  return cfg;
}

TrainResult train_stage(ModelBundle& bundle, const TrainConfig& cfg,
                        const std::vector<PreparedScene>& scenes,
                        const std::vector<TrainSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("train_stage: empty dataset");
  NamedParams trainable;
  switch (cfg.stage) {
    case TrainStage::stage1: trainable = bundle.vidproj_params(); break;
    case TrainStage::stage2: trainable = bundle.objproj_params(); break;
    case TrainStage::stage3:
    case TrainStage::refer_ft: trainable = bundle.all_params(); break;
  }
  Adam opt(values_of(trainable));
  opt.state().warmup_ratio = cfg.warmup_ratio;

  const long n = static_cast<long>(samples.size());
  const long steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const long total_steps = steps_per_epoch * cfg.epochs;

  TrainResult result;
  Rng order_rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 0x51ed2701);
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<long> order(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    order_rng.shuffle(order);

    for (long b = 0; b < steps_per_epoch; ++b) {
      opt.zero_grad();
      const long lo = b * cfg.batch_size;
      const long hi = std::min<long>(n, lo + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(hi - lo);
      double batch_loss = 0.0;
      for (long i = lo; i < hi; ++i) {
        const TrainSample& sample = samples[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        const PreparedScene& scene = scenes.at(static_cast<std::size_t>(sample.scene_index));
        Graph g;
        auto sg = build_sample(g, bundle, scene, sample, /*with_answer=*/true);
        auto fwd = decoder_forward(g, sg.seq, bundle.decoder, sg.context, sg.object_vectors);
        auto loss = sequence_loss(g, fwd, sg.seq);
        batch_loss += loss->data[0];
        g.backward(g.scale(loss, inv));
      }
      const double lr = scheduled_lr(step, total_steps, cfg.learning_rate, cfg.warmup_ratio);
      opt.step(lr);
      result.loss_curve.push_back(batch_loss * inv);
      ++step;
    }
  }
  result.steps = total_steps;
  return result;
}

std::string normalize_answer(const std::string& text) {
  std::string out;
  for (char c : text) {
    const char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lc == '.' || lc == '?' || lc == '!' || lc == ',') continue;
    out.push_back(lc);
  }
  std::istringstream is(out);
  std::string word, joined;
  while (is >> word) {
    if (!joined.empty()) joined += " ";
    joined += word;
  }
  return joined;
}

EvalReport evaluate(const ModelBundle& bundle, const std::vector<PreparedScene>& scenes,
                    const std::vector<TrainSample>& eval_set) {
  EvalReport report;
  std::map<std::string, int> kind_correct;
  for (const auto& sample : eval_set) {
    const PreparedScene& scene = scenes.at(static_cast<std::size_t>(sample.scene_index));
    Graph g;
    auto sg = build_sample(g, bundle, scene, sample, /*with_answer=*/false);
    const std::string generated =
        greedy_generate(sg.seq, bundle.decoder, bundle.vocab, sg.context, sg.object_vectors, 8);
    const bool correct = normalize_answer(generated) == normalize_answer(sample.answer);
    const std::string kind =
        sample.task == TaskKind::caption ? "caption" : qa_kind_name(sample.kind);
    ++report.total;
    ++report.per_kind_total[kind];
    if (correct) {
      ++report.correct;
      ++kind_correct[kind];
    }
  }
  report.accuracy = report.total ? static_cast<double>(report.correct) / report.total : 0.0;
  for (const auto& [kind, total] : report.per_kind_total)
    report.per_kind_accuracy[kind] =
        total ? static_cast<double>(kind_correct[kind]) / total : 0.0;
  return report;
}

std::string EvalReport::to_json() const {
  json j{{"total", total}, {"correct", correct}, {"accuracy", accuracy}};
  j["per_kind"] = json::object();
  for (const auto& [kind, acc] : per_kind_accuracy)
    j["per_kind"][kind] = {{"accuracy", acc}, {"total", per_kind_total.at(kind)}};
  return j.dump(2);
}

AttnStudy attn_study(const ModelBundle& bundle, const std::vector<PreparedScene>& scenes,
                     const std::vector<TrainSample>& items) {
  AttnStudy study;
  double chance_sum = 0.0;
  int localized = 0;
  for (const auto& sample : items) {
    const PreparedScene& scene = scenes.at(static_cast<std::size_t>(sample.scene_index));
    Graph g;
    auto sg = build_sample(g, bundle, scene, sample, /*with_answer=*/false);
    if (sg.object_gt_ids.empty()) continue;

    const std::string generated =
        greedy_generate(sg.seq, bundle.decoder, bundle.vocab, sg.context, sg.object_vectors, 8);
    const bool correct = normalize_answer(generated) == normalize_answer(sample.answer);

    TokenSequence with_answer = sg.seq;
    append_answer(with_answer, sample.answer, bundle.vocab);
    const auto weights = attention_report(with_answer, bundle.decoder, sg.context, sg.object_vectors);

    AttnRecord rec;
    rec.scene_id = scene.id;
    rec.question = sample.instruction;
    rec.object_ids = sg.object_gt_ids;
    rec.weights = weights;
    rec.referred_gt_id = sample.referred_gt_id;
    rec.answered_correctly = correct;
    study.records.push_back(rec);

    if (!correct) continue;
    ++study.considered;
    chance_sum += 1.0 / static_cast<double>(weights.size());
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < weights.size(); ++i)
      if (weights[i] > weights[argmax]) argmax = i;
    if (sg.object_gt_ids[argmax] == sample.referred_gt_id) ++localized;
  }
  if (study.considered > 0) {
    study.localization_rate = static_cast<double>(localized) / study.considered;
    study.chance_rate = chance_sum / study.considered;
  }
  return study;
}

std::string AttnStudy::to_json() const {
  json records_json = json::array();
  for (const auto& rec : records) {
    records_json.push_back({{"scene_id", rec.scene_id},
                            {"question", rec.question},
                            {"object_ids", rec.object_ids},
                            {"weights", rec.weights},
                            {"referred", rec.referred_gt_id},
                            {"correct", rec.answered_correctly}});
  }
  json j{{"localization_rate", localization_rate},
         {"chance_rate", chance_rate},
         {"considered", considered},
         {"records", records_json}};
  return j.dump(2);
}

Corpus build_corpus(const CorpusConfig& cfg, const FeaturizerConfig& feat,
                    const PipelineConfig& pipeline, int context_frames, int max_object_tokens) {
  SceneSampler sampler;
  sampler.frames = cfg.frames;
  sampler.height = feat.height;
  sampler.width = feat.width;
  sampler.min_objects = cfg.objects_per_scene;
  sampler.max_objects = cfg.objects_per_scene;
  sampler.palette_size = cfg.objects_per_scene;
  sampler.distinct_colors = true;
  sampler.disjoint = true;
  sampler.noise_tag_rate = cfg.noise_tag_rate;

  // Placeholder bundle: prepare_scene only reads configuration fields.
  ModelBundle prep;
  prep.feat = feat;
  prep.pipeline = pipeline;
  prep.context_frames = context_frames;
  prep.max_object_tokens = max_object_tokens;

  Corpus corpus;
  // "," is the object-slot separator of the general template.
  std::vector<std::string> texts = {object_list_sentence(), kCaptionInstruction, ","};

  const int total_scenes = cfg.caption_scenes + cfg.qa_scenes + cfg.eval_scenes;
  for (int i = 0; i < total_scenes; ++i) {
    const std::uint64_t scene_seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(i);
    SceneTruth truth = generate_scene(sampler.sample(scene_seed));
    truth.qa = standard_qa(truth, scene_seed);

    LoadedScene scene;
    scene.id = "scene_" + std::to_string(i);
    scene.spec = truth.spec;
    scene.frames = truth.frames;
    scene.masks = truth.masks;
    scene.tags = truth.tags;
    scene.caption = truth.caption;
    scene.qa = truth.qa;
    const int scene_index = static_cast<int>(corpus.scenes.size());
    corpus.scenes.push_back(prepare_scene(scene, prep));
    const PreparedScene& prepared = corpus.scenes.back();

    auto gt_present = [&](int gt_id) {
      for (const auto& obj : prepared.objects)
        if (obj.gt_id == gt_id) return true;
      return false;
    };

    Rng rng(scene_seed ^ 0xa5a5a5a5ULL);
    if (i < cfg.caption_scenes) {
      TrainSample s;
      s.scene_index = scene_index;
      s.task = TaskKind::caption;
      s.mode = PromptMode::general;
      s.instruction = kCaptionInstruction;
      s.answer = truth.caption;
      corpus.caption_samples.push_back(s);
      texts.push_back(truth.caption);
      continue;
    }

    const bool is_eval = i >= cfg.caption_scenes + cfg.qa_scenes;

    // Referring color question on a random object.
    {
      const int j = static_cast<int>(rng.index(static_cast<std::uint64_t>(truth.object_count())));
      const QAItem item = make_referring_qa(truth, j, ReferringTemplate::color);
      if (gt_present(j)) {
        TrainSample s;
        s.scene_index = scene_index;
        s.task = TaskKind::qa;
        s.mode = PromptMode::referring;
        s.kind = QAItem::Kind::referring;
        s.referred_gt_id = j;
        s.instruction = item.question;
        s.answer = item.answer;
        (is_eval ? corpus.eval_referring : corpus.qa_samples).push_back(s);
        texts.push_back(item.question);
        texts.push_back(item.answer);
      }
    }

    // Lane-color questions on the general template: the model has to find
    // the described object among all object tokens. Training asks about
    // every object; evaluation asks about one per scene.
    {
      std::vector<int> targets;
      if (is_eval) {
        targets.push_back(static_cast<int>(rng.index(static_cast<std::uint64_t>(truth.object_count()))));
      } else {
        // two random distinct lanes per scene: diversity across scenes beats
        // exhaustive coverage of few scenes
        const int n_obj = truth.object_count();
        const int first = static_cast<int>(rng.index(static_cast<std::uint64_t>(n_obj)));
        targets.push_back(first);
        if (n_obj > 1) {
          int second = static_cast<int>(rng.index(static_cast<std::uint64_t>(n_obj - 1)));
          if (second >= first) ++second;
          targets.push_back(second);
        }
      }
      for (int j : targets) {
        if (!gt_present(j)) continue;
        const QAItem item = make_lane_color_qa(truth, j);
        TrainSample s;
        s.scene_index = scene_index;
        s.task = TaskKind::qa;
        s.mode = PromptMode::general;
        s.kind = QAItem::Kind::object_detail;
        s.referred_gt_id = j;
        s.instruction = item.question;
        s.answer = item.answer;
        (is_eval ? corpus.eval_detail : corpus.qa_samples).push_back(s);
        texts.push_back(s.instruction);
        texts.push_back(s.answer);
      }
    }
  }

  corpus.vocab = Vocab::build(texts);
  return corpus;
}

ModelBundle train_full_model(const Corpus& corpus, ProjectorVariant variant, bool object_branch,
                             std::uint64_t seed, const TrainConfig& stage2_cfg,
                             const TrainConfig& stage3_cfg, const DecoderConfig& dec_cfg,
                             const FeaturizerConfig& feat_cfg, TrainResult* stage3_result) {
  ModelBundle bundle = ModelBundle::init(corpus.vocab, variant, seed, dec_cfg, feat_cfg);
  bundle.use_object_branch = object_branch;

  TrainConfig caption_cfg = stage2_cfg;
  caption_cfg.seed = seed * 31 + 2;
  // Both arms see the caption data: the full model aligns the object
  // projector (stage 2), the baseline pretrains its video projector
  // (stage 1) on the same samples.
  caption_cfg.stage = object_branch ? TrainStage::stage2 : TrainStage::stage1;
  train_stage(bundle, caption_cfg, corpus.scenes, corpus.caption_samples);

  TrainConfig qa_cfg = stage3_cfg;
  qa_cfg.stage = TrainStage::stage3;
  qa_cfg.seed = seed * 31 + 3;
  auto result = train_stage(bundle, qa_cfg, corpus.scenes, corpus.qa_samples);
  if (stage3_result) *stage3_result = std::move(result);
  return bundle;
}

std::string AblationTable::to_json() const {
  json rows_json = json::array();
  for (const auto& row : rows) {
    rows_json.push_back({{"model", row.model},
                         {"seed", row.seed},
                         {"referring_accuracy", row.referring_accuracy},
                         {"overall_accuracy", row.overall_accuracy},
                         {"localization_rate", row.localization_rate}});
  }
  json j{{"rows", rows_json}, {"mean_referring", mean_referring}, {"baseline_delta", baseline_delta}};
  return j.dump(2);
}

AblationTable ablation_suite(const Corpus& corpus, const TrainConfig& stage2_cfg,
                             const TrainConfig& stage3_cfg, const DecoderConfig& dec_cfg,
                             const FeaturizerConfig& feat_cfg, int seeds,
                             const std::vector<ProjectorVariant>& variants) {
  AblationTable table;
  std::map<std::string, std::vector<double>> referring_by_model;

  std::vector<TrainSample> all_eval = corpus.eval_referring;
  all_eval.insert(all_eval.end(), corpus.eval_detail.begin(), corpus.eval_detail.end());

  auto run = [&](const std::string& model, ProjectorVariant variant, bool object_branch,
                 std::uint64_t seed) {
    ModelBundle bundle = train_full_model(corpus, variant, object_branch, seed, stage2_cfg,
                                          stage3_cfg, dec_cfg, feat_cfg);
    AblationRow row;
    row.model = model;
    row.seed = seed;
    row.referring_accuracy = evaluate(bundle, corpus.scenes, corpus.eval_referring).accuracy;
    row.overall_accuracy = evaluate(bundle, corpus.scenes, all_eval).accuracy;
    row.localization_rate = attn_study(bundle, corpus.scenes, corpus.eval_detail).localization_rate;
    table.rows.push_back(row);
    referring_by_model[model].push_back(row.referring_accuracy);
  };

  for (std::uint64_t seed = 1; seed <= static_cast<std::uint64_t>(seeds); ++seed) {
    run("baseline", ProjectorVariant::mlp, /*object_branch=*/false, seed);
    for (auto variant : variants) run(variant_name(variant), variant, true, seed);
  }

  for (const auto& [model, accs] : referring_by_model) {
    double sum = 0.0;
    for (double a : accs) sum += a;
    table.mean_referring[model] = sum / static_cast<double>(accs.size());
  }
  double best_full = 0.0;
  for (const auto& [model, mean] : table.mean_referring)
    if (model != "baseline") best_full = std::max(best_full, mean);
  table.baseline_delta = best_full - table.mean_referring.at("baseline");
  return table;
}

TrainResult refer_finetune(ModelBundle& bundle, const std::vector<PreparedScene>& scenes,
                           const std::vector<TrainSample>& referring, int epochs,
                           const TrainConfig& base_cfg) {
  TrainConfig cfg = base_cfg;
  cfg.stage = TrainStage::refer_ft;
  cfg.epochs = epochs;
  return train_stage(bundle, cfg, scenes, referring);
}

}  // namespace ovtok
