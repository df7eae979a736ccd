#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ovtok/decoder.hpp"
#include "ovtok/featurize.hpp"
#include "ovtok/maskpipe.hpp"
#include "ovtok/objproj.hpp"
#include "ovtok/optim.hpp"
#include "ovtok/scene.hpp"
#include "ovtok/vidproj.hpp"

namespace ovtok {

/// Everything trainable plus the frozen featurizer configuration.
struct ModelBundle {
  FeaturizerConfig feat;
  PipelineConfig pipeline;
  int context_frames = 8;       // t_v
  int hidden_dim = 64;          // d_h of the projectors
  int max_object_tokens = 64;
  bool use_object_branch = true;

  Vocab vocab;
  StcLiteParams vidproj;
  ProjectorParams objproj;
  DecoderParams decoder;

  static ModelBundle init(const Vocab& vocab, ProjectorVariant variant, std::uint64_t seed,
                          const DecoderConfig& dec_cfg = DecoderConfig{},
                          const FeaturizerConfig& feat_cfg = FeaturizerConfig{},
                          int hidden_dim = 64, int context_frames = 8);

  NamedParams vidproj_params() const;
  NamedParams objproj_params() const;
  NamedParams decoder_params() const;
  NamedParams all_params() const;
};

void save_checkpoint(const std::filesystem::path& base, const ModelBundle& bundle);
ModelBundle load_checkpoint(const std::filesystem::path& base);

/// One cached scene: pipeline output pooled against the feature grid.
struct PreparedObject {
  int track_id = 0;
  int gt_id = -1;  // ground-truth object id recovered by first-frame IoU
  int first_frame = 0;
  int frame_count = 0;
  long total_area = 0;
  Tensor pooled;  // [k x D]
};

struct PreparedScene {
  std::string id;
  Tensor context_pooled;  // [N_v x D] from stc_pool
  int context_t = 0, context_h = 0, context_w = 0;
  std::vector<PreparedObject> objects;  // capped and ordered
  std::string caption;
  std::vector<QAItem> qa;
  int true_object_count = 0;
};

PreparedScene prepare_scene(const LoadedScene& scene, const ModelBundle& bundle);

enum class TaskKind { caption, qa };

struct TrainSample {
  int scene_index = -1;  // into the prepared-scene list
  TaskKind task = TaskKind::qa;
  PromptMode mode = PromptMode::general;
  QAItem::Kind kind = QAItem::Kind::general;
  int referred_gt_id = -1;
  std::string instruction;
  std::string answer;
};

enum class TrainStage { stage1, stage2, stage3, refer_ft };

std::string stage_name(TrainStage stage);
TrainStage stage_from_name(const std::string& name);

/// Stage-wise freezing: stage 1 trains the video projector only; stage 2
/// the object projector only; stage 3 and referring fine-tune train both
/// projectors and the decoder. The featurizer has no parameters.
struct TrainConfig {
  TrainStage stage = TrainStage::stage3;
  double learning_rate = 1e-3;
  double warmup_ratio = 0.03;
  int epochs = 1;
  int batch_size = 8;
  std::uint64_t seed = 0;
  int max_object_tokens = 64;
  std::string variant = "mlp";

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct TrainResult {
  std::vector<double> loss_curve;  // one entry per optimizer step
  long steps = 0;
};

/// Deterministic single-threaded training; only the stage's unfrozen
/// parameters change.
TrainResult train_stage(ModelBundle& bundle, const TrainConfig& cfg,
                        const std::vector<PreparedScene>& scenes,
                        const std::vector<TrainSample>& samples);

std::string normalize_answer(const std::string& text);

struct EvalReport {
  int total = 0;
  int correct = 0;
  double accuracy = 0.0;
  std::map<std::string, double> per_kind_accuracy;
  std::map<std::string, int> per_kind_total;

  std::string to_json() const;
};

/// Greedy generation scored by normalized exact match.
EvalReport evaluate(const ModelBundle& bundle, const std::vector<PreparedScene>& scenes,
                    const std::vector<TrainSample>& eval_set);

struct AttnRecord {
  std::string scene_id;
  std::string question;
  std::vector<int> object_ids;   // gt ids in slot order
  std::vector<double> weights;   // normalized, parallel to object_ids
  int referred_gt_id = -1;
  bool answered_correctly = false;
};

struct AttnStudy {
  std::vector<AttnRecord> records;
  double localization_rate = 0.0;   // over correctly answered items
  double chance_rate = 0.0;         // mean of 1/N over the same items
  int considered = 0;

  std::string to_json() const;
};

/// Per-question normalized object-token attention and the localization
/// rate: how often the argmax-attention object is the referred one.
AttnStudy attn_study(const ModelBundle& bundle, const std::vector<PreparedScene>& scenes,
                     const std::vector<TrainSample>& items);

/// Synthetic training corpus: caption scenes feed stages 1-2, QA scenes
/// feed stage 3, eval scenes are held out. Scenes hold `objects_per_scene`
/// disjoint objects with distinct colors from a palette of the same size,
/// so color answers are balanced and not inferable from question text.
struct CorpusConfig {
  int caption_scenes = 220;
  int qa_scenes = 420;
  int eval_scenes = 120;
  int frames = 16;
  int objects_per_scene = 4;
  std::uint64_t seed = 0;
  double noise_tag_rate = 0.3;
};

struct Corpus {
  std::vector<PreparedScene> scenes;
  std::vector<TrainSample> caption_samples;  // stages 1-2
  std::vector<TrainSample> qa_samples;       // stage 3
  std::vector<TrainSample> eval_referring;   // held-out referring color items
  std::vector<TrainSample> eval_detail;      // held-out unique-shape color items
  Vocab vocab;
};

/// Builds scenes in memory (no disk round trip) and prepares them against
/// the bundle's featurizer configuration.
Corpus build_corpus(const CorpusConfig& cfg, const FeaturizerConfig& feat,
                    const PipelineConfig& pipeline, int context_frames, int max_object_tokens);

/// The stage-2 + stage-3 recipe behind the ablation table and acceptance
/// runs. Baseline models (use_object_branch = false) run the caption data
/// as stage 1 instead, so both arms see identical data.
ModelBundle train_full_model(const Corpus& corpus, ProjectorVariant variant, bool object_branch,
                             std::uint64_t seed, const TrainConfig& stage2_cfg,
                             const TrainConfig& stage3_cfg, const DecoderConfig& dec_cfg,
                             const FeaturizerConfig& feat_cfg, TrainResult* stage3_result = nullptr);

struct AblationRow {
  std::string model;  // "baseline" or a variant name
  std::uint64_t seed = 0;
  double referring_accuracy = 0.0;
  double overall_accuracy = 0.0;
  double localization_rate = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::map<std::string, double> mean_referring;  // model -> mean accuracy
  double baseline_delta = 0.0;  // best full-model mean minus baseline mean

  std::string to_json() const;
};

AblationTable ablation_suite(const Corpus& corpus, const TrainConfig& stage2_cfg,
                             const TrainConfig& stage3_cfg, const DecoderConfig& dec_cfg,
                             const FeaturizerConfig& feat_cfg, int seeds,
                             const std::vector<ProjectorVariant>& variants);

/// Referring fine-tune: stage-3 freezing over the referring subset.
TrainResult refer_finetune(ModelBundle& bundle, const std::vector<PreparedScene>& scenes,
                           const std::vector<TrainSample>& referring, int epochs,
                           const TrainConfig& base_cfg);

}  // namespace ovtok
