#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "garssl/dataset.hpp"
#include "garssl/error.hpp"
#include "garssl/geometry.hpp"
#include "garssl/mllm_client.hpp"
#include "garssl/prompts.hpp"
#include "garssl/schemas.hpp"

namespace garssl {

struct PipelineConfig {
  int analysis_trials = 5;       // n
  double tau_av = 0.5;           // audio-visual consistency threshold
  double tau_aud = 0.75;         // audio confidence threshold
  double temp_generation = 0.2;  // Stage 2 needs stochastic decoding; 1/3 favor stability
  double temp_analysis = 0.7;
  double temp_refine = 0.2;
  int max_output_tokens = 768;
  int retry_budget = 3;          // max parse attempts per model call (R)
  double max_delta_px = 32.0;    // per-side refinement clip, at 224-px width
  int max_duet_classes = 2;      // K
  std::string mode = "single";   // fallback when a manifest line lacks mode; manifest wins
  std::string prompt_variant = "ours";
  std::string model = "qwen2.5-omni-7b";

  double max_delta_for(int image_width) const {
    return max_delta_px * static_cast<double>(image_width) / 224.0;
  }
};

/// Stage-1 bundle: initial box, visual description, audio class and its
/// self-reported confidence.
struct GenerationOutput {
  BoundingBox b_init;
  std::string description;
  std::string audio_class;
  double audio_confidence = 0.0;
};

struct AnalysisTrialRec {
  int trial = 0;  // 1..n
  AnalysisReply reply;
};

/// Aggregate of the n analysis trials: mean consistency, frequency-ranked
/// tags, score-averaged anchors, strict-majority keep.
struct ConsensusResult {
  double av_consistency_mean = 0.0;
  std::vector<std::string> role_tags;  // <= 4, ranked by (count desc, name asc)
  std::vector<AnchorVote> anchors;     // <= 5, ranked by (mean desc, name asc)
  bool keep_final = false;
  int trials_used = 0;
};

struct GatingDecision {
  bool gate = false;  // conjunction of the three conditions, exactly
  bool keep_ok = false;
  bool consistency_ok = false;
  bool audio_ok = false;
  double tau_av = 0.0;
  double tau_aud = 0.0;
};

struct CallRecord {
  std::string stage;  // request-key stage string (may carry @class suffix)
  int trial = 0;
  int attempts = 0;
  std::string request_digest;
  bool from_cache = false;
  double latency_ms = 0.0;
};

struct RefinementOutcome {
  BoundingBox box;
  bool changed = false;
  std::string source;  // skip | reply_bbox | reply_unchanged | ops | fallback
  std::optional<RefinementOp> op;
  std::string refined_description;
};

/// Per-class slice of a sample run (single-source samples have exactly one).
struct ClassEntry {
  std::string class_token;
  double confidence = 0.0;  // AP ranking score: mean S_av when Stage 2 ran, else s_aud
  GenerationOutput generation;
  std::vector<AnalysisTrialRec> trials;
  bool degraded = false;  // some trials were dropped as unparseable
  ConsensusResult consensus;
  GatingDecision gating;
  RefinementOutcome refinement;
  std::vector<RepairNote> notes;
  std::vector<CallRecord> calls;
};

struct FailureInfo {
  std::string stage;
  std::string code;
  std::string message;
};

struct SampleResult {
  std::string id;
  std::string mode;
  bool failed = false;
  std::optional<FailureInfo> failure;
  std::vector<std::string> media_warnings;
  std::vector<ClassEntry> entries;
  double timing_ms = 0.0;
};

struct SampleMedia {
  MediaAttachment image;
  MediaAttachment audio;
  std::vector<std::string> warnings;
};

/// Generation -> Analysis (xn, consensus) -> gating -> conditional
/// Refinement, per sample. Duet samples run the per-class protocol after a
/// single multi-class audio call.
class Pipeline {
 public:
  Pipeline(std::shared_ptr<MllmClient> client, PromptLibrary prompts, PipelineConfig cfg);

  SampleResult run_sample(const SampleManifest& sample) const;

  Result<SampleMedia> prepare_media(const SampleManifest& sample) const;

  /// Single-source Stage 1: two independent model calls (localization with
  /// image+audio, classification with audio only), each retried up to R.
  Result<GenerationOutput> run_generation(const SampleManifest& sample, const SampleMedia& media,
                                          ClassEntry& entry) const;

  /// n stochastic Stage-2 trials with distinct request keys. Individual
  /// unparseable trials are dropped while at least ceil(n/2) survive.
  Result<std::vector<AnalysisTrialRec>> run_analysis(const SampleManifest& sample,
                                                     const SampleMedia& media,
                                                     const GenerationOutput& gen,
                                                     const std::string& class_suffix,
                                                     ClassEntry& entry) const;

  static Result<ConsensusResult> consensus(const std::vector<AnalysisTrialRec>& trials);

  static GatingDecision gate(const ConsensusResult& cons, const GenerationOutput& gen,
                             const PipelineConfig& cfg);

  /// Gate open -> pure pass-through of b_init with zero model calls.
  /// Gate closed -> one Stage-3 call; acceptance order: valid reply bbox,
  /// else parsable ops applied to b_init, else fall back to b_init.
  Result<RefinementOutcome> run_refinement(const SampleManifest& sample, const SampleMedia& media,
                                           const GenerationOutput& gen,
                                           const ConsensusResult& cons, const GatingDecision& gd,
                                           const std::string& class_suffix,
                                           ClassEntry& entry) const;

  const PipelineConfig& config() const { return cfg_; }
  const PromptLibrary& prompts() const { return prompts_; }

 private:
  struct CallSpec;
  Result<ParsedReply> call_stage(const CallSpec& spec, ClassEntry& entry) const;

  std::shared_ptr<MllmClient> client_;
  PromptLibrary prompts_;
  PipelineConfig cfg_;
};

nlohmann::json to_json(const SampleResult& result);
Result<SampleResult> sample_result_from_json(const nlohmann::json& j);

}  // namespace garssl
