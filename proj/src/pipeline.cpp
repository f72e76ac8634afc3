#include "garssl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "garssl/util.hpp"

namespace garssl {

using nlohmann::json;

namespace {

bool retryable_parse_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoStructuredBlock:
    case ErrorCode::MalformedBlock:
    case ErrorCode::MissingField:
    case ErrorCode::WrongType:
    case ErrorCode::DegenerateBox:
    case ErrorCode::NonFinite:
      return true;
    default:
      return false;
  }
}

FailureInfo failure_from(const Error& err) {
  FailureInfo info;
  auto colon = err.message.find(':');
  info.stage = colon == std::string::npos ? "pipeline" : err.message.substr(0, colon);
  info.code = error_code_name(err.code);
  info.message = err.message;
  return info;
}

std::string int_str(double v) { return std::to_string(static_cast<long long>(std::llround(v))); }

}  // namespace

struct Pipeline::CallSpec {
  const SampleManifest* sample = nullptr;
  StageTag template_stage = StageTag::GenLoc;
  std::string stage_key;
  int trial = 0;
  PromptContext full_ctx;
  double temperature = 0.2;
  const MediaAttachment* image = nullptr;
  const MediaAttachment* audio = nullptr;
  int max_attempts = 1;
  // Extra validation run under the retry loop (e.g. box validation); a
  // rejection counts as a parse failure and burns an attempt.
  std::function<Status(ParsedReply&)> accept;
};

Pipeline::Pipeline(std::shared_ptr<MllmClient> client, PromptLibrary prompts, PipelineConfig cfg)
    : client_(std::move(client)), prompts_(std::move(prompts)), cfg_(std::move(cfg)) {}

Result<ParsedReply> Pipeline::call_stage(const CallSpec& spec, ClassEntry& entry) const {
  auto fail = [&](ErrorCode code, const std::string& detail) {
    return make_error(code, spec.stage_key + ": " + detail);
  };

  // Bind only what the template actually uses; leftover bindings would be
  // an ExtraBinding harness bug under strict rendering.
  PromptContext ctx;
  for (const auto& name : prompts_.placeholders(spec.template_stage)) {
    auto it = spec.full_ctx.find(name);
    if (it != spec.full_ctx.end()) ctx.emplace(it->first, it->second);
  }
  auto prompt = prompts_.render(spec.template_stage, ctx, /*strict=*/true);
  if (!prompt) return fail(prompt.error().code, prompt.error().message);

  MultimodalRequest req;
  req.user_text = std::move(prompt).value();
  if (spec.image) req.image = *spec.image;
  if (spec.audio) req.audio = *spec.audio;
  req.decoding.temperature = spec.temperature;
  req.decoding.max_tokens = cfg_.max_output_tokens;
  req.model = cfg_.model;
  req.key.sample_id = spec.sample->id;
  req.key.stage = spec.stage_key;
  req.key.trial = spec.trial;
  req.finalize_key();

  CallRecord record;
  record.stage = spec.stage_key;
  record.trial = spec.trial;
  record.request_digest = req.key.prompt_digest;

  std::optional<Error> last_error;
  for (int attempt = 1; attempt <= std::max(1, spec.max_attempts); ++attempt) {
    record.attempts = attempt;
    auto response = client_->complete(req, attempt);
    if (!response) {
      entry.calls.push_back(record);
      return fail(response.error().code, response.error().message);
    }
    record.from_cache = response.value().from_cache;
    record.latency_ms += response.value().latency_ms;

    auto run_attempt = [&]() -> Result<ParsedReply> {
      auto block = extract_structured_block(response.value().text);
      if (!block) return block.error();
      auto parsed = parse_reply(spec.template_stage, block.value());
      if (!parsed) return parsed.error();
      ParsedReply reply = std::move(parsed).value();
      if (spec.accept) {
        auto verdict = spec.accept(reply);
        if (!verdict) return verdict.error();
      }
      return reply;
    };

    auto outcome = run_attempt();
    if (outcome) {
      entry.calls.push_back(record);
      ParsedReply reply = std::move(outcome).value();
      for (RepairNote& n : reply.notes) {
        n.path = spec.stage_key + ":" + n.path;
        entry.notes.push_back(n);
      }
      return reply;
    }
    if (!retryable_parse_error(outcome.error().code)) {
      entry.calls.push_back(record);
      return fail(outcome.error().code, outcome.error().message);
    }
    last_error = outcome.error();
  }
  entry.calls.push_back(record);
  return fail(last_error->code, "retries exhausted: " + last_error->message);
}

Result<SampleMedia> Pipeline::prepare_media(const SampleManifest& sample) const {
  auto image = encode_media(sample.image_path, MediaKind::Image, sample.dims);
  if (!image) {
    return make_error(image.error().code, "media: " + image.error().message);
  }
  auto audio = encode_media(sample.audio_path, MediaKind::Audio);
  if (!audio) {
    return make_error(audio.error().code, "media: " + audio.error().message);
  }
  SampleMedia media{std::move(image).value(), std::move(audio).value(), {}};
  if (media.image.warning) media.warnings.push_back(*media.image.warning);
  return media;
}

Result<GenerationOutput> Pipeline::run_generation(const SampleManifest& sample,
                                                  const SampleMedia& media,
                                                  ClassEntry& entry) const {
  GenerationOutput gen;

  CallSpec loc;
  loc.sample = &sample;
  loc.template_stage = StageTag::GenLoc;
  loc.stage_key = "gen_loc";
  loc.full_ctx = {{"W", std::to_string(sample.dims.width)},
                  {"H", std::to_string(sample.dims.height)}};
  loc.temperature = cfg_.temp_generation;
  loc.image = &media.image;
  loc.audio = &media.audio;
  loc.max_attempts = cfg_.retry_budget;
  loc.accept = [&](ParsedReply& reply) -> Status {
    const auto& lr = std::get<LocalizationReply>(reply.value);
    bool clamped = false;
    auto box = validate_box(lr.bbox_raw, sample.dims, &clamped);
    if (!box) return box.error();
    if (clamped) {
      reply.notes.push_back(RepairNote{"bbox", json(lr.bbox_raw).dump(),
                                       json(box.value().coords()).dump(), "clamp_to_image"});
    }
    gen.b_init = box.value();
    gen.description = lr.description;
    return ok_status();
  };
  auto loc_reply = call_stage(loc, entry);
  if (!loc_reply) return loc_reply.error();

  // Stage-1B judges the audio alone; no image attachment by design.
  CallSpec aud;
  aud.sample = &sample;
  aud.template_stage = StageTag::GenAud;
  aud.stage_key = "gen_aud";
  aud.temperature = cfg_.temp_generation;
  aud.audio = &media.audio;
  aud.max_attempts = cfg_.retry_budget;
  auto aud_reply = call_stage(aud, entry);
  if (!aud_reply) return aud_reply.error();

  const auto& ar = std::get<AudioReply>(aud_reply.value().value);
  gen.audio_class = ar.audio_class;
  gen.audio_confidence = ar.audio_confidence;
  return gen;
}

Result<std::vector<AnalysisTrialRec>> Pipeline::run_analysis(const SampleManifest& sample,
                                                             const SampleMedia& media,
                                                             const GenerationOutput& gen,
                                                             const std::string& class_suffix,
                                                             ClassEntry& entry) const {
  const int n = cfg_.analysis_trials;
  std::vector<AnalysisTrialRec> survivors;
  std::optional<Error> last_drop;
  for (int i = 1; i <= n; ++i) {
    CallSpec spec;
    spec.sample = &sample;
    spec.template_stage = StageTag::Analysis;
    spec.stage_key = "analysis" + class_suffix;
    spec.trial = i;
    spec.full_ctx = {{"previous_bbox", bind_bbox(gen.b_init)},
                     {"audio_class", gen.audio_class},
                     {"audio_confidence_score", bind_number(gen.audio_confidence)},
                     {"W", std::to_string(sample.dims.width)},
                     {"H", std::to_string(sample.dims.height)}};
    spec.temperature = cfg_.temp_analysis;
    spec.image = &media.image;
    spec.audio = &media.audio;
    spec.max_attempts = cfg_.retry_budget;
    auto reply = call_stage(spec, entry);
    if (reply) {
      survivors.push_back(AnalysisTrialRec{i, std::get<AnalysisReply>(reply.value().value)});
    } else if (retryable_parse_error(reply.error().code)) {
      last_drop = reply.error();
    } else {
      return reply.error();  // backend trouble fails the stage outright
    }
  }
  const int required = (n + 1) / 2;
  if (static_cast<int>(survivors.size()) < required) {
    std::ostringstream os;
    os << "analysis" << class_suffix << ": only " << survivors.size() << "/" << n
       << " trials parseable (need " << required << ")";
    if (last_drop) os << "; last: " << last_drop->message;
    return make_error(ErrorCode::StageFailure, os.str());
  }
  entry.degraded = static_cast<int>(survivors.size()) < n;
  return survivors;
}

Result<ConsensusResult> Pipeline::consensus(const std::vector<AnalysisTrialRec>& trials) {
  if (trials.empty()) {
    return make_error(ErrorCode::EmptyTrials, "consensus needs at least one trial");
  }
  ConsensusResult out;
  out.trials_used = static_cast<int>(trials.size());

  // (i) scores averaged. Summing in sorted order makes the result exactly
  // invariant under trial permutation.
  std::vector<double> scores;
  scores.reserve(trials.size());
  for (const auto& t : trials) scores.push_back(t.reply.av_consistency);
  std::sort(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += s;
  out.av_consistency_mean = sum / static_cast<double>(scores.size());

  // (ii) top-4 role tags by occurrence frequency; a tag counts once per
  // trial; count ties break lexicographically.
  std::map<std::string, int> tag_counts;
  for (const auto& t : trials) {
    std::set<std::string> distinct(t.reply.role_tags.begin(), t.reply.role_tags.end());
    for (const auto& tag : distinct) ++tag_counts[tag];
  }
  std::vector<std::pair<std::string, int>> ranked_tags(tag_counts.begin(), tag_counts.end());
  std::sort(ranked_tags.begin(), ranked_tags.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [tag, _] : ranked_tags) {
    if (static_cast<int>(out.role_tags.size()) >= kMaxRoleTags) break;
    out.role_tags.push_back(tag);
  }

  // (iii) identical anchors averaged over their occurrences; top-5 by mean.
  std::map<std::string, std::vector<double>> anchor_scores;
  for (const auto& t : trials) {
    for (const auto& v : t.reply.anchor_votes) anchor_scores[v.anchor].push_back(v.score);
  }
  std::vector<AnchorVote> ranked_anchors;
  for (auto& [name, values] : anchor_scores) {
    std::sort(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) s += v;
    ranked_anchors.push_back(AnchorVote{name, s / static_cast<double>(values.size())});
  }
  std::sort(ranked_anchors.begin(), ranked_anchors.end(),
            [](const AnchorVote& a, const AnchorVote& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.anchor < b.anchor;
            });
  if (ranked_anchors.size() > static_cast<size_t>(kMaxAnchors)) {
    ranked_anchors.resize(kMaxAnchors);
  }
  out.anchors = std::move(ranked_anchors);

  // (iv) strict majority; 2*sum > n avoids float comparison entirely.
  int keep_votes = 0;
  for (const auto& t : trials) keep_votes += t.reply.keep ? 1 : 0;
  out.keep_final = 2 * keep_votes > out.trials_used;
  return out;
}

GatingDecision Pipeline::gate(const ConsensusResult& cons, const GenerationOutput& gen,
                              const PipelineConfig& cfg) {
  GatingDecision gd;
  gd.tau_av = cfg.tau_av;
  gd.tau_aud = cfg.tau_aud;
  gd.keep_ok = cons.keep_final;
  gd.consistency_ok = cons.av_consistency_mean >= cfg.tau_av;
  gd.audio_ok = gen.audio_confidence >= cfg.tau_aud;
  gd.gate = gd.keep_ok && gd.consistency_ok && gd.audio_ok;
  return gd;
}

Result<RefinementOutcome> Pipeline::run_refinement(const SampleManifest& sample,
                                                   const SampleMedia& media,
                                                   const GenerationOutput& gen,
                                                   const ConsensusResult& cons,
                                                   const GatingDecision& gd,
                                                   const std::string& class_suffix,
                                                   ClassEntry& entry) const {
  RefinementOutcome out;
  if (gd.gate) {
    out.box = gen.b_init;
    out.changed = false;
    out.source = "skip";
    return out;
  }

  const std::string stage_key = "refine" + class_suffix;
  const double max_delta = cfg_.max_delta_for(sample.dims.width);

  CallSpec spec;
  spec.sample = &sample;
  spec.template_stage = StageTag::Refine;
  spec.stage_key = stage_key;
  spec.full_ctx = {{"previous_bbox", bind_bbox(gen.b_init)},
                   {"audio_class", gen.audio_class},
                   {"W", std::to_string(sample.dims.width)},
                   {"H", std::to_string(sample.dims.height)},
                   {"av_consistency", bind_number(cons.av_consistency_mean)},
                   {"role_tags", bind_role_tags(cons.role_tags)},
                   {"anchor_votes", bind_anchor_votes(cons.anchors)},
                   {"keep", bind_bool(cons.keep_final)},
                   {"MAX_DELTA_PX", int_str(max_delta)}};
  spec.temperature = cfg_.temp_refine;
  spec.image = &media.image;
  spec.audio = &media.audio;
  spec.max_attempts = 1;  // a bad Stage-3 reply falls back, it never retries

  auto reply = call_stage(spec, entry);
  if (!reply) {
    if (retryable_parse_error(reply.error().code)) {
      out.box = gen.b_init;
      out.changed = false;
      out.source = "fallback";
      entry.notes.push_back(RepairNote{stage_key + ":reply", reply.error().message, "b_init",
                                       "fallback_to_init"});
      return out;
    }
    return reply.error();
  }
  const auto& rr = std::get<RefinementReply>(reply.value().value);

  if (!rr.changed) {
    out.box = gen.b_init;
    out.changed = false;
    out.source = "reply_unchanged";
    out.refined_description = rr.refined_description;
    return out;
  }

  bool clamped = false;
  auto candidate = validate_box(rr.bbox_raw, sample.dims, &clamped);
  if (candidate) {
    BoundingBox box = candidate.value();
    if (clamped) {
      entry.notes.push_back(RepairNote{stage_key + ":bbox", json(rr.bbox_raw).dump(),
                                       json(box.coords()).dump(), "clamp_to_image"});
    }
    // Per-side movement beyond MAX_DELTA_PX is clipped unless the reply
    // justified the move with an explicit ops descriptor.
    if (!rr.op.has_value()) {
      const std::array<double, 4> init = gen.b_init.coords();
      std::array<double, 4> cur = box.coords();
      bool clipped = false;
      for (size_t i = 0; i < 4; ++i) {
        double delta = cur[i] - init[i];
        if (std::abs(delta) > max_delta) {
          cur[i] = init[i] + std::copysign(max_delta, delta);
          clipped = true;
        }
      }
      if (clipped) {
        auto reclamped = validate_box(cur, sample.dims);
        if (reclamped) {
          entry.notes.push_back(RepairNote{stage_key + ":bbox", json(box.coords()).dump(),
                                           json(reclamped.value().coords()).dump(),
                                           "clip_max_delta"});
          box = reclamped.value();
        }
      }
    }
    out.box = box;
    out.changed = !(box == gen.b_init);
    out.source = "reply_bbox";
    out.op = rr.op;
    out.refined_description = rr.refined_description;
    return out;
  }

  if (rr.op.has_value()) {
    auto applied = apply_op(gen.b_init, *rr.op, sample.dims);
    if (applied) {
      out.box = applied.value();
      out.changed = !(out.box == gen.b_init);
      out.source = "ops";
      out.op = rr.op;
      out.refined_description = rr.refined_description;
      return out;
    }
  }

  out.box = gen.b_init;
  out.changed = false;
  out.source = "fallback";
  out.refined_description = rr.refined_description;
  entry.notes.push_back(RepairNote{stage_key + ":bbox", json(rr.bbox_raw).dump(), "b_init",
                                   "fallback_to_init"});
  return out;
}

SampleResult Pipeline::run_sample(const SampleManifest& sample) const {
  const auto t0 = std::chrono::steady_clock::now();
  SampleResult result;
  result.id = sample.id;
  result.mode = sample.mode.empty() ? cfg_.mode : sample.mode;

  auto finish = [&]() -> SampleResult& {
    result.timing_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return result;
  };
  auto fail_with = [&](const Error& err) -> SampleResult& {
    result.failed = true;
    result.failure = failure_from(err);
    return finish();
  };

  auto media = prepare_media(sample);
  if (!media) return fail_with(media.error());
  result.media_warnings = media.value().warnings;

  // Per-class list: single mode derives the class from Stage-1B; duet mode
  // asks one multi-class audio question and loops over its answers.
  std::vector<AudioReply> duet_classes;
  ClassEntry multi_entry;  // carries gen_aud_multi call records and notes
  if (result.mode == "duet") {
    CallSpec spec;
    spec.sample = &sample;
    spec.template_stage = StageTag::GenAudMulti;
    spec.stage_key = "gen_aud_multi";
    spec.full_ctx = {{"K", std::to_string(cfg_.max_duet_classes)}};
    spec.temperature = cfg_.temp_generation;
    spec.audio = &media.value().audio;
    spec.max_attempts = cfg_.retry_budget;
    auto reply = call_stage(spec, multi_entry);
    if (!reply) return fail_with(reply.error());
    duet_classes = std::get<MultiAudioReply>(reply.value().value).classes;
  }

  const int class_runs = result.mode == "duet" ? static_cast<int>(duet_classes.size()) : 1;
  for (int c = 0; c < class_runs; ++c) {
    ClassEntry entry;
    std::string class_suffix;
    GenerationOutput gen;

    if (result.mode == "duet") {
      const AudioReply& cls = duet_classes[c];
      class_suffix = "@" + cls.audio_class;
      entry.class_token = cls.audio_class;
      if (c == 0) {
        // The shared audio call belongs to the sample; file it under the
        // first entry so call counts add up.
        entry.calls = multi_entry.calls;
        entry.notes = multi_entry.notes;
      }

      CallSpec loc;
      loc.sample = &sample;
      loc.template_stage = StageTag::GenLocMulti;
      loc.stage_key = "gen_loc_multi" + class_suffix;
      loc.full_ctx = {{"W", std::to_string(sample.dims.width)},
                      {"H", std::to_string(sample.dims.height)},
                      {"audio_class", cls.audio_class}};
      loc.temperature = cfg_.temp_generation;
      loc.image = &media.value().image;
      loc.audio = &media.value().audio;
      loc.max_attempts = cfg_.retry_budget;
      loc.accept = [&](ParsedReply& reply) -> Status {
        const auto& lr = std::get<LocalizationReply>(reply.value);
        bool clamped = false;
        auto box = validate_box(lr.bbox_raw, sample.dims, &clamped);
        if (!box) return box.error();
        if (clamped) {
          reply.notes.push_back(RepairNote{"bbox", json(lr.bbox_raw).dump(),
                                           json(box.value().coords()).dump(), "clamp_to_image"});
        }
        gen.b_init = box.value();
        gen.description = lr.description;
        return ok_status();
      };
      auto loc_reply = call_stage(loc, entry);
      if (!loc_reply) return fail_with(loc_reply.error());
      gen.audio_class = cls.audio_class;
      gen.audio_confidence = cls.audio_confidence;
    } else {
      auto g = run_generation(sample, media.value(), entry);
      if (!g) return fail_with(g.error());
      gen = std::move(g).value();
      entry.class_token = gen.audio_class;
    }
    entry.generation = gen;

    auto trials = run_analysis(sample, media.value(), gen, class_suffix, entry);
    if (!trials) return fail_with(trials.error());
    entry.trials = std::move(trials).value();

    auto cons = consensus(entry.trials);
    if (!cons) return fail_with(cons.error());
    entry.consensus = std::move(cons).value();

    entry.gating = gate(entry.consensus, gen, cfg_);

    auto refined = run_refinement(sample, media.value(), gen, entry.consensus, entry.gating,
                                  class_suffix, entry);
    if (!refined) return fail_with(refined.error());
    entry.refinement = std::move(refined).value();

    entry.confidence =
        entry.consensus.trials_used > 0 ? entry.consensus.av_consistency_mean
                                        : gen.audio_confidence;
    result.entries.push_back(std::move(entry));
  }
  return finish();
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

json box_to_json(const BoundingBox& b) { return json{b.x1, b.y1, b.x2, b.y2}; }

Result<BoundingBox> box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4 || !j[0].is_number() || !j[1].is_number() ||
      !j[2].is_number() || !j[3].is_number()) {
    return make_error(ErrorCode::ParseError, "bad box: " + j.dump());
  }
  return BoundingBox{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                     j[3].get<double>()};
}

json entry_to_json(const ClassEntry& e) {
  json trials = json::array();
  for (const auto& t : e.trials) {
    json r = to_json(t.reply);
    r["trial"] = t.trial;
    trials.push_back(std::move(r));
  }
  json anchors = json::array();
  for (const auto& a : e.consensus.anchors) {
    anchors.push_back(json{{"anchor", a.anchor}, {"score", a.score}});
  }
  json notes = json::array();
  for (const auto& n : e.notes) notes.push_back(to_json(n));
  json calls = json::array();
  for (const auto& c : e.calls) {
    calls.push_back(json{{"stage", c.stage},
                         {"trial", c.trial},
                         {"attempts", c.attempts},
                         {"request_digest", c.request_digest},
                         {"from_cache", c.from_cache},
                         {"latency_ms", c.latency_ms}});
  }
  return json{
      {"class", e.class_token},
      {"confidence", e.confidence},
      {"generation",
       {{"bbox", box_to_json(e.generation.b_init)},
        {"description", e.generation.description},
        {"audio_class", e.generation.audio_class},
        {"audio_confidence_score", e.generation.audio_confidence}}},
      {"trials", std::move(trials)},
      {"degraded", e.degraded},
      {"consensus",
       {{"av_consistency_mean", e.consensus.av_consistency_mean},
        {"role_tags", e.consensus.role_tags},
        {"anchors", std::move(anchors)},
        {"keep_final", e.consensus.keep_final},
        {"trials_used", e.consensus.trials_used}}},
      {"gating",
       {{"gate", e.gating.gate},
        {"keep_ok", e.gating.keep_ok},
        {"consistency_ok", e.gating.consistency_ok},
        {"audio_ok", e.gating.audio_ok},
        {"tau_av", e.gating.tau_av},
        {"tau_aud", e.gating.tau_aud}}},
      {"refinement",
       {{"bbox", box_to_json(e.refinement.box)},
        {"changed", e.refinement.changed},
        {"source", e.refinement.source},
        {"ops", e.refinement.op ? op_to_json(*e.refinement.op) : json()},
        {"refined_description", e.refinement.refined_description}}},
      {"repair_notes", std::move(notes)},
      {"calls", std::move(calls)},
  };
}

Result<ClassEntry> entry_from_json(const json& j) {
  ClassEntry e;
  e.class_token = j.value("class", std::string());
  e.confidence = j.value("confidence", 0.0);

  const json& g = j.at("generation");
  auto b_init = box_from_json(g.at("bbox"));
  if (!b_init) return b_init.error();
  e.generation.b_init = b_init.value();
  e.generation.description = g.value("description", std::string());
  e.generation.audio_class = g.value("audio_class", std::string());
  e.generation.audio_confidence = g.value("audio_confidence_score", 0.0);

  for (const auto& t : j.value("trials", json::array())) {
    auto parsed = parse_reply(StageTag::Analysis, t);
    if (!parsed) return parsed.error();
    AnalysisTrialRec rec;
    rec.trial = t.value("trial", 0);
    rec.reply = std::get<AnalysisReply>(parsed.value().value);
    e.trials.push_back(std::move(rec));
  }
  e.degraded = j.value("degraded", false);

  const json& c = j.at("consensus");
  e.consensus.av_consistency_mean = c.value("av_consistency_mean", 0.0);
  e.consensus.role_tags = c.value("role_tags", std::vector<std::string>{});
  for (const auto& a : c.value("anchors", json::array())) {
    e.consensus.anchors.push_back(
        AnchorVote{a.value("anchor", std::string()), a.value("score", 0.0)});
  }
  e.consensus.keep_final = c.value("keep_final", false);
  e.consensus.trials_used = c.value("trials_used", 0);

  const json& gd = j.at("gating");
  e.gating.gate = gd.value("gate", false);
  e.gating.keep_ok = gd.value("keep_ok", false);
  e.gating.consistency_ok = gd.value("consistency_ok", false);
  e.gating.audio_ok = gd.value("audio_ok", false);
  e.gating.tau_av = gd.value("tau_av", 0.0);
  e.gating.tau_aud = gd.value("tau_aud", 0.0);

  const json& r = j.at("refinement");
  auto box = box_from_json(r.at("bbox"));
  if (!box) return box.error();
  e.refinement.box = box.value();
  e.refinement.changed = r.value("changed", false);
  e.refinement.source = r.value("source", std::string());
  e.refinement.refined_description = r.value("refined_description", std::string());
  if (r.contains("ops") && !r.at("ops").is_null()) {
    RefinementReply probe;
    json wrapper{{"bbox", {0, 0, 1, 1}},
                 {"changed", true},
                 {"ops", r.at("ops")},
                 {"refined_description", ""}};
    auto parsed = parse_reply(StageTag::Refine, wrapper);
    if (parsed) e.refinement.op = std::get<RefinementReply>(parsed.value().value).op;
  }

  for (const auto& n : j.value("repair_notes", json::array())) {
    e.notes.push_back(RepairNote{n.value("path", std::string()), n.value("original", std::string()),
                                 n.value("repaired", std::string()), n.value("rule", std::string())});
  }
  for (const auto& cj : j.value("calls", json::array())) {
    e.calls.push_back(CallRecord{cj.value("stage", std::string()), cj.value("trial", 0),
                                 cj.value("attempts", 0), cj.value("request_digest", std::string()),
                                 cj.value("from_cache", false), cj.value("latency_ms", 0.0)});
  }
  return e;
}

}  // namespace

json to_json(const SampleResult& result) {
  json entries = json::array();
  for (const auto& e : result.entries) entries.push_back(entry_to_json(e));
  json out{
      {"id", result.id},
      {"mode", result.mode},
      {"failed", result.failed},
      {"failure", result.failure ? json{{"stage", result.failure->stage},
                                        {"code", result.failure->code},
                                        {"message", result.failure->message}}
                                 : json()},
      {"media_warnings", result.media_warnings},
      {"entries", std::move(entries)},
      {"timing_ms", result.timing_ms},
  };
  return out;
}

Result<SampleResult> sample_result_from_json(const json& j) {
  if (!j.is_object() || !j.contains("id")) {
    return make_error(ErrorCode::ParseError, "result record must be an object with an id");
  }
  SampleResult r;
  r.id = j.at("id").get<std::string>();
  r.mode = j.value("mode", std::string("single"));
  r.failed = j.value("failed", false);
  if (j.contains("failure") && !j.at("failure").is_null()) {
    const json& f = j.at("failure");
    r.failure = FailureInfo{f.value("stage", std::string()), f.value("code", std::string()),
                            f.value("message", std::string())};
  }
  r.media_warnings = j.value("media_warnings", std::vector<std::string>{});
  for (const auto& e : j.value("entries", json::array())) {
    auto entry = entry_from_json(e);
    if (!entry) return entry.error();
    r.entries.push_back(std::move(entry).value());
  }
  r.timing_ms = j.value("timing_ms", 0.0);
  return r;
}

}  // namespace garssl
