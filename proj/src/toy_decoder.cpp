// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/toy_decoder.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "skipkv/batcher.hpp"
#include "skipkv/errors.hpp"

namespace skipkv {

namespace {

constexpr std::uint64_t kEmbeddingStream = 1;
constexpr std::uint64_t kUnembeddingStream = 2;
constexpr std::uint64_t kCalibrationStream = 3;
constexpr std::uint64_t kLayerStreamBase = 100;
constexpr std::uint64_t kScriptStreamBase = 1'000'000;
constexpr std::uint64_t kNoiseStreamBase = 2'000'000;

Tensor seeded_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                     std::uint64_t stream, float fan_in) {
  SplitMix64 rng(derive_seed(seed, stream));
  Tensor m({rows, cols});
  const float scale = 1.0F / std::sqrt(fan_in);
  for (float& v : m.data()) {
    v = (2.0F * rng.uniform_float() - 1.0F) * scale;
  }
  return m;
}

std::vector<float> rmsnorm(std::span<const float> x) {
  double sq = 0.0;
  for (float v : x) {
    sq += static_cast<double>(v) * v;
  }
  const auto inv = static_cast<float>(1.0 / std::sqrt(sq / static_cast<double>(x.size()) + 1e-6));
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] * inv;
  }
  return out;
}

// out[c] = sum_r x[r] * w(r, c)
std::vector<float> matvec(std::span<const float> x, const Tensor& w) {
  const std::size_t rows = w.dim(0);
  const std::size_t cols = w.dim(1);
  std::vector<float> out(cols, 0.0F);
  for (std::size_t r = 0; r < rows; ++r) {
    const float xr = x[r];
    auto wrow = w.slab(r);
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] += xr * wrow[c];
    }
  }
  return out;
}

std::vector<float> head_attention(std::span<const float> q, const HeadCache& head,
                                  const AttentionMask& mask) {
  const std::size_t d = head.head_dim();
  std::vector<float> out(d, 0.0F);
  if (mask.valid_count() == 0) {
    return out;
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> logits(head.size(), 0.0);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < head.size(); ++j) {
    if (!mask.valid(j)) {
      continue;
    }
    auto k = head.key(j);
    double dot = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dot += static_cast<double>(q[c]) * k[c];
    }
    logits[j] = dot * scale;
    peak = std::max(peak, logits[j]);
  }
  double total = 0.0;
  for (std::size_t j = 0; j < head.size(); ++j) {
    logits[j] = mask.valid(j) ? std::exp(logits[j] - peak) : 0.0;
    total += logits[j];
  }
  std::vector<double> acc(d, 0.0);
  for (std::size_t j = 0; j < head.size(); ++j) {
    if (logits[j] == 0.0) {
      continue;
    }
    const double p = logits[j] / total;
    auto v = head.value(j);
    for (std::size_t c = 0; c < d; ++c) {
      acc[c] += p * v[c];
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    out[c] = static_cast<float>(acc[c]);
  }
  return out;
}

std::int32_t argmax_over(std::span<const std::int32_t> ids, std::span<const float> scores,
                         float bias) {
  std::int32_t best = ids.front();
  float best_score = -std::numeric_limits<float>::infinity();
  for (std::int32_t id : ids) {
    const float s = scores[static_cast<std::size_t>(id)] + bias;
    if (s > best_score) {
      best_score = s;
      best = id;
    }
  }
  return best;
}

}  // namespace

void ToyConfig::validate() const {
  shape.validate();
  require(repetition_rate >= 0.0 && repetition_rate <= 1.0, ErrorCode::kConfig,
          "repetition_rate must lie in [0, 1]");
  require(min_sentence_len >= 2 && min_sentence_len <= max_sentence_len, ErrorCode::kConfig,
          "sentence lengths need 2 <= min <= max");
  require(!prompt_lengths.empty(), ErrorCode::kConfig, "need at least one prompt");
  for (std::size_t len : prompt_lengths) {
    require(len >= 1, ErrorCode::kConfig, "prompt lengths must be >= 1");
  }
  require(batch_size >= 1, ErrorCode::kConfig, "batch_size must be >= 1");
  require(!delimiters.empty() && !keywords.empty(), ErrorCode::kConfig,
          "toy vocabulary needs delimiters and keywords");
  require(shape.vocab_size >= 1 + delimiters.size() + keywords.size() + 2, ErrorCode::kConfig,
          "vocab_size too small for delimiter, keyword and content tokens");
}

Vocabulary::Vocabulary(std::size_t size, const TokenSet& delimiters, const TokenSet& keywords) {
  texts_.reserve(size);
  texts_.emplace_back("<pad>");
  for (const auto& d : delimiters) {
    delimiters_.push_back(static_cast<std::int32_t>(texts_.size()));
    texts_.push_back(d);
  }
  for (const auto& k : keywords) {
    keywords_.push_back(static_cast<std::int32_t>(texts_.size()));
    texts_.push_back(k);
  }
  while (texts_.size() < size) {
    content_.push_back(static_cast<std::int32_t>(texts_.size()));
    texts_.push_back("t" + std::to_string(texts_.size()));
  }
}

bool Vocabulary::is_delimiter(std::int32_t id) const {
  return std::find(delimiters_.begin(), delimiters_.end(), id) != delimiters_.end();
}

ToyWeights ToyWeights::generate(const ModelShape& shape, std::uint64_t seed) {
  ToyWeights w;
  const std::size_t dm = shape.d_model;
  const std::size_t qw = shape.num_q_heads * shape.head_dim;
  const std::size_t kw = shape.num_kv_heads * shape.head_dim;
  w.embedding = seeded_matrix(shape.vocab_size, dm, seed, kEmbeddingStream, 1.0F);
  w.unembedding = seeded_matrix(dm, shape.vocab_size, seed, kUnembeddingStream,
                                static_cast<float>(dm));
  for (std::size_t l = 0; l < shape.num_layers; ++l) {
    const std::uint64_t base = kLayerStreamBase + 4 * l;
    w.wq.push_back(seeded_matrix(dm, qw, seed, base + 0, static_cast<float>(dm)));
    w.wk.push_back(seeded_matrix(dm, kw, seed, base + 1, static_cast<float>(dm)));
    w.wv.push_back(seeded_matrix(dm, kw, seed, base + 2, static_cast<float>(dm)));
    w.wo.push_back(seeded_matrix(qw, dm, seed, base + 3, static_cast<float>(qw)));
  }
  return w;
}

ToyDecoder::ToyDecoder(ToyConfig config)
    : config_(std::move(config)),
      vocab_((config_.validate(), config_.shape.vocab_size), config_.delimiters,
             config_.keywords),
      weights_(ToyWeights::generate(config_.shape, config_.seed)),
      injections_(config_.shape.num_layers, 0) {}

ForwardOutput ToyDecoder::forward(std::int32_t token, bool padding, SampleEngine& engine,
                                  const SteeringState* steering) {
  const auto& s = config_.shape;
  require(token >= 0 && static_cast<std::size_t>(token) < s.vocab_size,
          ErrorCode::kInvalidArgument, "token outside vocabulary");
  const std::size_t d = s.head_dim;
  ForwardOutput out;
  out.records.reserve(s.num_layers);

  auto emb = weights_.embedding.slab(static_cast<std::size_t>(token));
  std::vector<float> x(emb.begin(), emb.end());
  for (std::size_t l = 0; l < s.num_layers; ++l) {
    const auto normed = rmsnorm(x);
    StepRecord rec;
    rec.layer = l;
    rec.query = Tensor({s.num_q_heads, 1, d}, matvec(normed, weights_.wq[l]));
    rec.key = Tensor({s.num_kv_heads, 1, d}, matvec(normed, weights_.wk[l]));
    rec.value = Tensor({s.num_kv_heads, 1, d}, matvec(normed, weights_.wv[l]));
    engine.append(l, rec.query, rec.key, rec.value);

    if (!padding) {
      const LayerCache& cache = engine.layer(l);
      std::vector<float> concat(s.num_q_heads * d);
      for (std::size_t qh = 0; qh < s.num_q_heads; ++qh) {
        const auto& head = cache.heads[s.kv_head_for(qh)];
        const auto mask = AttentionMask::from_ids(head.gs_ids(), engine.padding_len());
        const auto o = head_attention(rec.query.row(qh, 0), head, mask);
        std::copy(o.begin(), o.end(), concat.begin() + static_cast<std::ptrdiff_t>(qh * d));
      }
      const auto projected = matvec(concat, weights_.wo[l]);
      for (std::size_t c = 0; c < x.size(); ++c) {
        x[c] += config_.attention_scale * projected[c];
      }
    }
    if (steering != nullptr && steering->layer == l) {
      inject(x, *steering);
      ++injections_[l];
    }
    rec.hidden = Tensor({1, s.d_model}, x);
    out.records.push_back(std::move(rec));
  }
  out.final_hidden = std::move(x);
  ++forward_passes_;
  return out;
}

std::vector<float> ToyDecoder::logits(std::span<const float> hidden) const {
  return matvec(rmsnorm(hidden), weights_.unembedding);
}

SentencePlanner::SentencePlanner(const ToyConfig& config, const Vocabulary& vocab,
                                 std::uint64_t sample_id)
    : config_(config),
      vocab_(vocab),
      script_(derive_seed(config.seed, kScriptStreamBase + sample_id)),
      noise_(derive_seed(config.seed, kNoiseStreamBase + sample_id)) {}

std::vector<std::int32_t> SentencePlanner::prompt(std::size_t length) {
  std::vector<std::int32_t> out(length);
  const auto content = vocab_.content();
  for (auto& id : out) {
    id = content[script_.below(content.size())];
  }
  return out;
}

std::int32_t SentencePlanner::next(std::span<const float> logits) {
  require(logits.size() == vocab_.size(), ErrorCode::kShapeMismatch,
          "logit width differs from vocabulary");
  std::vector<float> scores(logits.begin(), logits.end());
  for (float& s : scores) {
    // Gumbel(0, 1) from u in (0, 1)
    const double u = noise_.uniform() + 0x1.0p-54;
    s += config_.logit_noise * static_cast<float>(-std::log(-std::log(u)));
  }

  if (current_.empty() && pending_.empty()) {
    copying_ = false;
    if (!completed_.empty() && script_.uniform() < config_.repetition_rate) {
      const auto& src = completed_[script_.below(completed_.size())];
      pending_.assign(src.begin(), src.end());
      copying_ = true;
    } else {
      const std::size_t span = config_.max_sentence_len - config_.min_sentence_len + 1;
      planned_len_ = config_.min_sentence_len + script_.below(span);
    }
  }

  std::int32_t token = 0;
  if (copying_) {
    token = pending_.front();
    pending_.pop_front();
  } else if (current_.size() + 1 >= planned_len_) {
    token = argmax_over(vocab_.delimiters(), scores, 0.0F);
  } else if (current_.empty()) {
    const std::int32_t content = argmax_over(vocab_.content(), scores, 0.0F);
    const std::int32_t keyword = argmax_over(vocab_.keywords(), scores, config_.reflection_bias);
    token = scores[static_cast<std::size_t>(keyword)] + config_.reflection_bias >
                    scores[static_cast<std::size_t>(content)]
                ? keyword
                : content;
  } else {
    token = argmax_over(vocab_.content(), scores, 0.0F);
  }

  current_.push_back(token);
  if (vocab_.is_delimiter(token)) {
    completed_.push_back(std::move(current_));
    current_.clear();
    pending_.clear();
    copying_ = false;
  }
  return token;
}

DecodeResult decode_step(ToyDecoder& decoder, SentencePlanner& planner,
                         std::span<const float> last_hidden, SampleEngine& engine,
                         const SteeringState* steering) {
  DecodeResult result;
  result.token = planner.next(decoder.logits(last_hidden));
  result.forward = decoder.forward(result.token, false, engine, steering);
  return result;
}

void SimulationConfig::validate() const {
  toy.validate();
  engine.eviction.validate();
  steering.validate();
  if (steering_mode != SteeringMode::kNone) {
    require(steering.layer < toy.shape.num_layers, ErrorCode::kConfig,
            "steer_layer " + std::to_string(steering.layer) + " outside model with " +
                std::to_string(toy.shape.num_layers) + " layers");
  }
  if (steering_mode == SteeringMode::kVector) {
    require(steering_vector.size() == toy.shape.d_model, ErrorCode::kConfig,
            "steering vector width differs from d_model");
  }
}

SampleRun run_sample(const ToyConfig& toy, const EngineOptions& engine_options,
                     const std::optional<SteeringState>& steering, std::uint64_t sample_id,
                     std::size_t prompt_len, std::size_t padding_len, bool record_trace) {
  require(prompt_len >= 1, ErrorCode::kInvalidArgument, "prompt must hold at least one token");
  ToyDecoder decoder(toy);
  SentencePlanner planner(decoder.config(), decoder.vocab(), sample_id);
  const auto& shape = decoder.shape();
  SampleEngine engine(shape, shape.num_layers, engine_options, padding_len, prompt_len);

  SampleRun run;
  run.sample_id = sample_id;
  auto& sample = run.trace_sample;
  sample.sample_id = sample_id;
  sample.padding_len = padding_len;
  sample.tokens.prefill_len = prompt_len;
  sample.tokens.max_gen_len = toy.max_gen_len;
  if (record_trace) {
    sample.records.resize(shape.num_layers);
  }
  auto& m = run.metrics;
  m.sample_id = sample_id;
  m.prefill_len = prompt_len;
  m.padding_len = padding_len;

  auto feed = [&](std::int32_t token, bool padding, ForwardOutput fwd) {
    if (record_trace) {
      for (std::size_t l = 0; l < shape.num_layers; ++l) {
        sample.records[l].push_back(std::move(fwd.records[l]));
      }
    }
    auto event = engine.finish_position(decoder.vocab().text(token), fwd.final_hidden);
    if (!padding) {
      sample.tokens.token_ids.push_back(token);
      sample.tokens.token_texts.push_back(decoder.vocab().text(token));
    }
    m.cache_lengths.push_back(engine.cache_length());
    if (event) {
      EventSummary summary{event->decode_step, event->position, event->pre_length,
                           event->post_length, 0};
      for (const auto& layer : event->layers) {
        for (const auto& head : layer.heads) {
          summary.evicted += head.evicted_gs_ids.size();
        }
      }
      m.events.push_back(summary);
      run.events.push_back(std::move(*event));
    }
    return std::move(fwd.final_hidden);
  };

  for (std::size_t p = 0; p < padding_len; ++p) {
    feed(Vocabulary::kPad, true, decoder.forward(Vocabulary::kPad, true, engine, nullptr));
  }
  std::vector<float> last_hidden;
  for (std::int32_t token : planner.prompt(prompt_len)) {
    last_hidden = feed(token, false, decoder.forward(token, false, engine, nullptr));
  }

  std::optional<SteeringState> state = steering;
  for (std::size_t t = 1; t <= toy.max_gen_len; ++t) {
    auto step = decode_step(decoder, planner, last_hidden, engine,
                            state ? &*state : nullptr);
    last_hidden = feed(step.token, false, std::move(step.forward));
    if (state) {
      state = update_strength(std::move(*state), engine.nonexecution_count());
    }
    m.nonexec_trajectory.push_back(engine.nonexecution_count());
    m.alpha_trajectory.push_back(state ? state->strength : 0.0);
    m.flagged_trajectory.push_back(engine.redundant().size());
  }

  m.generated_len = sample.tokens.generated_len();
  m.peak_cache_length = engine.peak_length();
  m.evictions = engine.eviction_counts();
  m.sentences = engine.segmenter().closed().size();
  m.flagged_sentences = engine.redundant().size();
  run.injections = decoder.injections();
  return run;
}

SteeringDump calibrate_steering(const ToyConfig& toy, const EngineOptions& engine,
                                std::size_t layer) {
  ToyConfig calib = toy;
  calib.seed = derive_seed(toy.seed, kCalibrationStream);
  EngineOptions options = engine;
  options.eviction.method = Method::kFullKv;
  options.capture_ranges = false;

  std::vector<float> exec_rows;
  std::vector<float> other_rows;
  const std::size_t width = toy.shape.d_model;
  for (std::size_t i = 0; i < calib.prompt_lengths.size(); ++i) {
    const auto run = run_sample(calib, options, std::nullopt, i, calib.prompt_lengths[i], 0, true);
    const auto& tokens = run.trace_sample.tokens;
    for (const auto& span : segment(tokens, calib.delimiters, calib.keywords)) {
      if (!span.closed) {
        continue;
      }
      auto& dst = span.label == ThoughtLabel::kExecution ? exec_rows : other_rows;
      for (std::size_t p = span.begin; p <= span.end; ++p) {
        auto h = run.trace_sample.records[layer][p].hidden.data();
        dst.insert(dst.end(), h.begin(), h.end());
      }
    }
  }
  const std::size_t exec_count = exec_rows.size() / width;
  const std::size_t other_count = other_rows.size() / width;
  SteeringDump dump;
  dump.execution = Tensor({exec_count, width}, std::move(exec_rows));
  dump.nonexecution = Tensor({other_count, width}, std::move(other_rows));
  return dump;
}

SimulationResult run_simulation(const SimulationConfig& config) {
  config.validate();
  const auto& toy = config.toy;

  std::vector<SampleLength> lengths;
  for (std::size_t i = 0; i < toy.prompt_lengths.size(); ++i) {
    lengths.push_back({i, toy.prompt_lengths[i]});
  }
  const BatchPlan plan = toy.batch_grouping ? group(lengths, toy.batch_size)
                                            : group_in_order(lengths, toy.batch_size);

  SimulationResult result;
  std::optional<SteeringState> steering;
  switch (config.steering_mode) {
    case SteeringMode::kNone:
      break;
    case SteeringMode::kVector:
      result.steering_vector = config.steering_vector;
      break;
    case SteeringMode::kCalibrate: {
      const auto dump = calibrate_steering(toy, config.engine, config.steering.layer);
      result.steering_vector = build_vector(dump.execution, dump.nonexecution);
      break;
    }
    case SteeringMode::kDump: {
      const auto dump = read_steering_dump(config.steering_dump);
      result.steering_vector = build_vector(dump.execution, dump.nonexecution);
      require(result.steering_vector.size() == toy.shape.d_model, ErrorCode::kConfig,
              "steering dump width differs from d_model");
      break;
    }
  }
  if (config.steering_mode != SteeringMode::kNone) {
    steering = SteeringState::make(result.steering_vector, config.steering);
  }

  struct Job {
    std::uint64_t id;
    std::size_t prompt_len;
    std::size_t padding;
    std::size_t batch;
  };
  std::vector<Job> jobs;
  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    for (const auto& s : plan.batches[b].samples) {
      jobs.push_back({s.id, s.prefill_len, s.padding, b});
    }
  }

  // Samples decode independently; results land in fixed slots so the output
  // does not depend on scheduling.
  std::vector<SampleRun> runs(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        runs[i] = run_sample(toy, config.engine, steering, jobs[i].id, jobs[i].prompt_len,
                             jobs[i].padding, config.record_trace);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
      }
    }
  };
  const std::size_t threads =
      std::min<std::size_t>(std::max(1U, std::thread::hardware_concurrency()), jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& th : pool) {
    th.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
  auto& metrics = result.metrics;
  metrics.kind = "simulate";
  metrics.method = to_string(config.engine.eviction.method);
  metrics.budget = config.engine.eviction.budget;
  metrics.compress_interval = config.engine.eviction.compress_interval;
  metrics.protect_window = config.engine.eviction.protect_window;
  metrics.sigma = config.engine.eviction.scoring.sigma;
  metrics.tau = config.engine.eviction.scoring.tau;
  metrics.alpha_window = config.engine.eviction.scoring.alpha_window;
  metrics.seed = toy.seed;

  if (config.record_trace) {
    result.traces.resize(plan.batches.size());
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      auto& trace = result.traces[b];
      trace.model = toy.shape;
      trace.alpha = config.engine.eviction.scoring.alpha_window;
      trace.steps = plan.batches[b].max_prefill + toy.max_gen_len;
      for (std::size_t l = 0; l < toy.shape.num_layers; ++l) {
        trace.layers.push_back(l);
      }
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      auto& moved = result.traces[jobs[i].batch].samples;
      moved.push_back(std::move(runs[i].trace_sample));
      // Keep the token stream on the run; records live only in the trace.
      runs[i].trace_sample = BatchSample{moved.back().sample_id, moved.back().tokens,
                                         moved.back().padding_len, {}};
    }
    for (auto& trace : result.traces) {
      std::sort(trace.samples.begin(), trace.samples.end(),
                [](const BatchSample& a, const BatchSample& b) { return a.sample_id < b.sample_id; });
    }
  }
  std::sort(runs.begin(), runs.end(),
            [](const SampleRun& a, const SampleRun& b) { return a.sample_id < b.sample_id; });
  for (const auto& run : runs) {
    metrics.samples.push_back(run.metrics);
  }
  result.samples = std::move(runs);
  return result;
}

Tensor attention_output(const LayerCache& cache, const Tensor& query,
                        std::span<const AttentionMask> masks, const ModelShape& shape) {
  require(masks.size() == cache.heads.size(), ErrorCode::kInvalidArgument,
          "need one mask per KV head");
  Tensor out({shape.num_q_heads, shape.head_dim});
  for (std::size_t qh = 0; qh < shape.num_q_heads; ++qh) {
    const std::size_t kv = shape.kv_head_for(qh);
    const auto o = head_attention(query.row(qh, 0), cache.heads[kv], masks[kv]);
    std::copy(o.begin(), o.end(), out.slab(qh).begin());
  }
  return out;
}

LayerCache remove_slots(const LayerCache& cache, std::span<const std::size_t> slots) {
  LayerCache out = cache;
  for (auto& head : out.heads) {
    std::vector<std::size_t> keep;
    for (std::size_t j = 0, s = 0; j < head.size(); ++j) {
      if (s < slots.size() && slots[s] == j) {
        ++s;
        continue;
      }
      keep.push_back(j);
    }
    head.compact(keep);
  }
  return out;
}

MaskedEvictionReport masked_eviction_preserves_output(const LayerCache& cache,
                                                      const Tensor& query,
                                                      std::size_t padding_len,
                                                      const ModelShape& shape) {
  const auto masks = cache_masks(cache, padding_len);
  const Tensor with_padding = attention_output(cache, query, masks, shape);

  LayerCache trimmed = cache;
  MaskedEvictionReport report;
  for (std::size_t h = 0; h < trimmed.heads.size(); ++h) {
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < trimmed.heads[h].size(); ++j) {
      if (masks[h].valid(j)) {
        keep.push_back(j);
      }
    }
    report.removed += trimmed.heads[h].size() - keep.size();
    trimmed.heads[h].compact(keep);
  }
  const auto trimmed_masks = cache_masks(trimmed, padding_len);
  const Tensor without = attention_output(trimmed, query, trimmed_masks, shape);
  for (std::size_t i = 0; i < with_padding.size(); ++i) {
    report.max_abs_delta =
        std::max(report.max_abs_delta, std::abs(with_padding.data()[i] - without.data()[i]));
  }
  return report;
}

}  // namespace skipkv
