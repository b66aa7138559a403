// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/config.hpp"

#include <fstream>
#include <set>

#include "skipkv/errors.hpp"

namespace skipkv {

using nlohmann::json;

namespace {

const std::set<std::string> kModelKeys = {"num_layers", "num_q_heads", "num_kv_heads",
                                          "head_dim",   "d_model",     "vocab_size"};

template <typename T>
void read(const json& doc, const char* key, T& out) {
  if (!doc.contains(key)) {
    return;
  }
  try {
    out = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("config key '") + key + "': " + e.what());
  }
}

void read_path(const json& doc, const char* key, std::filesystem::path& out) {
  std::string s;
  read(doc, key, s);
  if (!s.empty()) {
    out = s;
  }
}

void read_set(const json& doc, const char* key, TokenSet& out) {
  if (!doc.contains(key)) {
    return;
  }
  std::vector<std::string> items;
  read(doc, key, items);
  out = TokenSet(items.begin(), items.end());
}

}  // namespace

const char* to_string(SteeringMode mode) {
  switch (mode) {
    case SteeringMode::kNone:
      return "none";
    case SteeringMode::kVector:
      return "vector";
    case SteeringMode::kCalibrate:
      return "calibrate";
    case SteeringMode::kDump:
      return "dump";
  }
  return "?";
}

SteeringMode parse_steering_mode(const std::string& name) {
  for (auto mode : {SteeringMode::kNone, SteeringMode::kVector, SteeringMode::kCalibrate,
                    SteeringMode::kDump}) {
    if (name == to_string(mode)) {
      return mode;
    }
  }
  fail(ErrorCode::kConfig, "unknown steering mode '" + name + "'");
}

void RunConfig::sync() {
  simulation.toy.delimiters = simulation.engine.delimiters;
  simulation.toy.keywords = simulation.engine.keywords;
}

void RunConfig::validate() const {
  static const std::set<std::string> modes = {"simulate", "evict", "group", "report"};
  require(modes.contains(mode), ErrorCode::kConfig, "unknown mode '" + mode + "'");
  if (mode == "simulate") {
    simulation.validate();
  } else {
    simulation.engine.eviction.validate();
  }
}

RunConfig run_config_from_json(const json& doc) {
  require(doc.is_object(), ErrorCode::kConfig, "config must be a JSON object");
  const json defaults = to_json(RunConfig{});
  for (const auto& [key, value] : doc.items()) {
    require(defaults.contains(key), ErrorCode::kConfig, "unknown config key '" + key + "'");
  }

  RunConfig c;
  auto& ev = c.simulation.engine.eviction;
  auto& toy = c.simulation.toy;
  auto& st = c.simulation.steering;
  read(doc, "mode", c.mode);
  read(doc, "seed", toy.seed);
  read(doc, "budget", ev.budget);
  read(doc, "compress_interval", ev.compress_interval);
  read(doc, "protect_window", ev.protect_window);
  std::string method = to_string(ev.method);
  read(doc, "method", method);
  ev.method = parse_method(method);
  read(doc, "sigma", ev.scoring.sigma);
  read(doc, "tau", ev.scoring.tau);
  read(doc, "epsilon", ev.scoring.epsilon);
  read(doc, "alpha_window", ev.scoring.alpha_window);
  read_set(doc, "delimiters", c.simulation.engine.delimiters);
  read_set(doc, "keywords", c.simulation.engine.keywords);

  std::string steering = to_string(c.simulation.steering_mode);
  read(doc, "steering", steering);
  c.simulation.steering_mode = parse_steering_mode(steering);
  read(doc, "alpha0", st.alpha0);
  read(doc, "gamma", st.gamma);
  read(doc, "steer_layer", st.layer);
  read(doc, "steering_vector", c.simulation.steering_vector);
  read_path(doc, "steering_dump", c.simulation.steering_dump);

  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    require(m.is_object(), ErrorCode::kConfig, "config key 'model' must be an object");
    for (const auto& [key, value] : m.items()) {
      require(kModelKeys.contains(key), ErrorCode::kConfig, "unknown model key '" + key + "'");
    }
    read(m, "num_layers", toy.shape.num_layers);
    read(m, "num_q_heads", toy.shape.num_q_heads);
    read(m, "num_kv_heads", toy.shape.num_kv_heads);
    read(m, "head_dim", toy.shape.head_dim);
    read(m, "d_model", toy.shape.d_model);
    read(m, "vocab_size", toy.shape.vocab_size);
  }
  read(doc, "max_gen_len", toy.max_gen_len);
  read(doc, "repetition_rate", toy.repetition_rate);
  read(doc, "min_sentence_len", toy.min_sentence_len);
  read(doc, "max_sentence_len", toy.max_sentence_len);
  read(doc, "prompt_lengths", toy.prompt_lengths);
  read(doc, "batch_size", toy.batch_size);
  read(doc, "batch_grouping", toy.batch_grouping);
  read(doc, "attention_scale", toy.attention_scale);
  read(doc, "reflection_bias", toy.reflection_bias);
  read(doc, "logit_noise", toy.logit_noise);
  read(doc, "record_trace", c.simulation.record_trace);

  read_path(doc, "trace", c.trace);
  read_path(doc, "out", c.out);
  read_path(doc, "lengths", c.lengths);
  if (doc.contains("inputs")) {
    std::vector<std::string> inputs;
    read(doc, "inputs", inputs);
    c.inputs.assign(inputs.begin(), inputs.end());
  }
  read(doc, "dump_ranges", c.dump_ranges);
  c.sync();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kConfig, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, "config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(doc);
}

json to_json(const RunConfig& c) {
  const auto& ev = c.simulation.engine.eviction;
  const auto& toy = c.simulation.toy;
  const auto& st = c.simulation.steering;
  std::vector<std::string> inputs;
  for (const auto& p : c.inputs) {
    inputs.push_back(p.string());
  }
  return {{"mode", c.mode},
          {"seed", toy.seed},
          {"budget", ev.budget},
          {"compress_interval", ev.compress_interval},
          {"protect_window", ev.protect_window},
          {"method", to_string(ev.method)},
          {"sigma", ev.scoring.sigma},
          {"tau", ev.scoring.tau},
          {"epsilon", ev.scoring.epsilon},
          {"alpha_window", ev.scoring.alpha_window},
          {"delimiters", c.simulation.engine.delimiters},
          {"keywords", c.simulation.engine.keywords},
          {"steering", to_string(c.simulation.steering_mode)},
          {"alpha0", st.alpha0},
          {"gamma", st.gamma},
          {"steer_layer", st.layer},
          {"steering_vector", c.simulation.steering_vector},
          {"steering_dump", c.simulation.steering_dump.string()},
          {"model",
           {{"num_layers", toy.shape.num_layers},
            {"num_q_heads", toy.shape.num_q_heads},
            {"num_kv_heads", toy.shape.num_kv_heads},
            {"head_dim", toy.shape.head_dim},
            {"d_model", toy.shape.d_model},
            {"vocab_size", toy.shape.vocab_size}}},
          {"max_gen_len", toy.max_gen_len},
          {"repetition_rate", toy.repetition_rate},
          {"min_sentence_len", toy.min_sentence_len},
          {"max_sentence_len", toy.max_sentence_len},
          {"prompt_lengths", toy.prompt_lengths},
          {"batch_size", toy.batch_size},
          {"batch_grouping", toy.batch_grouping},
          {"attention_scale", toy.attention_scale},
          {"reflection_bias", toy.reflection_bias},
          {"logit_noise", toy.logit_noise},
          {"record_trace", c.simulation.record_trace},
          {"trace", c.trace.string()},
          {"out", c.out.string()},
          {"lengths", c.lengths.string()},
          {"inputs", inputs},
          {"dump_ranges", c.dump_ranges}};
}

}  // namespace skipkv
