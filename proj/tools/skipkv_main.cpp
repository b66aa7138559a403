// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

// skipkv: simulate | evict | group | report

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "skipkv/batcher.hpp"
#include "skipkv/config.hpp"
#include "skipkv/errors.hpp"
#include "skipkv/replay.hpp"
#include "skipkv/report.hpp"
#include "skipkv/toy_decoder.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace skipkv;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitConfig = 3;
constexpr int kExitInvariant = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
      return kExitConfig;
    case ErrorCode::kInvariant:
      return kExitInvariant;
    default:
      return kExitInput;
  }
}

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::size_t> budget;
  std::optional<std::size_t> batch_size;
  std::optional<std::uint64_t> seed;
  bool dump_ranges = false;
  std::optional<bool> protect_window;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--budget", o.budget, "KV budget per head");
  cmd->add_option("--batch-size", o.batch_size, "samples per batch");
  cmd->add_option("--seed", o.seed, "generator seed");
  cmd->add_flag("--dump-ranges", o.dump_ranges, "write range tables after each compression");
  cmd->add_option("--protect-window", o.protect_window,
                  "keep the observation window (true|false)");
}

RunConfig resolve(const Overrides& o, const std::string& mode) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.config.empty() && c.mode != mode) {
    std::fprintf(stderr, "skipkv: note: config mode '%s' overridden by '%s'\n", c.mode.c_str(),
                 mode.c_str());
  }
  c.mode = mode;
  if (!o.out.empty()) {
    c.out = o.out;
  }
  if (o.budget) {
    c.eviction().budget = *o.budget;
  }
  if (o.batch_size) {
    c.simulation.toy.batch_size = *o.batch_size;
  }
  if (o.seed) {
    c.simulation.toy.seed = *o.seed;
  }
  if (o.protect_window) {
    c.eviction().protect_window = *o.protect_window;
  }
  c.dump_ranges = c.dump_ranges || o.dump_ranges;
  c.simulation.engine.capture_ranges = c.dump_ranges;
  c.validate();
  return c;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  out << doc.dump(2) << "\n";
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + dir.string());
}

RunMetrics read_metrics(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  try {
    return run_metrics_from_json(json::parse(in));
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformedInput, path.string() + ": " + e.what());
  }
}

std::vector<SampleLength> read_lengths(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<std::size_t> values;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      values = json::parse(text).get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
      fail(ErrorCode::kMalformedInput, path.string() + ": " + e.what());
    }
  } else {
    std::istringstream is(text);
    std::string token;
    while (is >> token) {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(token, &used);
        require(used == token.size() && v >= 0, ErrorCode::kMalformedInput,
                "bad length '" + token + "'");
        values.push_back(static_cast<std::size_t>(v));
      } catch (const std::logic_error&) {
        fail(ErrorCode::kMalformedInput, "bad length '" + token + "' in " + path.string());
      }
    }
  }
  std::vector<SampleLength> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back({i, values[i]});
  }
  return out;
}

int cmd_simulate(const Overrides& o) {
  RunConfig c = resolve(o, "simulate");
  require(!c.out.empty(), ErrorCode::kConfig, "simulate needs --out");
  const auto result = run_simulation(c.simulation);
  make_dir(c.out);
  for (std::size_t b = 0; b < result.traces.size(); ++b) {
    const fs::path dir =
        result.traces.size() == 1 ? c.out / "trace" : c.out / ("trace_b" + std::to_string(b));
    write_trace(result.traces[b], dir);
  }
  write_json(c.out / "metrics.json", to_json(result.metrics));
  if (c.dump_ranges) {
    ReplayResult view;
    DecodingTrace layout;
    for (std::size_t l = 0; l < c.simulation.toy.shape.num_layers; ++l) {
      layout.layers.push_back(l);
    }
    for (const auto& run : result.samples) {
      view.samples.push_back({run.sample_id, run.events});
    }
    write_json(c.out / "ranges.json", ranges_json(view, layout));
  }
  std::size_t events = 0;
  for (const auto& s : result.metrics.samples) {
    events += s.events.size();
  }
  std::printf("simulated %zu samples, %zu compression events -> %s\n",
              result.metrics.samples.size(), events, c.out.string().c_str());
  return kExitOk;
}

int cmd_evict(const Overrides& o, const std::string& trace_dir) {
  RunConfig c = resolve(o, "evict");
  if (!trace_dir.empty()) {
    c.trace = trace_dir;
  }
  require(!c.trace.empty(), ErrorCode::kConfig, "evict needs --trace");
  const DecodingTrace trace = read_trace(c.trace);
  const auto result = replay_trace(trace, c.simulation.engine);
  const json metrics = to_json(result.metrics);
  if (c.out.empty()) {
    std::cout << metrics.dump(2) << "\n";
    return kExitOk;
  }
  make_dir(c.out);
  write_json(c.out / "metrics.json", metrics);
  write_json(c.out / "decisions.json", decisions_json(result, trace));
  if (c.dump_ranges) {
    write_json(c.out / "ranges.json", ranges_json(result, trace));
  }
  std::size_t evicted = 0;
  for (const auto& s : result.metrics.samples) {
    for (const auto& e : s.events) {
      evicted += e.evicted;
    }
  }
  std::printf("replayed %zu samples, %zu evictions, invariants hold -> %s\n",
              trace.samples.size(), evicted, c.out.string().c_str());
  return kExitOk;
}

int cmd_group(const Overrides& o, const std::string& lengths_path) {
  RunConfig c = resolve(o, "group");
  if (!lengths_path.empty()) {
    c.lengths = lengths_path;
  }
  require(!c.lengths.empty(), ErrorCode::kConfig, "group needs --lengths");
  const auto lengths = read_lengths(c.lengths);
  const auto plan = c.simulation.toy.batch_grouping
                        ? group(lengths, c.simulation.toy.batch_size)
                        : group_in_order(lengths, c.simulation.toy.batch_size);
  const json doc = plan_json(plan, c.eviction().budget);
  if (c.out.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    make_dir(c.out);
    write_json(c.out / "plan.json", doc);
  }
  return kExitOk;
}

int cmd_report(const Overrides& o, const std::vector<std::string>& files) {
  RunConfig c = resolve(o, "report");
  std::vector<fs::path> inputs = c.inputs;
  inputs.insert(inputs.end(), files.begin(), files.end());
  require(!inputs.empty(), ErrorCode::kConfig, "report needs metrics files");
  require(!c.out.empty(), ErrorCode::kConfig, "report needs --out");
  std::vector<RunMetrics> runs;
  for (const auto& p : inputs) {
    runs.push_back(read_metrics(p));
  }
  const auto report = build_report(runs);
  write_report(report, c.out);
  std::printf("report: %zu rows -> %s\n", report.rows.size(), c.out.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SkipKV eviction engine and simulator"};
  app.require_subcommand(1);

  Overrides sim_o;
  auto* sim = app.add_subcommand("simulate", "run the toy decoder with compression");
  add_common(sim, sim_o);

  Overrides ev_o;
  std::string trace_dir;
  auto* ev = app.add_subcommand("evict", "replay compression over a recorded trace");
  add_common(ev, ev_o);
  ev->add_option("--trace", trace_dir, "trace directory");

  Overrides gr_o;
  std::string lengths;
  auto* gr = app.add_subcommand("group", "plan batches from prefill lengths");
  add_common(gr, gr_o);
  gr->add_option("--lengths", lengths, "file of prefill lengths");

  Overrides rp_o;
  std::vector<std::string> files;
  auto* rp = app.add_subcommand("report", "merge metrics files into tables");
  add_common(rp, rp_o);
  rp->add_option("files", files, "metrics.json files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) {
      return cmd_simulate(sim_o);
    }
    if (*ev) {
      return cmd_evict(ev_o, trace_dir);
    }
    if (*gr) {
      return cmd_group(gr_o, lengths);
    }
    return cmd_report(rp_o, files);
  } catch (const Error& e) {
    std::fprintf(stderr, "skipkv: %s error: %s\n", to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "skipkv: internal error: %s\n", e.what());
    return kExitInvariant;
  }
}
