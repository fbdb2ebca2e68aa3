#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "negsamp/config.hpp"
#include "negsamp/metrics.hpp"
#include "negsamp/rng.hpp"
#include "negsamp/sweep.hpp"
#include "negsamp/train.hpp"

namespace negsamp {

inline constexpr const char* kToolVersion = "0.1.0";

namespace detail {

inline std::string iso8601_utc(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot digest: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char chunk[4096];
  while (in.read(chunk, sizeof chunk) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(chunk[i]);
      h *= 0x100000001b3ull;
    }
  }
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

}  // namespace detail

/// Records how a run was produced: the resolved config, the seed, wall-clock
/// bounds, and a digest per emitted file. One manifest per output directory.
struct RunManifest {
  std::string tool_version = kToolVersion;
  KVConfig config;
  std::uint64_t seed = 0;
  std::chrono::system_clock::time_point started;
  std::chrono::system_clock::time_point finished;

  /// Digests `files` (paths relative to `dir`) and writes manifest.json.
  void write(const std::filesystem::path& dir, const std::vector<std::string>& files) const {
    nlohmann::json j;
    j["tool_version"] = tool_version;
    j["seed"] = seed;
    j["started"] = detail::iso8601_utc(started);
    j["finished"] = detail::iso8601_utc(finished);
    j["config"] = nlohmann::json::object();
    for (const auto& [k, v] : config.entries()) j["config"][k] = v;
    j["outputs"] = nlohmann::json::object();
    for (const auto& f : files) j["outputs"][f] = detail::fnv1a64_file(dir / f);
    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
    out << j.dump(2) << "\n";
  }
};

namespace detail {

inline void append_metrics_row(std::ostream& out, int config_id,
                               const ExperimentConfig& cfg, const std::string& slice,
                               const SliceMetrics& m) {
  out << config_id << ',' << cfg.sampler_name() << ',' << cfg.weighting << ','
      << cfg.negatives << ',' << slice << ',' << m.balanced_error << ','
      << m.recall_at_1 << ',' << m.recall_at_5 << "\n";
}

}  // namespace detail

inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<SweepOutcome>& outcomes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "config_id,sampler,weighting,m,slice,balanced_error,recall@1,recall@5\n";
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    const auto& metrics = o.result.metrics;
    detail::append_metrics_row(out, o.config_id, o.config, "overall", metrics.overall);
    if (metrics.head)
      detail::append_metrics_row(out, o.config_id, o.config, "head", *metrics.head);
    if (metrics.torso)
      detail::append_metrics_row(out, o.config_id, o.config, "torso", *metrics.torso);
    if (metrics.tail)
      detail::append_metrics_row(out, o.config_id, o.config, "tail", *metrics.tail);
  }
}

inline void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "epoch,train_loss\n";
  for (std::size_t e = 0; e < trace.epoch_loss.size(); ++e)
    out << e << ',' << trace.epoch_loss[e] << "\n";
}

namespace detail {

inline nlohmann::json slice_json(const SliceMetrics& m) {
  return {{"balanced_error", m.balanced_error},
          {"recall@1", m.recall_at_1},
          {"recall@5", m.recall_at_5},
          {"num_classes", m.num_classes}};
}

inline nlohmann::json metrics_json(const SlicedMetrics& metrics) {
  nlohmann::json j;
  j["overall"] = slice_json(metrics.overall);
  if (metrics.head) j["head"] = slice_json(*metrics.head);
  if (metrics.torso) j["torso"] = slice_json(*metrics.torso);
  if (metrics.tail) j["tail"] = slice_json(*metrics.tail);
  return j;
}

}  // namespace detail

inline void write_summary_json(const std::filesystem::path& path,
                               const std::vector<SweepOutcome>& outcomes) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& o : outcomes) {
    nlohmann::json r;
    r["config_id"] = o.config_id;
    r["sampler"] = o.config.sampler_name();
    r["weighting"] = o.config.weighting;
    r["negatives"] = o.config.negatives;
    r["loss"] = o.config.loss.name();
    r["seed"] = o.config.seed;
    r["status"] = o.ok ? "ok" : "failed";
    if (o.ok) {
      r["metrics"] = detail::metrics_json(o.result.metrics);
      if (!o.result.trace.epoch_loss.empty())
        r["final_train_loss"] = o.result.trace.epoch_loss.back();
    } else {
      r["error"] = o.error;
    }
    runs.push_back(std::move(r));
  }
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["runs"] = std::move(runs);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace negsamp
