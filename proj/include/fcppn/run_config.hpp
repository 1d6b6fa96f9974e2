#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fcppn/coordnet.hpp"
#include "fcppn/perceptual.hpp"

namespace fcppn {

enum class Task { reconstruct, texture, interpolate, render };
enum class LossKind { content, style };

std::string to_string(Task task);
Task parse_task(const std::string& s);
std::string to_string(LossKind loss);
LossKind parse_loss(const std::string& s);

// Everything needed to repeat a run. Serialised as a flat JSON object whose
// keys mirror the CLI flags; the same document doubles as the --config file
// format and is embedded in every checkpoint.
struct RunConfig {
  Task task = Task::reconstruct;
  std::vector<std::string> targets;
  NetworkConfig network;  // network.seed is the run seed
  std::string extractor = "pyramid:0";
  std::optional<PoolMode> pool;
  std::optional<LossKind> loss;  // unset: content for reconstruct, else style
  std::size_t iterations = 200;
  std::size_t history = 20;
  std::string out_dir = "out";
  std::size_t frames = 16;
  // render only
  std::string checkpoint;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> z;

  LossKind effective_loss() const;
  // Throws ConfigError on target-count or range violations.
  void validate() const;

  std::string to_json() const;
  // Keys absent from the document keep the values already in `base`.
  static RunConfig from_json(const std::string& text, RunConfig base);
  static RunConfig from_json(const std::string& text);
  static RunConfig from_file(const std::filesystem::path& path,
                             RunConfig base);
  static RunConfig from_file(const std::filesystem::path& path);
};

// Parses "WxH" (e.g. "10x10").
std::pair<std::size_t, std::size_t> parse_extent(const std::string& s);

}  // namespace fcppn
