#pragma once

// Backends driven by lambdas, for hand-built scenarios.

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>

#include "prefgen/backend.h"

namespace prefgen::testing {

using GenerateFn =
    std::function<std::vector<GeneratedStep>(const RequestContext&, std::string_view, int)>;
using StepScoreFn =
    std::function<double(const RequestContext&, std::string_view, std::string_view)>;
using TrajScoreFn = std::function<double(const RequestContext&, std::string_view)>;

class FnGenerator final : public StepGenerator {
 public:
  explicit FnGenerator(GenerateFn fn) : fn_(std::move(fn)) {}
  std::vector<GeneratedStep> generate(const RequestContext& ctx, std::string_view prefix,
                                      int n) override {
    ++calls;
    return fn_(ctx, prefix, n);
  }
  std::atomic<int> calls{0};

 private:
  GenerateFn fn_;
};

class FnScorer final : public StepScorer {
 public:
  explicit FnScorer(StepScoreFn fn) : fn_(std::move(fn)) {}
  double score(const RequestContext& ctx, std::string_view prefix,
               std::string_view step) override {
    return fn_(ctx, prefix, step);
  }

 private:
  StepScoreFn fn_;
};

class FnOrm final : public TrajectoryScorer {
 public:
  explicit FnOrm(TrajScoreFn fn) : fn_(std::move(fn)) {}
  double score(const RequestContext& ctx, std::string_view text) override {
    return fn_(ctx, text);
  }

 private:
  TrajScoreFn fn_;
};

inline std::vector<GeneratedStep> steps_of(std::initializer_list<std::string> texts,
                                           double likelihood = 0.5) {
  std::vector<GeneratedStep> out;
  for (const auto& t : texts) out.push_back({t, likelihood, false});
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("prefgen-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace prefgen::testing
