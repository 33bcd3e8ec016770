#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <ranges>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tutor/errors.h"
#include "tutor/knowledge_tracing.h"

namespace tutor {

struct InteractionEvent {
  std::string learner_id;
  std::string skill_id;
  std::string problem_id;
  std::int64_t timestamp_ms = 0;
  bool correct = false;
  bool hint_requested = false;
  std::uint32_t response_ms = 0;
  std::uint32_t attempt_index = 1;
  std::optional<int> confidence;

  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

struct FeatureVector {
  double rolling_accuracy = 0.5;
  std::uint32_t hints_problem = 0;
  std::uint32_t hints_skill = 0;
  std::optional<std::int64_t> time_since_last_hint_ms;
  std::int64_t time_on_task_ms = 0;
  std::uint32_t opportunity_count = 0;
  std::uint32_t error_streak = 0;
  bool wheel_spinning = false;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct FeatureConfig {
  std::size_t window = 5;
  std::uint32_t wheel_spin_threshold = 10;

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

// Fraction of true values; an empty window is the neutral 0.5.
template <std::ranges::sized_range Window>
double rolling_accuracy(const Window& window) {
  const auto n = std::ranges::size(window);
  if (n == 0) return 0.5;
  std::size_t hits = 0;
  for (bool outcome : window) hits += outcome ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(n);
}

bool detect_wheel_spinning(std::uint32_t attempts_without_success, bool mastered,
                           std::uint32_t threshold = FeatureConfig{}.wheel_spin_threshold);

// Running feature state for one learner stream. Single writer.
class LearnerFeatureState {
 public:
  explicit LearnerFeatureState(FeatureConfig config = {}) : config_(config) {}

  // Moves to `problem_id`, resetting per-problem counters when it changes.
  void enter_problem(const std::string& problem_id);

  // `assisted` marks attempts made after a hint on the same problem; an
  // assisted success does not clear the wheel-spinning counter.
  void observe_attempt(const std::string& skill_id, const std::string& problem_id,
                       std::int64_t timestamp_ms, std::uint32_t response_ms, bool correct,
                       bool assisted);

  void observe_hint(const std::string& skill_id, const std::string& problem_id,
                    std::int64_t timestamp_ms);

  FeatureVector snapshot(const std::string& skill_id, std::int64_t now_ms, bool mastered) const;

  const FeatureConfig& config() const { return config_; }
  const std::string& current_problem() const { return current_problem_; }
  std::uint32_t hints_problem() const { return hints_problem_; }

  struct SkillTrack {
    std::deque<bool> window;
    std::uint32_t hints_skill = 0;
    std::uint32_t opportunity_count = 0;
    std::uint32_t error_streak = 0;
    std::uint32_t attempts_without_success = 0;
    std::optional<std::int64_t> last_hint_ms;

    friend bool operator==(const SkillTrack&, const SkillTrack&) = default;
  };

  const SkillTrack* track(const std::string& skill_id) const;

  friend bool operator==(const LearnerFeatureState&, const LearnerFeatureState&) = default;

 private:
  FeatureConfig config_;
  std::map<std::string, SkillTrack> skills_;
  std::string current_problem_;
  std::uint32_t hints_problem_ = 0;
  std::int64_t time_on_task_ms_ = 0;
};

// Folds one logged event into the learner's state and returns the resulting
// features. A logged hint counts as a hint followed by an assisted attempt.
FeatureVector update_features(LearnerFeatureState& state, const InteractionEvent& event,
                              bool mastered = false);

// Maps logical column names onto the header names of a particular export.
struct ColumnMap {
  std::map<std::string, std::string> names;

  static ColumnMap identity();
  static ColumnMap from_json(const nlohmann::json& doc);
  static ColumnMap load(const std::filesystem::path& path);

  const std::string& header_for(const std::string& logical) const;
};

enum class RowErrorPolicy { kAbort, kSkip };

struct IngestOptions {
  ColumnMap columns = ColumnMap::identity();
  RowErrorPolicy on_row_error = RowErrorPolicy::kAbort;
};

struct IngestResult {
  std::vector<InteractionEvent> events;
  std::vector<ParseError> skipped;
};

// Parses a headered CSV log. Malformed rows abort or are skipped per
// `options`; a per-learner timestamp regression always aborts.
IngestResult ingest_log(std::istream& in, const IngestOptions& options = {});

// Replays a whole event log, one feature snapshot per event. Mastery for the
// wheel-spinning rule comes from BKT with `params`.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig config = {}, BktParamTable params = {},
                            double mastery_threshold = kDefaultMasteryThreshold);

  FeatureVector consume(const InteractionEvent& event);

 private:
  FeatureConfig config_;
  BktParamTable params_;
  double mastery_threshold_;
  std::map<std::string, LearnerFeatureState> learners_;
  std::map<std::pair<std::string, std::string>, SkillMastery> mastery_;
};

void to_json(nlohmann::json& j, const FeatureVector& fv);
void from_json(const nlohmann::json& j, FeatureVector& fv);
void to_json(nlohmann::json& j, const InteractionEvent& e);

}  // namespace tutor
