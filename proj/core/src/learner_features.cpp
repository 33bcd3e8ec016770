#include "tutor/learner_features.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <unordered_map>

#include <boost/tokenizer.hpp>
#include <nlohmann/json.hpp>

namespace tutor {

bool detect_wheel_spinning(std::uint32_t attempts_without_success, bool mastered,
                           std::uint32_t threshold) {
  return !mastered && attempts_without_success >= threshold;
}

void LearnerFeatureState::enter_problem(const std::string& problem_id) {
  if (problem_id != current_problem_) {
    current_problem_ = problem_id;
    hints_problem_ = 0;
  }
}

void LearnerFeatureState::observe_attempt(const std::string& skill_id,
                                          const std::string& problem_id,
                                          std::int64_t /*timestamp_ms*/,
                                          std::uint32_t response_ms, bool correct,
                                          bool assisted) {
  enter_problem(problem_id);
  SkillTrack& t = skills_[skill_id];
  t.window.push_back(correct);
  while (t.window.size() > config_.window) t.window.pop_front();
  ++t.opportunity_count;
  if (correct) {
    t.error_streak = 0;
    if (!assisted) t.attempts_without_success = 0;
    else ++t.attempts_without_success;
  } else {
    ++t.error_streak;
    ++t.attempts_without_success;
  }
  time_on_task_ms_ += response_ms;
}

void LearnerFeatureState::observe_hint(const std::string& skill_id, const std::string& problem_id,
                                       std::int64_t timestamp_ms) {
  enter_problem(problem_id);
  SkillTrack& t = skills_[skill_id];
  ++t.hints_skill;
  ++hints_problem_;
  t.last_hint_ms = timestamp_ms;
}

const LearnerFeatureState::SkillTrack* LearnerFeatureState::track(
    const std::string& skill_id) const {
  auto it = skills_.find(skill_id);
  return it == skills_.end() ? nullptr : &it->second;
}

FeatureVector LearnerFeatureState::snapshot(const std::string& skill_id, std::int64_t now_ms,
                                            bool mastered) const {
  FeatureVector fv;
  fv.hints_problem = hints_problem_;
  fv.time_on_task_ms = time_on_task_ms_;
  if (const SkillTrack* t = track(skill_id)) {
    fv.rolling_accuracy = rolling_accuracy(t->window);
    fv.hints_skill = t->hints_skill;
    fv.opportunity_count = t->opportunity_count;
    fv.error_streak = t->error_streak;
    if (t->last_hint_ms) fv.time_since_last_hint_ms = std::max<std::int64_t>(0, now_ms - *t->last_hint_ms);
    fv.wheel_spinning =
        detect_wheel_spinning(t->attempts_without_success, mastered, config_.wheel_spin_threshold);
  }
  return fv;
}

FeatureVector update_features(LearnerFeatureState& state, const InteractionEvent& event,
                              bool mastered) {
  state.enter_problem(event.problem_id);
  if (event.hint_requested) {
    state.observe_hint(event.skill_id, event.problem_id, event.timestamp_ms);
  }
  const bool assisted = state.hints_problem() > 0;
  state.observe_attempt(event.skill_id, event.problem_id, event.timestamp_ms, event.response_ms,
                        event.correct, assisted);
  return state.snapshot(event.skill_id, event.timestamp_ms, mastered);
}

// ---- CSV ingestion ----

namespace {

const std::vector<std::string>& logical_columns() {
  static const std::vector<std::string> cols = {
      "learner_id", "skill_id",    "problem_id",    "timestamp_ms", "correct",
      "hint",       "response_ms", "attempt_index", "confidence"};
  return cols;
}

std::vector<std::string> split_csv(const std::string& line) {
  using Sep = boost::escaped_list_separator<char>;
  boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
  return {tok.begin(), tok.end()};
}

bool parse_bool(const std::string& raw, std::size_t line, const std::string& column) {
  if (raw == "1" || raw == "true" || raw == "TRUE") return true;
  if (raw == "0" || raw == "false" || raw == "FALSE") return false;
  throw ParseError(line, column, "expected 0/1, got '" + raw + "'");
}

template <typename Int>
Int parse_int(const std::string& raw, std::size_t line, const std::string& column) {
  Int value{};
  const auto* first = raw.data();
  const auto* last = raw.data() + raw.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (raw.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(line, column, "expected an integer, got '" + raw + "'");
  }
  return value;
}

}  // namespace

ColumnMap ColumnMap::identity() {
  ColumnMap map;
  for (const auto& c : logical_columns()) map.names[c] = c;
  return map;
}

ColumnMap ColumnMap::from_json(const nlohmann::json& doc) {
  ColumnMap map = identity();
  if (!doc.is_object()) throw ValidationError("", "column map must be a JSON object");
  for (const auto& [logical, header] : doc.items()) {
    if (!map.names.count(logical)) {
      throw ValidationError(logical, "unknown logical column '" + logical + "'");
    }
    map.names[logical] = header.get<std::string>();
  }
  return map;
}

ColumnMap ColumnMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open column map " + path.string());
  return from_json(nlohmann::json::parse(in));
}

const std::string& ColumnMap::header_for(const std::string& logical) const {
  return names.at(logical);
}

IngestResult ingest_log(std::istream& in, const IngestOptions& options) {
  IngestResult result;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "", "missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_csv(line);
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& logical : logical_columns()) {
    const auto& name = options.columns.header_for(logical);
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw ParseError(1, name, "header is missing column for '" + logical + "'");
    }
    index[logical] = static_cast<std::size_t>(it - header.begin());
  }

  std::unordered_map<std::string, std::int64_t> last_ts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    InteractionEvent ev;
    try {
      std::vector<std::string> cells;
      try {
        cells = split_csv(line);
      } catch (const boost::escaped_list_error& e) {
        throw ParseError(line_no, "", std::string("malformed CSV: ") + e.what());
      }
      if (cells.size() != header.size()) {
        throw ParseError(line_no, "",
                         "expected " + std::to_string(header.size()) + " fields, got " +
                             std::to_string(cells.size()));
      }
      auto cell = [&](const char* logical) -> const std::string& { return cells[index.at(logical)]; };
      auto col = [&](const char* logical) { return options.columns.header_for(logical); };

      ev.learner_id = cell("learner_id");
      ev.skill_id = cell("skill_id");
      ev.problem_id = cell("problem_id");
      if (ev.learner_id.empty()) throw ParseError(line_no, col("learner_id"), "empty learner id");
      if (ev.skill_id.empty()) throw ParseError(line_no, col("skill_id"), "empty skill id");
      ev.timestamp_ms = parse_int<std::int64_t>(cell("timestamp_ms"), line_no, col("timestamp_ms"));
      ev.correct = parse_bool(cell("correct"), line_no, col("correct"));
      ev.hint_requested = parse_bool(cell("hint"), line_no, col("hint"));
      ev.response_ms = parse_int<std::uint32_t>(cell("response_ms"), line_no, col("response_ms"));
      ev.attempt_index =
          parse_int<std::uint32_t>(cell("attempt_index"), line_no, col("attempt_index"));
      if (ev.attempt_index == 0) {
        throw ParseError(line_no, col("attempt_index"), "attempt_index is 1-based");
      }
      if (const auto& c = cell("confidence"); !c.empty()) {
        const int v = parse_int<int>(c, line_no, col("confidence"));
        if (v < 1 || v > 5) throw ParseError(line_no, col("confidence"), "confidence must be 1-5");
        ev.confidence = v;
      }
    } catch (const ParseError& e) {
      if (options.on_row_error == RowErrorPolicy::kAbort) throw;
      result.skipped.push_back(e);
      continue;
    }

    auto [it, fresh] = last_ts.try_emplace(ev.learner_id, ev.timestamp_ms);
    if (!fresh) {
      if (ev.timestamp_ms < it->second) {
        throw ParseError(line_no, options.columns.header_for("timestamp_ms"),
                         "timestamp regression for learner '" + ev.learner_id + "' (" +
                             std::to_string(ev.timestamp_ms) + " < " +
                             std::to_string(it->second) + ")");
      }
      it->second = ev.timestamp_ms;
    }
    result.events.push_back(std::move(ev));
  }
  return result;
}

FeatureExtractor::FeatureExtractor(FeatureConfig config, BktParamTable params,
                                   double mastery_threshold)
    : config_(config), params_(std::move(params)), mastery_threshold_(mastery_threshold) {}

FeatureVector FeatureExtractor::consume(const InteractionEvent& event) {
  auto& state = learners_.try_emplace(event.learner_id, config_).first->second;
  const BktParams& p = params_.get(event.skill_id);
  auto key = std::make_pair(event.learner_id, event.skill_id);
  auto it = mastery_.find(key);
  if (it == mastery_.end()) it = mastery_.emplace(key, SkillMastery::initial(event.skill_id, p)).first;
  it->second = bkt_update(it->second, p, event.correct);
  return update_features(state, event, is_mastered(it->second.p_mastery, mastery_threshold_));
}

void to_json(nlohmann::json& j, const FeatureVector& fv) {
  j = nlohmann::json{{"rolling_accuracy", fv.rolling_accuracy},
                     {"hints_problem", fv.hints_problem},
                     {"hints_skill", fv.hints_skill},
                     {"time_since_last_hint_ms", nullptr},
                     {"time_on_task_ms", fv.time_on_task_ms},
                     {"opportunity_count", fv.opportunity_count},
                     {"error_streak", fv.error_streak},
                     {"wheel_spinning", fv.wheel_spinning}};
  if (fv.time_since_last_hint_ms) j["time_since_last_hint_ms"] = *fv.time_since_last_hint_ms;
}

void from_json(const nlohmann::json& j, FeatureVector& fv) {
  j.at("rolling_accuracy").get_to(fv.rolling_accuracy);
  j.at("hints_problem").get_to(fv.hints_problem);
  j.at("hints_skill").get_to(fv.hints_skill);
  const auto& since = j.at("time_since_last_hint_ms");
  fv.time_since_last_hint_ms =
      since.is_null() ? std::nullopt : std::optional<std::int64_t>(since.get<std::int64_t>());
  j.at("time_on_task_ms").get_to(fv.time_on_task_ms);
  j.at("opportunity_count").get_to(fv.opportunity_count);
  j.at("error_streak").get_to(fv.error_streak);
  j.at("wheel_spinning").get_to(fv.wheel_spinning);
}

void to_json(nlohmann::json& j, const InteractionEvent& e) {
  j = nlohmann::json{{"learner_id", e.learner_id},     {"skill_id", e.skill_id},
                     {"problem_id", e.problem_id},     {"timestamp_ms", e.timestamp_ms},
                     {"correct", e.correct},           {"hint_requested", e.hint_requested},
                     {"response_ms", e.response_ms},   {"attempt_index", e.attempt_index},
                     {"confidence", nullptr}};
  if (e.confidence) j["confidence"] = *e.confidence;
}

}  // namespace tutor
