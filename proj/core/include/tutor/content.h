#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tutor/agents.h"

namespace tutor {

struct Problem {
  std::string problem_id;
  std::string prompt;
  std::string answer;
  // A plausible wrong answer; simulated learners type it when they miss.
  std::string distractor;
  std::map<HintLevel, std::string> hints;

  friend bool operator==(const Problem&, const Problem&) = default;
};

struct ResolvedHint {
  std::string key;   // "<skill>.<problem>.hint_<level>"
  HintLevel level;   // may be lower than requested when a level is missing
  std::string text;  // authored text; FULL hints carry an {answer} slot
};

// Domain-expert content: problems and their graded hints, keyed by skill.
class ContentStore {
 public:
  void add(const std::string& skill_id, Problem problem);

  bool has_skill(const std::string& skill_id) const { return skills_.count(skill_id) != 0; }
  const Problem& problem(const std::string& skill_id, const std::string& problem_id) const;
  // Problems for a skill in insertion order.
  std::vector<const Problem*> problems(const std::string& skill_id) const;
  std::vector<std::string> skills() const;

  // Falls back to the nearest lower level when the requested one is missing.
  ResolvedHint resolve_hint(const std::string& skill_id, const std::string& problem_id,
                            HintLevel level) const;

 private:
  struct SkillContent {
    std::vector<Problem> problems;
  };
  std::map<std::string, SkillContent> skills_;
};

std::string hint_key(const std::string& skill_id, const std::string& problem_id, HintLevel level);

// Lookup key for the authored hint at `level`.
std::string domain_hint(const ContentStore& store, const std::string& skill_id,
                        const std::string& problem_id, HintLevel level);

// Canonical form for short math answers: no spaces, lower case, reduced
// integer fractions, no trailing decimal zeros, right-hand side of "x = 4".
std::string canonical_answer(std::string_view raw);
bool answers_match(std::string_view given, std::string_view expected);

}  // namespace tutor
