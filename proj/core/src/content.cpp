#include "tutor/content.h"

#include <cctype>
#include <charconv>
#include <numeric>

#include "tutor/errors.h"

namespace tutor {

void ContentStore::add(const std::string& skill_id, Problem problem) {
  auto& content = skills_[skill_id];
  for (const auto& p : content.problems) {
    if (p.problem_id == problem.problem_id) {
      throw ValidationError("problem_id", "duplicate problem '" + problem.problem_id +
                                              "' for skill '" + skill_id + "'");
    }
  }
  content.problems.push_back(std::move(problem));
}

const Problem& ContentStore::problem(const std::string& skill_id,
                                     const std::string& problem_id) const {
  auto it = skills_.find(skill_id);
  if (it != skills_.end()) {
    for (const auto& p : it->second.problems) {
      if (p.problem_id == problem_id) return p;
    }
  }
  throw NotFoundError("unknown problem '" + skill_id + "." + problem_id + "'");
}

std::vector<const Problem*> ContentStore::problems(const std::string& skill_id) const {
  std::vector<const Problem*> out;
  if (auto it = skills_.find(skill_id); it != skills_.end()) {
    for (const auto& p : it->second.problems) out.push_back(&p);
  }
  return out;
}

std::vector<std::string> ContentStore::skills() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : skills_) out.push_back(id);
  return out;
}

std::string hint_key(const std::string& skill_id, const std::string& problem_id, HintLevel level) {
  std::string suffix = level == HintLevel::kMin ? "hint_min"
                       : level == HintLevel::kMed ? "hint_med"
                                                   : "hint_full";
  return skill_id + "." + problem_id + "." + suffix;
}

ResolvedHint ContentStore::resolve_hint(const std::string& skill_id,
                                        const std::string& problem_id, HintLevel level) const {
  const Problem& p = problem(skill_id, problem_id);
  for (int l = static_cast<int>(level); l >= 0; --l) {
    const auto lvl = static_cast<HintLevel>(l);
    if (auto it = p.hints.find(lvl); it != p.hints.end()) {
      return ResolvedHint{hint_key(skill_id, problem_id, lvl), lvl, it->second};
    }
  }
  throw NotFoundError("no hint at or below level " + std::string(to_string(level)) + " for '" +
                      skill_id + "." + problem_id + "'");
}

std::string domain_hint(const ContentStore& store, const std::string& skill_id,
                        const std::string& problem_id, HintLevel level) {
  return store.resolve_hint(skill_id, problem_id, level).key;
}

namespace {

bool parse_long(std::string_view s, long long& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

std::string canonical_answer(std::string_view raw) {
  std::string s;
  for (unsigned char ch : raw) {
    if (!std::isspace(ch)) s.push_back(static_cast<char>(std::tolower(ch)));
  }
  if (auto eq = s.rfind('='); eq != std::string::npos) s = s.substr(eq + 1);
  if (!s.empty() && s.front() == '+') s.erase(0, 1);

  if (auto slash = s.find('/'); slash != std::string::npos) {
    long long num = 0, den = 0;
    if (parse_long(std::string_view(s).substr(0, slash), num) &&
        parse_long(std::string_view(s).substr(slash + 1), den) && den != 0) {
      if (den < 0) {
        num = -num;
        den = -den;
      }
      const long long g = std::gcd(num < 0 ? -num : num, den);
      if (g > 1) {
        num /= g;
        den /= g;
      }
      return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
    }
    return s;
  }
  if (auto dot = s.find('.'); dot != std::string::npos) {
    long long whole = 0;
    const auto frac = s.substr(dot + 1);
    const bool numeric = (dot == 0 || parse_long(std::string_view(s).substr(0, dot), whole) ||
                          s.substr(0, dot) == "-") &&
                         !frac.empty() &&
                         frac.find_first_not_of("0123456789") == std::string::npos;
    if (numeric) {
      while (!s.empty() && s.back() == '0') s.pop_back();
      if (!s.empty() && s.back() == '.') s.pop_back();
      if (s.empty() || s == "-") s = "0";
    }
  }
  return s;
}

bool answers_match(std::string_view given, std::string_view expected) {
  const auto g = canonical_answer(given);
  return !g.empty() && g == canonical_answer(expected);
}

}  // namespace tutor
