#include "tutor/baseline.h"

namespace tutor {

const std::string_view kMonolithicSystemMessage =
    "You are a friendly and knowledgeable middle-school mathematics tutor. You are talking with "
    "one student who is working through a practice problem. Read the problem, the answer key, "
    "the hint material, the full conversation so far, and the student's latest message, then "
    "write the tutor's next message. You are responsible for every part of the tutoring: "
    "1. Assessment: decide whether the latest answer is correct, keeping track of how well the "
    "student seems to understand the skill over the whole conversation. "
    "2. Feedback: confirm correct answers briefly; when an answer is wrong, point out the likely "
    "misconception or slip and explain the idea behind the correct method. If the student keeps "
    "making the same mistake, try a different explanation or a concrete example. "
    "3. Scaffolding: when the student asks for help or seems stuck, give a hint. Start with a "
    "small nudge, then a more specific hint, and give the worked solution when they need it. "
    "4. Motivation: if the student sounds frustrated, unsure, or has made several mistakes in a "
    "row, add a short word of encouragement. "
    "5. Progression: when the student has clearly understood the skill, tell them they are ready "
    "for the next problem. "
    "6. Integrity: be honest and kind, never make the student feel bad for asking for help, and "
    "stay on the topic of the problem. "
    "Keep explanations clear and age-appropriate, show the steps of any calculation you present, "
    "and check the student's reasoning rather than only their final answer. Be supportive, "
    "patient and positive, keep the reply under 120 words, and respond in plain text without "
    "markdown.";

TurnDecision baseline_policy_step(const LearnerSnapshot& s, const PolicyConfig& config) {
  std::vector<AgentProposal> actions;
  if (auto fb = feedback_propose(s, config)) {
    if (fb->action == ActionType::kRemediateDeep) {
      fb->action = ActionType::kRemediate;
      fb->rationale_key = "misconception";
    }
    actions.push_back(std::move(*fb));
  }

  const bool requested = s.last_input_kind == InputKind::kHintRequest;
  const bool missed = s.last_input_kind == InputKind::kAttempt && s.last_correct == false;
  if (requested || missed) {
    actions.push_back(AgentProposal{AgentId::kScaffold, ActionType::kHintFull,
                                    requested ? "hint_requested" : "error_streak",
                                    {{"level", "FULL"}}});
  }
  if (auto next = tutor_propose(s, config.mastery_threshold)) actions.push_back(std::move(*next));

  TurnDecision d;
  d.actions = std::move(actions);
  d.constraint_checks = audit_constraints(d.actions, s, config, requested);
  return d;
}

Prompt build_monolithic_prompt(const Problem& problem, const std::vector<DialogueTurn>& history,
                               const std::string& latest_student_message) {
  std::string user = "Problem: " + problem.prompt + "\nAnswer key: " + problem.answer + "\n";
  // The single-prompt tutor writes its own hints, so it gets the whole ladder.
  for (const auto& [level, text] : problem.hints) {
    std::string filled = text;
    if (auto at = filled.find("{answer}"); at != std::string::npos) filled.replace(at, 8, problem.answer);
    user += "Hint material (" + std::string(to_string(level)) + "): " + filled + "\n";
  }
  user += "\nConversation so far:\n";
  for (const auto& turn : history) {
    user += turn.speaker == "tutor" ? "Tutor: " : "Student: ";
    user += turn.text;
    user += '\n';
  }
  user += "\nStudent's latest message: " + latest_student_message + "\nTutor:";
  return Prompt{std::string(kMonolithicSystemMessage), std::move(user)};
}

}  // namespace tutor
