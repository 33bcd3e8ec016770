#pragma once

#include <string>
#include <vector>

#include "tutor/agents.h"
#include "tutor/content.h"
#include "tutor/orchestrator.h"
#include "tutor/renderer.h"

namespace tutor {

// Over-assisting comparison policy: every hint request is answered with
// HINT_FULL on the spot, every wrong attempt earns a proactive HINT_FULL, and
// neither attempt-before-hint nor a cap is applied. Correct and incorrect
// feedback follows the ensemble's rule table without deep remediation.
TurnDecision baseline_policy_step(const LearnerSnapshot& snapshot,
                                  const PolicyConfig& config = {});

// Instruction block a single-prompt tutor needs, since it makes every
// pedagogical decision itself.
extern const std::string_view kMonolithicSystemMessage;

// Full-history prompt the monolithic tutor would be sent for this turn: the
// instruction block, the problem with its answer key and hint ladder, every
// earlier utterance, and the latest message.
Prompt build_monolithic_prompt(const Problem& problem, const std::vector<DialogueTurn>& history,
                               const std::string& latest_student_message);

}  // namespace tutor
