#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "tutor/content.h"
#include "tutor/orchestrator.h"

namespace fixtures {

inline std::shared_ptr<tutor::ContentStore> content(int problems = 3) {
  auto c = std::make_shared<tutor::ContentStore>();
  for (int i = 1; i <= problems; ++i) {
    tutor::Problem p;
    p.problem_id = "p" + std::to_string(i);
    p.prompt = std::to_string(i) + " + 10";
    p.answer = std::to_string(i + 10);
    p.distractor = std::to_string(i + 11);
    p.hints = {{tutor::HintLevel::kMin, "Start with the ones."},
               {tutor::HintLevel::kMed, "Add " + std::to_string(i) + " to ten."},
               {tutor::HintLevel::kFull, "The sum is {answer}."}};
    c->add("add", std::move(p));
  }
  return c;
}

inline tutor::StudentInput attempt(std::string answer) {
  tutor::StudentInput in;
  in.kind = tutor::InputKind::kAttempt;
  in.answer = std::move(answer);
  return in;
}

inline tutor::StudentInput hint() {
  tutor::StudentInput in;
  in.kind = tutor::InputKind::kHintRequest;
  return in;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("tutor_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace fixtures
