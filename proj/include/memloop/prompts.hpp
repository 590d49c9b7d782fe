#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace memloop {

/// System prompts for every model interaction. Defaults are the files under
/// prompts/, compiled in at build time.
struct PromptSet {
  std::string extract;       // initial extraction
  std::string supplement;    // re-extraction over uncovered turns
  std::string question;      // probing question per entry
  std::string judge;         // evidence seeking over the dialogue
  std::string answer;        // QA with retrieved memories
  std::string answer_empty;  // QA when nothing was retrieved
  std::string qa_judge;      // grades a QA answer against gold
  std::string entail;        // LLM matcher for evaluation

  static PromptSet defaults();

  /// Defaults, with any <name>.txt present in `dir` taking precedence.
  static PromptSet load(const std::optional<std::filesystem::path>& dir);
};

}  // namespace memloop
