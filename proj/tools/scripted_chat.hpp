#pragma once

#include "memloop/backend.hpp"
#include "memloop/dialogue.hpp"
#include "memloop/evaluation.hpp"
#include "memloop/prompts.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace memloop::authoring {

struct PlantedFact {
  std::size_t turn = 0;
  std::string gold;
  std::string initial;  // what the first pass says; equals gold unless paraphrased
  std::vector<std::string> keywords;
  bool omitted_initially = false;
  std::string question;
  std::string answer;
};

struct PlantedSession {
  DialogueSession session;
  std::vector<PlantedFact> facts;
  std::string hallucination;
  std::size_t hallucination_anchor = 0;
};

std::vector<PlantedSession> load_manifest(const std::filesystem::path& path);

std::vector<GoldAnnotation> gold_from_manifest(const std::vector<PlantedSession>& planted);

/// Rule-based stand-in for a chat model, driven by a planted-facts manifest.
/// It reads the same prompts and payloads the pipeline sends and answers as a
/// well-behaved model would: the first pass skips facts flagged as omitted and
/// adds the planted hallucination, and later stages only confirm facts whose
/// source turn is visible with at least half of its keywords intact.
class ScriptedChatBackend final : public ChatBackend {
 public:
  /// `observed` are the sessions the pipeline actually sees, e.g. after
  /// compression; they must keep the manifest's session ids and turn indices.
  ScriptedChatBackend(std::vector<PlantedSession> planted, std::vector<DialogueSession> observed, PromptSet prompts);

  std::string complete(const ChatRequest& request) override;

 private:
  struct Located {
    const PlantedSession* session = nullptr;
    const PlantedFact* fact = nullptr;
  };

  bool visible(const Located& at, std::string_view payload) const;
  bool detectable(const Located& at) const;
  std::vector<Located> facts_in(std::string_view payload) const;
  Located find_by_text(const std::string& text) const;
  Located find_by_question(const std::string& question) const;
  const DialogueTurn& observed_turn(const Located& at) const;

  std::string extract(std::string_view payload) const;
  std::string supplement(std::string_view payload) const;
  std::string question(std::string_view payload) const;
  std::string judge(std::string_view payload) const;
  std::string answer(std::string_view payload) const;
  std::string qa_judge(std::string_view payload) const;
  std::string entail(std::string_view payload) const;

  std::vector<PlantedSession> planted_;
  std::vector<DialogueSession> observed_;
  PromptSet prompts_;
};

}  // namespace memloop::authoring
