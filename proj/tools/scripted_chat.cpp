#include "scripted_chat.hpp"

#include "memloop/error.hpp"
#include "memloop/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace memloop::authoring {

using nlohmann::json;

namespace {

std::string after(std::string_view payload, std::string_view marker) {
  const auto pos = payload.find(marker);
  if (pos == std::string_view::npos) throw Error("scripted backend: payload lacks '" + std::string(marker) + "'");
  return std::string(payload.substr(pos + marker.size()));
}

std::string between(std::string_view payload, std::string_view open, std::string_view close) {
  const std::string rest = after(payload, open);
  const auto end = rest.find(close);
  return end == std::string::npos ? rest : rest.substr(0, end);
}

std::set<std::string> bare_tokens(std::string_view text) {
  std::set<std::string> out;
  for (const std::string& token : split_whitespace(to_lower_ascii(text))) {
    std::string bare;
    for (char c : token) {
      if (std::isalnum(static_cast<unsigned char>(c))) bare += c;
    }
    if (!bare.empty()) out.insert(bare);
  }
  return out;
}

constexpr std::string_view kQuestionLead = "Is there evidence in the conversation that ";

}  // namespace

std::vector<PlantedSession> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  const json doc = json::parse(in);
  std::vector<PlantedSession> planted;
  for (const json& s : doc.at("sessions")) {
    PlantedSession p;
    p.session.session_id = s.at("session_id").get<std::string>();
    std::size_t index = 0;
    for (const json& t : s.at("turns")) {
      DialogueTurn turn;
      turn.turn_index = index++;
      turn.speaker = parse_speaker(t.at("speaker").get<std::string>());
      turn.text = t.at("text").get<std::string>();
      if (t.contains("timestamp")) turn.timestamp = t.at("timestamp").get<std::string>();
      p.session.turns.push_back(std::move(turn));
    }
    for (const json& f : s.at("facts")) {
      PlantedFact fact;
      fact.turn = f.at("turn").get<std::size_t>();
      fact.gold = f.at("gold").get<std::string>();
      fact.initial = f.value("initial", fact.gold);
      fact.keywords = f.at("keywords").get<std::vector<std::string>>();
      fact.omitted_initially = f.value("omitted_initially", false);
      fact.question = f.at("question").get<std::string>();
      fact.answer = f.at("answer").get<std::string>();
      if (fact.turn >= p.session.turns.size()) throw ValidationError("fact points past the last turn: " + fact.gold);
      p.facts.push_back(std::move(fact));
    }
    p.hallucination = s.at("hallucination").at("text").get<std::string>();
    p.hallucination_anchor = s.at("hallucination").at("anchor_turn").get<std::size_t>();
    planted.push_back(std::move(p));
  }
  return planted;
}

std::vector<GoldAnnotation> gold_from_manifest(const std::vector<PlantedSession>& planted) {
  std::vector<GoldAnnotation> gold;
  for (const PlantedSession& p : planted) {
    GoldAnnotation g;
    g.session_id = p.session.session_id;
    for (const PlantedFact& f : p.facts) {
      g.gold_facts.push_back(f.gold);
      g.qa_items.push_back({f.question, f.answer});
    }
    gold.push_back(std::move(g));
  }
  return gold;
}

ScriptedChatBackend::ScriptedChatBackend(std::vector<PlantedSession> planted, std::vector<DialogueSession> observed,
                                         PromptSet prompts)
    : planted_(std::move(planted)), observed_(std::move(observed)), prompts_(std::move(prompts)) {
  if (planted_.size() != observed_.size()) throw ValidationError("observed sessions do not match the manifest");
  for (std::size_t i = 0; i < planted_.size(); ++i) {
    if (planted_[i].session.session_id != observed_[i].session_id ||
        planted_[i].session.turns.size() != observed_[i].turns.size()) {
      throw ValidationError("observed session " + observed_[i].session_id + " does not match the manifest");
    }
  }
}

const DialogueTurn& ScriptedChatBackend::observed_turn(const Located& at) const {
  const auto idx = static_cast<std::size_t>(at.session - planted_.data());
  return observed_[idx].turns[at.fact->turn];
}

bool ScriptedChatBackend::visible(const Located& at, std::string_view payload) const {
  const DialogueTurn& turn = observed_turn(at);
  const std::string line = "\n" + render_turns(std::span<const DialogueTurn>(&turn, 1));
  return payload.find(line) != std::string_view::npos;
}

bool ScriptedChatBackend::detectable(const Located& at) const {
  const auto tokens = bare_tokens(observed_turn(at).text);
  std::size_t present = 0;
  for (const std::string& k : at.fact->keywords) present += tokens.count(to_lower_ascii(k));
  return 2 * present >= at.fact->keywords.size();
}

std::vector<ScriptedChatBackend::Located> ScriptedChatBackend::facts_in(std::string_view payload) const {
  std::vector<Located> out;
  for (const PlantedSession& p : planted_) {
    for (const PlantedFact& f : p.facts) {
      Located at{&p, &f};
      if (visible(at, payload)) out.push_back(at);
    }
  }
  return out;
}

ScriptedChatBackend::Located ScriptedChatBackend::find_by_text(const std::string& text) const {
  for (const PlantedSession& p : planted_) {
    for (const PlantedFact& f : p.facts) {
      if (f.gold == text || f.initial == text) return {&p, &f};
    }
  }
  return {};
}

ScriptedChatBackend::Located ScriptedChatBackend::find_by_question(const std::string& question) const {
  for (const PlantedSession& p : planted_) {
    for (const PlantedFact& f : p.facts) {
      if (f.question == question) return {&p, &f};
    }
  }
  return {};
}

std::string ScriptedChatBackend::complete(const ChatRequest& request) {
  const std::string_view payload = request.user_payload;
  const std::string& role = request.role_prompt;
  if (role == prompts_.extract) return extract(payload);
  if (role == prompts_.supplement) return supplement(payload);
  if (role == prompts_.question) return question(payload);
  if (role == prompts_.judge) return judge(payload);
  if (role == prompts_.answer) return answer(payload);
  if (role == prompts_.answer_empty) return "I don't know.";
  if (role == prompts_.qa_judge) return qa_judge(payload);
  if (role == prompts_.entail) return entail(payload);
  throw Error("scripted backend: unrecognised role prompt");
}

std::string ScriptedChatBackend::extract(std::string_view payload) const {
  json items = json::array();
  for (const PlantedSession& p : planted_) {
    const auto idx = static_cast<std::size_t>(&p - planted_.data());
    const DialogueTurn& anchor = observed_[idx].turns[p.hallucination_anchor];
    const bool anchored =
        payload.find("\n" + render_turns(std::span<const DialogueTurn>(&anchor, 1))) != std::string_view::npos;
    for (const PlantedFact& f : p.facts) {
      Located at{&p, &f};
      if (!f.omitted_initially && visible(at, payload) && detectable(at)) items.push_back(f.initial);
      if (anchored && f.turn == p.hallucination_anchor) items.push_back(p.hallucination);
    }
    if (anchored && std::none_of(p.facts.begin(), p.facts.end(),
                                 [&](const PlantedFact& f) { return f.turn == p.hallucination_anchor; })) {
      items.push_back(p.hallucination);
    }
  }
  return items.dump(2);
}

std::string ScriptedChatBackend::supplement(std::string_view payload) const {
  json items = json::array();
  for (const Located& at : facts_in(payload)) {
    if (detectable(at)) items.push_back(at.fact->gold);
  }
  return items.dump(2);
}

std::string ScriptedChatBackend::question(std::string_view payload) const {
  std::string text = collapse_whitespace(after(payload, "Memory entry: "));
  return std::string(kQuestionLead) + text + "?";
}

std::string ScriptedChatBackend::judge(std::string_view payload) const {
  std::string probe = between(payload, "Question: ", "\n\nConversation:");
  if (!probe.starts_with(kQuestionLead) || !probe.ends_with("?")) return R"({"found": "no"})";
  const std::string text = probe.substr(kQuestionLead.size(), probe.size() - kQuestionLead.size() - 1);
  const Located at = find_by_text(text);
  if (at.fact == nullptr || !visible(at, payload) || !detectable(at)) return R"({"found": "no"})";
  return json{{"found", "yes"}, {"answer", at.fact->gold}, {"turns", {at.fact->turn}}}.dump();
}

std::string ScriptedChatBackend::answer(std::string_view payload) const {
  const std::string memories = between(payload, "Memories:\n", "\nQuestion: ");
  const std::string asked(trim(after(payload, "\nQuestion: ")));
  const Located at = find_by_question(asked);
  if (at.fact == nullptr) return "I don't know.";
  const bool remembered = memories.find("] " + at.fact->gold + "\n") != std::string::npos ||
                          memories.find("] " + at.fact->initial + "\n") != std::string::npos;
  return remembered ? "From what you told me: " + at.fact->answer + "." : "I don't know.";
}

std::string ScriptedChatBackend::qa_judge(std::string_view payload) const {
  const std::string gold = between(payload, "Gold answer: ", "\n");
  const std::string candidate = after(payload, "Candidate answer: ");
  return json{{"correct", contains_ci(candidate, gold)}}.dump();
}

std::string ScriptedChatBackend::entail(std::string_view payload) const {
  const std::string gold = between(payload, "Reference fact: ", "\nCandidate memory: ");
  const std::string candidate = after(payload, "\nCandidate memory: ");
  if (candidate == gold) return "yes";
  const Located at = find_by_text(gold);
  return at.fact != nullptr && at.fact->gold == gold && at.fact->initial == candidate ? "yes" : "no";
}

}  // namespace memloop::authoring
