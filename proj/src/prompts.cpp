#include "memloop/prompts.hpp"

#include "memloop/embedded_prompts.hpp"
#include "memloop/error.hpp"

#include <fstream>
#include <sstream>

namespace memloop {

PromptSet PromptSet::defaults() {
  namespace ep = embedded_prompts;
  return PromptSet{
      std::string(ep::extract),  std::string(ep::supplement),   std::string(ep::question),
      std::string(ep::judge),    std::string(ep::answer),       std::string(ep::answer_empty),
      std::string(ep::qa_judge), std::string(ep::entail),
  };
}

PromptSet PromptSet::load(const std::optional<std::filesystem::path>& dir) {
  PromptSet prompts = defaults();
  if (!dir) return prompts;
  if (!std::filesystem::is_directory(*dir)) throw ConfigError("prompt directory not found: " + dir->string());

  auto override_from = [&](const char* name, std::string& slot) {
    const auto path = *dir / (std::string(name) + ".txt");
    if (!std::filesystem::exists(path)) return;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    slot = buf.str();
  };
  override_from("extract", prompts.extract);
  override_from("supplement", prompts.supplement);
  override_from("question", prompts.question);
  override_from("judge", prompts.judge);
  override_from("answer", prompts.answer);
  override_from("answer_empty", prompts.answer_empty);
  override_from("qa_judge", prompts.qa_judge);
  override_from("entail", prompts.entail);
  return prompts;
}

}  // namespace memloop
