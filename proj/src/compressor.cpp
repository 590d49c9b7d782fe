#include "memloop/compressor.hpp"

#include "memloop/error.hpp"
#include "memloop/text.hpp"

#include <algorithm>
#include <random>

namespace memloop {

void CompressionConfig::validate() const {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ValidationError("compression ratio must lie in (0, 1]");
}

namespace {

std::mt19937_64 turn_generator(std::uint64_t seed, const std::string& session_id, std::size_t turn_index) {
  const std::uint64_t session_hash = fnv1a64(session_id);
  const std::uint64_t turn = turn_index;
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(session_hash), hi(session_hash), lo(turn), hi(turn)};
  return std::mt19937_64(seq);
}

double unit_draw(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

}  // namespace

DialogueSession compress_session(const DialogueSession& session, const CompressionConfig& config) {
  config.validate();
  DialogueSession out = session;
  for (DialogueTurn& turn : out.turns) {
    const std::vector<std::string> tokens = split_whitespace(turn.text);
    if (tokens.empty()) continue;
    auto gen = turn_generator(config.seed, session.session_id, turn.turn_index);
    std::vector<double> draws(tokens.size());
    for (double& d : draws) d = unit_draw(gen);

    std::vector<bool> keep(tokens.size());
    bool any = false;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      keep[i] = draws[i] < config.ratio;
      any = any || keep[i];
    }
    if (!any) keep[static_cast<std::size_t>(std::min_element(draws.begin(), draws.end()) - draws.begin())] = true;

    std::string text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!keep[i]) continue;
      if (!text.empty()) text += ' ';
      text += tokens[i];
    }
    turn.text = std::move(text);
  }
  return out;
}

}  // namespace memloop
