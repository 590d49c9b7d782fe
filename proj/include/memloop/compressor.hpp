#pragma once

#include "memloop/dialogue.hpp"

#include <cstdint>

namespace memloop {

struct CompressionConfig {
  double ratio = 1.0;  // fraction of tokens kept, in (0, 1]
  std::uint64_t seed = 0;

  void validate() const;
};

/// Seeded random token drop. Each whitespace token of each turn is kept
/// independently with probability `ratio`, drawn from a generator seeded by
/// (seed, session_id, turn_index); survivors are re-joined with single
/// spaces. A turn never loses every token: if the draw keeps none, the token
/// closest to being kept survives. Speakers, indices and timestamps are
/// untouched.
DialogueSession compress_session(const DialogueSession& session, const CompressionConfig& config);

}  // namespace memloop
