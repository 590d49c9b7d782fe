#pragma once

#include "memloop/backend.hpp"
#include "memloop/prompts.hpp"
#include "memloop/similarity.hpp"

#include <string>

namespace memloop {

/// What every model-facing stage needs for one session: the gateway, the
/// prompt set, the session's embedding cache, and the run clock used when a
/// memory has no timestamped source turn.
struct StageContext {
  Gateway& gateway;
  const PromptSet& prompts;
  EmbeddingCache& embeddings;
  std::string run_time;
};

}  // namespace memloop
