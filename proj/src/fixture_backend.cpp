#include "memloop/fixture_backend.hpp"

#include "memloop/error.hpp"
#include "memloop/text.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace memloop {

using nlohmann::json;

std::size_t fixture_bucket(std::string_view token, std::size_t dimension) {
  return static_cast<std::size_t>(fnv1a64(token) % dimension);
}

EmbeddingVector fixture_embed(std::string_view text, std::size_t dimension) {
  if (dimension == 0) throw ValidationError("fixture embedding dimension must be positive");
  const std::vector<std::string> tokens = split_whitespace(to_lower_ascii(text));
  if (tokens.empty()) throw ValidationError("cannot embed text with no tokens");
  std::vector<double> counts(dimension, 0.0);
  for (const std::string& token : tokens) counts[fixture_bucket(token, dimension)] += 1.0;
  double norm = 0.0;
  for (double c : counts) norm += c * c;
  norm = std::sqrt(norm);
  for (double& c : counts) c /= norm;
  return EmbeddingVector(std::move(counts));
}

HashedEmbeddingBackend::HashedEmbeddingBackend(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw ConfigError("fixture embedding dimension must be positive");
}

std::vector<EmbeddingVector> HashedEmbeddingBackend::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) out.push_back(fixture_embed(text, dimension_));
  return out;
}

RecordedEmbeddingBackend::RecordedEmbeddingBackend(std::unordered_map<std::string, EmbeddingVector> vectors)
    : vectors_(std::move(vectors)) {}

RecordedEmbeddingBackend RecordedEmbeddingBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open embedding fixture file " + path.string());
  std::unordered_map<std::string, EmbeddingVector> vectors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
      const std::string text = obj.at("text").get<std::string>();
      vectors.insert_or_assign(text, EmbeddingVector(obj.at("vector").get<std::vector<double>>()));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return RecordedEmbeddingBackend(std::move(vectors));
}

std::vector<EmbeddingVector> RecordedEmbeddingBackend::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) {
    auto it = vectors_.find(text);
    if (it == vectors_.end()) throw FixtureMissError("embedding", sha256_hex(text));
    out.push_back(it->second);
  }
  return out;
}

FixtureChatBackend::FixtureChatBackend(std::unordered_map<std::string, std::string> responses)
    : responses_(std::move(responses)) {}

FixtureChatBackend FixtureChatBackend::from_files(const std::vector<std::filesystem::path>& paths) {
  std::unordered_map<std::string, std::string> responses;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open chat fixture file " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      std::string digest;
      std::string response;
      try {
        const json obj = json::parse(line);
        digest = obj.at("digest").get<std::string>();
        response = obj.at("response").get<std::string>();
      } catch (const json::exception& e) {
        throw ParseError(path.string(), line_no, e.what());
      }
      auto [it, inserted] = responses.try_emplace(digest, response);
      if (!inserted && it->second != response) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": conflicting responses recorded for digest " + digest);
      }
    }
  }
  return FixtureChatBackend(std::move(responses));
}

std::string FixtureChatBackend::complete(const ChatRequest& request) {
  const std::string digest = request_digest(request);
  auto it = responses_.find(digest);
  if (it == responses_.end()) throw FixtureMissError("chat", digest);
  return it->second;
}

RecordingChatBackend::RecordingChatBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}

std::string RecordingChatBackend::complete(const ChatRequest& request) {
  std::string response = inner_->complete(request);
  std::lock_guard lock(mutex_);
  recorded_.insert_or_assign(request_digest(request), response);
  return response;
}

std::map<std::string, std::string> RecordingChatBackend::recorded() const {
  std::lock_guard lock(mutex_);
  return recorded_;
}

void RecordingChatBackend::write(const std::filesystem::path& path) const { write_chat_fixtures(path, recorded()); }

void write_chat_fixtures(const std::filesystem::path& path, const std::map<std::string, std::string>& responses) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write chat fixture file " + path.string());
  for (const auto& [digest, response] : responses) {
    nlohmann::ordered_json obj;
    obj["digest"] = digest;
    obj["response"] = response;
    out << obj.dump() << '\n';
  }
}

}  // namespace memloop
