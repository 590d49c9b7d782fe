#include "memloop/http_backend.hpp"

#include "memloop/error.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace memloop {

using nlohmann::json;

namespace detail {

/// Splits an endpoint URL into "scheme://host[:port]" and the request path,
/// posts JSON with retries, and caps the number of requests in flight.
class HttpTransport {
 public:
  HttpTransport(const std::string& endpoint, const BackendConfig& config)
      : config_(config), slots_(config.max_in_flight) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint is not an absolute URL: " + endpoint);
    const auto path_start = endpoint.find('/', scheme_end + 3);
    origin_ = endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
  }

  json post(const json& body) {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};

    httplib::Client client(origin_);
    const auto timeout = std::chrono::duration<double>(config_.request_timeout_seconds);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env_var.c_str()); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string payload = body.dump();

    std::string last_failure;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        const auto delay = std::chrono::milliseconds(static_cast<long long>(config_.retry_base_delay_ms) << (attempt - 1));
        std::this_thread::sleep_for(delay);
      }
      auto result = client.Post(path_, headers, payload, "application/json");
      if (!result) {
        last_failure = "transport error: " + httplib::to_string(result.error());
        continue;
      }
      const int status = result->status;
      if (status == 429 || status >= 500) {
        last_failure = "HTTP " + std::to_string(status);
        continue;
      }
      if (status < 200 || status >= 300) {
        throw BackendProtocolError(origin_ + path_ + " answered HTTP " + std::to_string(status) + ": " + result->body);
      }
      try {
        return json::parse(result->body);
      } catch (const json::parse_error& e) {
        throw BackendProtocolError(origin_ + path_ + " returned invalid JSON: " + e.what());
      }
    }
    throw BackendUnavailableError(origin_ + path_ + " unavailable after " + std::to_string(config_.max_retries + 1) +
                                  " attempts (" + last_failure + ")");
  }

 private:
  BackendConfig config_;
  std::counting_semaphore<> slots_;
  std::string origin_;
  std::string path_;
};

}  // namespace detail

namespace {

BackendConfig validated(BackendConfig config) {
  config.validate();
  return config;
}

}  // namespace

HttpChatBackend::HttpChatBackend(BackendConfig config)
    : config_(validated(std::move(config))),
      transport_(std::make_unique<detail::HttpTransport>(config_.chat_endpoint, config_)) {}

HttpChatBackend::~HttpChatBackend() = default;

std::string HttpChatBackend::complete(const ChatRequest& request) {
  json body = {
      {"model", config_.chat_model_name},
      {"messages",
       json::array({{{"role", "system"}, {"content", request.role_prompt}},
                    {{"role", "user"}, {"content", request.user_payload}}})},
      {"temperature", request.temperature},
  };
  const json reply = transport_->post(body);
  try {
    if (auto usage = reply.find("usage"); usage != reply.end() && usage->contains("total_tokens")) {
      reported_tokens_.fetch_add(usage->at("total_tokens").get<std::int64_t>());
    }
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendProtocolError(std::string("chat response missing choices[0].message.content: ") + e.what());
  }
}

HttpEmbeddingBackend::HttpEmbeddingBackend(BackendConfig config)
    : config_(validated(std::move(config))),
      transport_(std::make_unique<detail::HttpTransport>(config_.embed_endpoint, config_)) {}

HttpEmbeddingBackend::~HttpEmbeddingBackend() = default;

std::vector<EmbeddingVector> HttpEmbeddingBackend::embed(const std::vector<std::string>& texts) {
  const json reply = transport_->post({{"model", config_.embed_model_name}, {"input", texts}});
  try {
    const json& data = reply.at("data");
    std::vector<EmbeddingVector> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t slot = data[i].contains("index") ? data[i].at("index").get<std::size_t>() : i;
      if (slot >= out.size()) throw BackendProtocolError("embedding response index out of range");
      out[slot] = EmbeddingVector(data[i].at("embedding").get<std::vector<double>>());
    }
    return out;
  } catch (const json::exception& e) {
    throw BackendProtocolError(std::string("malformed embedding response: ") + e.what());
  }
}

}  // namespace memloop
