// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <fmt/format.h>

#include "pipeforge/agent.hpp"
#include "pipeforge/error.hpp"

namespace pipeforge {

struct ChatCompletionsAgent::Impl {
  std::unique_ptr<httplib::Client> client;
  std::string path;
};

ChatCompletionsAgent::ChatCompletionsAgent(EndpointSettings settings)
    : settings_(std::move(settings)), impl_(std::make_unique<Impl>()) {
  const auto scheme_end = settings_.url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError(fmt::format("endpoint URL '{}' has no scheme", settings_.url));
  }
  const auto path_start = settings_.url.find('/', scheme_end + 3);
  const auto origin = settings_.url.substr(0, path_start);
  impl_->path = path_start == std::string::npos ? "/v1/chat/completions" : settings_.url.substr(path_start);
  impl_->client = std::make_unique<httplib::Client>(origin);
  if (!impl_->client->is_valid()) {
    throw ConfigError(fmt::format("endpoint URL '{}' is not usable (https needs TLS support)",
                                  settings_.url));
  }
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(settings_.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(settings_.timeout - seconds);
  impl_->client->set_connection_timeout(seconds.count(), micros.count());
  impl_->client->set_read_timeout(seconds.count(), micros.count());
  impl_->client->set_write_timeout(seconds.count(), micros.count());
}

ChatCompletionsAgent::~ChatCompletionsAgent() = default;

nlohmann::json ChatCompletionsAgent::request_body(const AgentRequest& request) {
  return {
      {"model", request.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
  };
}

std::string ChatCompletionsAgent::response_text(std::string_view body) {
  auto parsed = nlohmann::json::parse(body, nullptr, false);
  if (parsed.is_discarded()) {
    throw TransportError("endpoint returned a non-JSON body");
  }
  const auto pointer = nlohmann::json::json_pointer("/choices/0/message/content");
  if (!parsed.contains(pointer) || !parsed.at(pointer).is_string()) {
    throw TransportError("endpoint response has no choices[0].message.content");
  }
  return parsed.at(pointer).get<std::string>();
}

std::string ChatCompletionsAgent::complete(const AgentRequest& request, Phase /*phase*/,
                                           std::size_t /*iteration*/) {
  httplib::Headers headers;
  if (!settings_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + settings_.api_key);
  }
  auto result = impl_->client->Post(impl_->path, headers, request_body(request).dump(),
                                    "application/json");
  if (!result) {
    throw TransportError(fmt::format("request to {} failed: {}", settings_.url,
                                     httplib::to_string(result.error())));
  }
  if (result->status < 200 || result->status >= 300) {
    throw TransportError(fmt::format("endpoint answered HTTP {}: {}", result->status,
                                     result->body.substr(0, 200)));
  }
  return response_text(result->body);
}

}  // namespace pipeforge
