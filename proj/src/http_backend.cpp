#include <cstdlib>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "slick/gateway.hpp"

namespace slick {

using nlohmann::json;

namespace {

// Splits "scheme://host[:port][/prefix]" into the part httplib::Client takes
// and the path prefix prepended to /completions.
void split_base_url(const std::string& base_url, std::string& scheme_host_port,
                    std::string& path_prefix) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(errkind::ConfigError, "base_url must include a scheme: " + base_url);
  const auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port = base_url;
    path_prefix.clear();
  } else {
    scheme_host_port = base_url.substr(0, path_start);
    path_prefix = base_url.substr(path_start);
    while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();
  }
}

}  // namespace

HttpBackend::HttpBackend(EndpointProfile profile) : profile_(std::move(profile)) {
  profile_.validate();
  split_base_url(profile_.base_url, scheme_host_port_, path_prefix_);
}

std::string HttpBackend::id() const { return "http:" + profile_.base_url; }

std::vector<std::string> HttpBackend::generate(const CompletionRequest& request) {
  json body{{"model", profile_.model_id},
            {"prompt", request.prompt},
            {"temperature", request.temperature},
            {"n", request.n_samples},
            {"max_tokens", request.max_tokens}};
  if (request.top_k) body["top_k"] = *request.top_k;
  if (request.seed) body["seed"] = *request.seed;

  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration<double>(profile_.request_timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));

  httplib::Headers headers;
  if (!profile_.auth_token_ref.empty()) {
    const char* token = std::getenv(profile_.auth_token_ref.c_str());
    if (token == nullptr || *token == '\0')
      throw Error(errkind::AuthError, "env var " + profile_.auth_token_ref + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  auto res = client.Post(path_prefix_ + "/completions", headers, body.dump(), "application/json");
  if (!res)
    throw Error(errkind::TransportError,
                "request failed: " + httplib::to_string(res.error()));
  if (res->status == 401 || res->status == 403)
    throw Error(errkind::AuthError, "endpoint rejected token (HTTP " + std::to_string(res->status) + ")");
  if (res->status == 429 || res->status >= 500)
    throw Error(errkind::TransportError, "HTTP " + std::to_string(res->status));
  if (res->status != 200)
    throw Error(errkind::MalformedResponse, "unexpected HTTP " + std::to_string(res->status));

  json parsed;
  try {
    parsed = json::parse(res->body);
  } catch (const json::exception& e) {
    throw Error(errkind::MalformedResponse, std::string("response is not JSON: ") + e.what());
  }
  if (!parsed.contains("choices") || !parsed["choices"].is_array())
    throw Error(errkind::MalformedResponse, "response missing choices array");
  std::vector<std::string> texts;
  for (const auto& choice : parsed["choices"]) {
    if (!choice.contains("text"))
      throw Error(errkind::MalformedResponse, "choice missing text");
    texts.push_back(choice["text"].get<std::string>());
  }
  if (static_cast<int>(texts.size()) != request.n_samples)
    throw Error(errkind::MalformedResponse,
                "expected " + std::to_string(request.n_samples) + " choices, got " +
                    std::to_string(texts.size()));
  return texts;
}

}  // namespace slick
