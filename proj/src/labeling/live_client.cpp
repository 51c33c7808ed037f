// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "cure/common/errors.hpp"
#include "cure/labeling/client.hpp"

namespace cure::labeling {

LiveClient::LiveClient(LiveClientConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw ConfigError("labeling.endpoint is required for the live client");
  if (cfg_.model.empty()) throw ConfigError("labeling.model is required for the live client");
  const char* token = cfg_.auth_env.empty() ? nullptr : std::getenv(cfg_.auth_env.c_str());
  if (token == nullptr || *token == '\0') {
    throw ConfigError("annotator token variable " + cfg_.auth_env + " is not set");
  }
  token_ = token;

  const auto scheme_end = cfg_.endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("labeling.endpoint must start with http:// or https://");
  }
  const std::string scheme = cfg_.endpoint.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("labeling.endpoint scheme '" + scheme + "' is not supported");
  }
#ifndef CURE_ENABLE_TLS
  if (scheme == "https") {
    throw ConfigError("https endpoints need a build configured with -DCURE_ENABLE_TLS=ON");
  }
#endif
  const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
  scheme_host_ = cfg_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
}

std::string LiveClient::complete(const std::string& prompt) {
  httplib::Client cli(scheme_host_);
  const auto secs = static_cast<time_t>(cfg_.timeout.count());
  cli.set_connection_timeout(secs, 0);
  cli.set_read_timeout(secs, 0);
  cli.set_write_timeout(secs, 0);
  cli.set_bearer_token_auth(token_);

  nlohmann::json body = {{"model", cfg_.model},
                         {"temperature", 0},
                         {"messages", {{{"role", "user"}, {"content", prompt}}}}};
  auto res = cli.Post(path_, body.dump(), "application/json");
  if (!res) throw ClientError("annotator request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw ClientError("annotator returned HTTP " + std::to_string(res->status));
  }
  try {
    auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const std::exception& e) {
    throw ClientError(std::string("malformed annotator response: ") + e.what());
  }
}

}  // namespace cure::labeling
