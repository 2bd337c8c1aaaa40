#pragma once

#include <chrono>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace adaptmt::http {

struct Url {
  std::string scheme;  // "http" or "https"
  std::string host;
  int port = 0;
  std::string path;  // always starts with '/'

  std::string origin() const;
};

/// Throws Error("config") for anything but http(s)://host[:port][/path].
Url parse_url(const std::string& url);

struct Response {
  int status = 0;  // 0: transport failure, see `error`
  std::string body;
  std::map<std::string, std::string> headers;  // lowercase names
  std::string error;

  std::string header(const std::string& lowercase_name) const;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

Response post_json(const std::string& url, const std::string& body, const Headers& headers,
                   std::chrono::milliseconds timeout);
Response get(const std::string& url, const Headers& headers, std::chrono::milliseconds timeout);

}  // namespace adaptmt::http
