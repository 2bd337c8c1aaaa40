#include "adaptmt/http_client.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "httplib.h"

#include "adaptmt/error.hpp"

namespace adaptmt::http {

std::string Url::origin() const { return scheme + "://" + host + ":" + std::to_string(port); }

Url parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?)://([^/:]+)(?::(\d+))?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error("config", "invalid URL '" + url + "'");
  Url u;
  u.scheme = m[1];
  u.host = m[2];
  u.port = m[3].matched ? std::stoi(m[3]) : (u.scheme == "https" ? 443 : 80);
  u.path = m[4].matched ? std::string(m[4]) : "/";
  return u;
}

std::string Response::header(const std::string& lowercase_name) const {
  const auto it = headers.find(lowercase_name);
  return it == headers.end() ? std::string() : it->second;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

Response convert(const httplib::Result& res) {
  Response out;
  if (!res) {
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  for (const auto& [k, v] : res->headers) out.headers[lower(k)] = v;
  return out;
}

httplib::Headers to_headers(const Headers& headers) {
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  return h;
}

template <typename Fn>
Response with_client(const std::string& url, std::chrono::milliseconds timeout, Fn&& fn) {
  const auto u = parse_url(url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (u.scheme == "https") {
    Response r;
    r.error = "https is not supported by this build";
    return r;
  }
#endif
  httplib::Client client(u.origin());
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return convert(fn(client, u.path));
}

}  // namespace

Response post_json(const std::string& url, const std::string& body, const Headers& headers,
                   std::chrono::milliseconds timeout) {
  return with_client(url, timeout, [&](httplib::Client& c, const std::string& path) {
    return c.Post(path, to_headers(headers), body, "application/json");
  });
}

Response get(const std::string& url, const Headers& headers, std::chrono::milliseconds timeout) {
  return with_client(url, timeout, [&](httplib::Client& c, const std::string& path) {
    return c.Get(path, to_headers(headers));
  });
}

}  // namespace adaptmt::http
