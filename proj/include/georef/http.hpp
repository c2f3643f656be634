#pragma once

#include <map>
#include <string>

namespace georef {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::multimap<std::string, std::string>;

/// Throws std::runtime_error when no response arrives; HTTP error statuses are returned.
HttpResponse http_get(const std::string& url, const HttpHeaders& headers = {}, int timeout_s = 30);
HttpResponse http_post(const std::string& url, const std::string& body, const std::string& content_type,
                       const HttpHeaders& headers = {}, int timeout_s = 60);

/// Requests attempted by this process so far.
long http_request_count();

/// Splits "https://host:port/path?q" into ("https://host:port", "/path?q").
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace georef
