#include "georef/http.hpp"

#include <atomic>
#include <stdexcept>

#include <httplib.h>

namespace georef {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw std::runtime_error("url without scheme: " + url);
  const auto path = url.find('/', scheme + 3);
  if (path == std::string::npos) return {url, "/"};
  return {url.substr(0, path), url.substr(path)};
}

namespace {

std::atomic<long> g_requests{0};

httplib::Client client_for(const std::string& base, int timeout_s) {
  httplib::Client cli(base);
  cli.set_connection_timeout(timeout_s, 0);
  cli.set_read_timeout(timeout_s, 0);
  cli.set_write_timeout(timeout_s, 0);
  cli.set_follow_location(true);
  return cli;
}

HttpResponse unwrap(const httplib::Result& res, const std::string& url) {
  if (!res) throw std::runtime_error("request to " + url + " failed: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

httplib::Headers to_headers(const HttpHeaders& h) { return {h.begin(), h.end()}; }

}  // namespace

long http_request_count() { return g_requests.load(); }

HttpResponse http_get(const std::string& url, const HttpHeaders& headers, int timeout_s) {
  ++g_requests;
  const auto [base, target] = split_url(url);
  auto cli = client_for(base, timeout_s);
  return unwrap(cli.Get(target, to_headers(headers)), url);
}

HttpResponse http_post(const std::string& url, const std::string& body, const std::string& content_type,
                       const HttpHeaders& headers, int timeout_s) {
  ++g_requests;
  const auto [base, target] = split_url(url);
  auto cli = client_for(base, timeout_s);
  return unwrap(cli.Post(target, to_headers(headers), body, content_type), url);
}

}  // namespace georef
