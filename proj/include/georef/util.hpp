#pragma once

#include <chrono>
#include <filesystem>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace georef {

std::string sha256_hex(std::string_view data);
std::string base64_encode(std::span<const unsigned char> data);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

std::string_view trim(std::string_view s);
/// Number of Unicode scalar values in a UTF-8 string.
std::size_t utf8_length(std::string_view s);
/// Lower-cases ASCII and strips Latin diacritics (macrons included), e.g. "Māhia" -> "mahia".
std::string fold_name(std::string_view s);

/// ASCII rendering for map labels: "Māhia" -> "Mahia"; other non-Latin characters become '?'.
std::string ascii_label(std::string_view s);

std::string url_encode(std::string_view s);
std::string utc_timestamp();

/// Token-spacing limiter: at most `per_second` acquisitions per second.
/// Non-positive rates disable limiting.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second = 0.0) : per_second_(per_second) {}
  void acquire();

 private:
  double per_second_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_{};
};

}  // namespace georef
