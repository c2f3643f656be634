#include "georef/util.hpp"

#include <cctype>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <openssl/evp.h>
#include <openssl/sha.h>

namespace georef {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

std::string base64_encode(std::span<const unsigned char> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ostringstream tid;
  tid << std::this_thread::get_id();
  const std::filesystem::path tmp = path.string() + ".tmp" + tid.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string_view trim(std::string_view s) {
  const auto space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return s;
}

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

namespace {

// Decodes one UTF-8 sequence starting at s[i]; malformed bytes decode as themselves.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b = static_cast<unsigned char>(s[i]);
  int len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : (b >> 3) == 0x1E ? 4 : 1;
  if (i + len > s.size()) len = 1;
  char32_t cp = len == 1 ? b : len == 2 ? (b & 0x1F) : len == 3 ? (b & 0x0F) : (b & 0x07);
  for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
  i += len;
  return cp;
}

char fold_latin(char32_t cp) {
  static const std::unordered_map<char32_t, char> table = [] {
    std::unordered_map<char32_t, char> t;
    const auto add = [&](std::u32string_view cps, char base) {
      for (char32_t c : cps) t[c] = base;
    };
    add(U"ÀÁÂÃÄÅàáâãäåĀāĂăĄą", 'a');
    add(U"ÇçĆćĈĉĊċČč", 'c');
    add(U"ĎďĐđ", 'd');
    add(U"ÈÉÊËèéêëĒēĔĕĖėĘęĚě", 'e');
    add(U"ĜĝĞğĠġĢģ", 'g');
    add(U"ĤĥĦħ", 'h');
    add(U"ÌÍÎÏìíîïĨĩĪīĬĭĮįİı", 'i');
    add(U"Ĵĵ", 'j');
    add(U"Ķķ", 'k');
    add(U"ĹĺĻļĽľĿŀŁł", 'l');
    add(U"ÑñŃńŅņŇň", 'n');
    add(U"ÒÓÔÕÖØòóôõöøŌōŎŏŐő", 'o');
    add(U"ŔŕŖŗŘř", 'r');
    add(U"ŚśŜŝŞşŠš", 's');
    add(U"ŢţŤťŦŧ", 't');
    add(U"ÙÚÛÜùúûüŨũŪūŬŭŮůŰűŲų", 'u');
    add(U"Ŵŵ", 'w');
    add(U"ÝýÿŶŷŸ", 'y');
    add(U"ŹźŻżŽž", 'z');
    return t;
  }();
  const auto it = table.find(cp);
  return it == table.end() ? '\0' : it->second;
}

}  // namespace

std::string fold_name(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t start = i;
    const char32_t cp = next_code_point(s, i);
    if (cp < 0x80) {
      out.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
    } else if (char base = fold_latin(cp)) {
      out.push_back(base);
    } else {
      out.append(s.substr(start, i - start));
    }
  }
  return out;
}

std::string ascii_label(std::string_view s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char32_t cp = next_code_point(s, i);
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (char base = fold_latin(cp)) {
      const bool upper = (cp >= 0xC0 && cp <= 0xDE) || (cp >= 0x100 && cp <= 0x17F && cp % 2 == 0);
      out.push_back(upper ? static_cast<char>(std::toupper(base)) : base);
    } else {
      out.push_back('?');
    }
  }
  return out;
}

std::string url_encode(std::string_view s) {
  std::string out;
  char buf[4];
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    }
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RateLimiter::acquire() {
  if (per_second_ <= 0.0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(1.0 / per_second_));
  }
  std::this_thread::sleep_until(slot);
}

}  // namespace georef
