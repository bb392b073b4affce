#ifndef QUAYDECK_RUN_HPP_
#define QUAYDECK_RUN_HPP_

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "quaydeck/json_util.hpp"

namespace quaydeck {

inline constexpr const char* kManifestFormat = "quaydeck-manifest/1";

inline std::string hex(const unsigned char* data, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string out(2 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    out[2 * i] = digits[data[i] >> 4];
    out[2 * i + 1] = digits[data[i] & 15];
  }
  return out;
}

/// SHA-1 of "blob <size>\0<content>", as `git hash-object` computes it.
inline std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw InternalError("EVP_MD_CTX_new failed");
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 && EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw InternalError("SHA-1 digest failed");
  return hex(md, len);
}

inline std::string file_sha1(const std::string& path) { return git_blob_sha1(quaydeck::detail::read_file(path)); }

/// UTC timestamp YYYYMMDD-HHMMSS.
inline std::string utc_stamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

/// A run directory `<root>/<timestamp>-<name>/` and its manifest. Outputs are
/// hashed when the manifest is written; wall-clock timings go to a separate
/// file so the manifest and artifacts stay reproducible.
class RunDir {
 public:
  RunDir(const std::string& root, const std::string& name, std::string command, OrderedJson config)
      : command_(std::move(command)), config_(std::move(config)) {
    namespace fs = std::filesystem;
    if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("run name must be non-empty without '/'");
    const std::string base = (fs::path(root) / (utc_stamp() + "-" + name)).string();
    std::string dir = base;
    for (int k = 2; fs::exists(dir); ++k) dir = base + "-" + std::to_string(k);
    fs::create_directories(dir);
    dir_ = fs::absolute(dir).string();
    start_ = std::chrono::steady_clock::now();
  }

  const std::string& dir() const { return dir_; }
  std::string path(const std::string& file) const { return (std::filesystem::path(dir_) / file).string(); }

  /// Records an input file by absolute path and content hash.
  void input(const std::string& role, const std::string& file) {
    inputs_.push_back({{"role", role}, {"path", std::filesystem::absolute(file).string()}, {"sha1", file_sha1(file)}});
  }

  void write(const std::string& file, const std::string& contents) {
    quaydeck::detail::write_file(path(file), contents);
    outputs_.push_back(file);
  }

  void timing(const std::string& key, double seconds) { timings_[key] = seconds; }

  OrderedJson manifest() const {
    OrderedJson outs = OrderedJson::array();
    for (const auto& f : outputs_) outs.push_back({{"file", f}, {"sha1", file_sha1(path(f))}});
    return {{"format", kManifestFormat},
            {"command", command_},
            {"config", config_},
            {"config_sha1", git_blob_sha1(config_.dump())},
            {"inputs", inputs_},
            {"outputs", outs}};
  }

  void finish() {
    const auto m = manifest();
    quaydeck::detail::write_file(path("manifest.json"), m.dump(2) + "\n");
    OrderedJson t = timings_;
    t["total_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    quaydeck::detail::write_file(path("timing.json"), t.dump(2) + "\n");
  }

 private:
  std::string command_;
  OrderedJson config_;
  std::string dir_;
  OrderedJson inputs_ = OrderedJson::array();
  std::vector<std::string> outputs_;
  OrderedJson timings_ = OrderedJson::object();
  std::chrono::steady_clock::time_point start_;
};

struct OutputMismatch {
  std::string file;
  std::string expected, actual;
};

/// Compares the output hashes of two manifests.
inline std::vector<OutputMismatch> compare_outputs(const Json& original, const Json& rerun) {
  std::vector<OutputMismatch> out;
  std::map<std::string, std::string> got;
  for (const auto& o : rerun.at("outputs")) got[o.at("file")] = o.at("sha1");
  for (const auto& o : original.at("outputs")) {
    const std::string f = o.at("file");
    auto it = got.find(f);
    const std::string actual = it == got.end() ? "missing" : it->second;
    if (actual != o.at("sha1").get<std::string>()) out.push_back({f, o.at("sha1"), actual});
  }
  return out;
}

}  // namespace quaydeck

#endif  // QUAYDECK_RUN_HPP_
