#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "sam/error.hpp"
#include "sam/io.hpp"

namespace sam {

inline constexpr const char* kToolkitVersion = "0.1.0";

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline std::string file_digest(const std::filesystem::path& path) {
  return sha256_hex(io::read_file(path));
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct InputDigest {
  std::string path;
  std::string sha256;
};

//! Everything needed to re-execute a CLI command: the resolved options, the
//! digests of every input file, and the seeds in play.
struct RunManifest {
  std::string command;
  nlohmann::json options;
  std::vector<InputDigest> inputs;
  std::vector<std::uint64_t> seeds;
  std::string version = kToolkitVersion;
  std::string started;
  std::string finished;

  void add_input(const std::filesystem::path& path) {
    inputs.push_back({std::filesystem::absolute(path).lexically_normal().string(), file_digest(path)});
  }

  nlohmann::json to_json() const {
    nlohmann::json in = nlohmann::json::array();
    for (const auto& d : inputs) in.push_back({{"path", d.path}, {"sha256", d.sha256}});
    return {{"command", command}, {"options", options}, {"inputs", in},  {"seeds", seeds},
            {"version", version}, {"started", started}, {"finished", finished}};
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
      m.command = j.at("command").get<std::string>();
      m.options = j.at("options");
      for (const auto& d : j.at("inputs")) {
        m.inputs.push_back({d.at("path").get<std::string>(), d.at("sha256").get<std::string>()});
      }
      m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      m.version = j.at("version").get<std::string>();
      m.started = j.value("started", "");
      m.finished = j.value("finished", "");
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("malformed manifest: ") + e.what());
    }
    return m;
  }

  //! Throws unless every recorded input still hashes to its recorded digest.
  void verify_inputs() const {
    for (const auto& d : inputs) {
      const auto actual = file_digest(d.path);
      if (actual != d.sha256) {
        throw ValidationError("input " + d.path + " changed since the manifest was written");
      }
    }
  }
};

inline RunManifest load_manifest(const std::filesystem::path& path) {
  const auto text = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return RunManifest::from_json(j);
}

}  // namespace sam
