// Copyright 2026 The sadrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Run manifests: what a command was asked to do, with which inputs, and
// where it put its outputs. Re-running a manifest reproduces the outputs.

#ifndef SADREC_MANIFEST_HPP_
#define SADREC_MANIFEST_HPP_

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sadrec/error.hpp"
#include "sadrec/random.hpp"

namespace sadrec {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::uint64_t file_digest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string() + " to hash");
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return fnv1a64(buffer.str());
}

inline std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

struct InputDigest {
  std::string path;
  std::string fnv1a64;
};

struct RunManifest {
  std::string command;
  std::vector<std::string> args;  // full argument list, replayable
  nlohmann::ordered_json resolved = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  std::vector<InputDigest> inputs;
  std::vector<std::string> artifacts;  // relative to the run directory
  std::string run_dir;
  std::string tool_version = kToolVersion;

  void add_input(const std::filesystem::path& path) {
    inputs.push_back({path.string(), hex64(file_digest(path))});
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "sadrec";
    j["tool_version"] = tool_version;
    j["command"] = command;
    j["seed"] = seed;
    j["args"] = args;
    j["resolved"] = resolved;
    j["inputs"] = nlohmann::ordered_json::array();
    for (const auto& in : inputs) {
      j["inputs"].push_back({{"path", in.path}, {"fnv1a64", in.fnv1a64}});
    }
    j["artifacts"] = artifacts;
    j["run_dir"] = run_dir;
    return j;
  }

  static RunManifest from_json(const nlohmann::ordered_json& j) {
    RunManifest m;
    try {
      m.command = j.at("command").get<std::string>();
      m.args = j.at("args").get<std::vector<std::string>>();
      m.resolved = j.at("resolved");
      m.seed = j.at("seed").get<std::uint64_t>();
      for (const auto& in : j.at("inputs")) {
        m.inputs.push_back({in.at("path").get<std::string>(),
                            in.at("fnv1a64").get<std::string>()});
      }
      m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
      m.run_dir = j.at("run_dir").get<std::string>();
      m.tool_version = j.at("tool_version").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed manifest: ") + e.what());
    }
    return m;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write manifest " + path.string());
    os << to_json().dump(2) << '\n';
  }

  static RunManifest load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open manifest " + path.string());
    try {
      return from_json(nlohmann::ordered_json::parse(is));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }

  // Throws DataError naming the first input whose content changed.
  void verify_inputs() const {
    for (const auto& in : inputs) {
      const std::string now = hex64(file_digest(in.path));
      if (now != in.fnv1a64) {
        throw DataError("input " + in.path + " changed since the manifest was written (" +
                        in.fnv1a64 + " -> " + now + ")");
      }
    }
  }
};

}  // namespace sadrec

#endif  // SADREC_MANIFEST_HPP_
