// Copyright 2026 The leafkit Authors. All Rights Reserved.
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

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace leaf::cli {

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Everything needed to rerun a command: the command path, every semantic flag
// value, the seeds, and digests of all input files. Output paths and the
// worker count are deliberately absent so reports compare byte-for-byte.
class RunManifest {
 public:
  explicit RunManifest(std::string command) : command_(std::move(command)) {}

  void set_config(nlohmann::ordered_json config) { config_ = std::move(config); }
  void add_seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void add_input(const std::string& role, const std::filesystem::path& path);

  nlohmann::ordered_json to_json() const;

 private:
  std::string command_;
  nlohmann::ordered_json config_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json seeds_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::array();
};

std::string_view tool_version();

// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
// Failures print one JSON line {"error", "message"} to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace leaf::cli
