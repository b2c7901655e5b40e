// Copyright 2026 The semiasr Authors
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
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "semiasr/trainer.hpp"

namespace semiasr {

// Flat "[section]" / "key = value" text. Keys are addressed as
// "section.key"; '#' and ';' start comments; values may be double-quoted
// to keep surrounding spaces.
class Config {
 public:
  struct Key {
    std::string name;
    std::string default_value;
    std::string help;
  };
  static const std::vector<Key>& schema();

  // All keys at their defaults.
  Config();
  static Config parse(std::string_view text, const std::string& origin = "<string>");
  static Config load(const std::filesystem::path& path);

  // Unknown keys are rejected.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  // Every key, grouped by section, in schema order.
  std::string dump() const;
  void save(const std::filesystem::path& path) const;

  // Typed view; throws ConfigError naming the offending key.
  ExperimentConfig experiment() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace semiasr
