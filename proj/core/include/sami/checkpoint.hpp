#pragma once

#include <map>
#include <string>
#include <vector>

#include "sami/nn.hpp"

namespace sami {

inline constexpr const char* kCheckpointVersion = "sami-checkpoint-1";

// Version-tagged JSON record of named tensors. Values round-trip bitwise
// (shortest-round-trip number formatting).
void save_checkpoint(const std::string& path, const std::vector<NamedParam>& params,
                     const std::map<std::string, std::string>& meta);

// Loads into the given parameter views; every name must be present with a
// matching shape, and the file may not contain extras.
void load_checkpoint(const std::string& path, const std::vector<NamedParam>& params,
                     std::map<std::string, std::string>* meta_out = nullptr);

std::map<std::string, std::string> checkpoint_meta(const std::string& path);

}  // namespace sami
