#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "advf/tensor.hpp"

namespace advf {

using Json = nlohmann::ordered_json;

// Binary container shared by checkpoints and feature-tensor dumps:
//   magic "ADVF" | u32 format version | u64 header length | JSON header |
//   raw little-endian float32 payload tensors (shapes listed in the header).
inline constexpr uint32_t kContainerVersion = 1;

void write_container(const std::string& path, const Json& header, const std::vector<Tensor>& payload);

struct Container {
    Json header;
    std::vector<Tensor> payload;
};

Container read_container(const std::string& path);

// Small file helpers.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);

}  // namespace advf
