#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vrls/nn/tensor.hpp"

namespace vrls::nn {

/// Versioned container: free-form metadata plus named groups of tensors.
///
/// Layout: "VRLSCKPT" | u32 version | u64 header length | header JSON |
/// tensor payload (little-endian IEEE-754 doubles, group by group). The
/// header records every group name and tensor shape. Encoding is
/// deterministic, so save -> load -> save reproduces the same bytes.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::pair<std::string, ParameterSet>> groups;

    const ParameterSet& group(const std::string& name) const;
    bool has_group(const std::string& name) const;

    bool operator==(const Checkpoint&) const = default;
};

std::string serialize(const Checkpoint& ck);
Checkpoint deserialize(std::string_view bytes);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace vrls::nn
