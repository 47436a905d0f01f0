#pragma once

#include <string>

#include <json.hpp>

#include "mmpoint/params.hpp"

namespace mmpoint {

// Single-file checkpoint: magic, JSON header (names, shapes, caller metadata),
// then little-endian float32 blocks for every parameter and its two Adam
// moments, in registry order.
void save_checkpoint(const std::string& path, const ParamStore& store,
                     const nlohmann::json& extra);

// Reads a checkpoint. With an empty store the registry is reconstructed from
// the header; with a populated store every name and shape must match or the
// load is rejected. Returns the caller metadata.
nlohmann::json load_checkpoint(const std::string& path, ParamStore& store);

// Returns only the caller metadata, without touching parameter blocks.
nlohmann::json read_checkpoint_metadata(const std::string& path);

}  // namespace mmpoint
