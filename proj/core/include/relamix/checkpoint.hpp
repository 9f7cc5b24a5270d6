#pragma once

#include <filesystem>

#include "relamix/tran_rd.hpp"

namespace relamix {

/// Checkpoint directory: checkpoint.json (model config + tensor table) and one
/// RMFX float32 payload per tensor under tensors/.
void save_checkpoint(const TranRdParameters& params, const std::filesystem::path& dir);
TranRdParameters load_checkpoint(const std::filesystem::path& dir);

}  // namespace relamix
