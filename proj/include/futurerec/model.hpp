#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "futurerec/backbone.hpp"
#include "futurerec/future_contrast.hpp"
#include "futurerec/future_supervision.hpp"

namespace futurerec {

/// Everything the trainer optimizes. The auxiliary parameter sets exist only
/// when the corresponding loss is enabled; inference consumes the backbone
/// alone, so stripping them never changes an evaluation result.
struct ModelParams {
    BackboneParams backbone;
    std::optional<FutureSupParams> future_sup;
    std::optional<FutureClParams> future_cl;

    /// Stable (name, tensor) enumeration used by the optimizer and the
    /// checkpoint writer. Order is deterministic.
    std::vector<std::pair<std::string, Tensor>> named_tensors() const;

    ModelParams clone() const;
    void zero_grad() const;
};

ModelParams init_model(const BackboneConfig& config, bool with_future_sup, int horizon,
                       bool with_future_cl, uint64_t seed);

/// Checkpoint format (version 1, little-endian):
///   magic "FRCK" | u32 version | u32 meta_len | meta bytes (key=value lines)
///   | u32 tensor_count | per tensor: u32 name_len, name, u32 ndim,
///     i64 dims[ndim], f64 data[numel]
/// Meta records the backbone dimensions needed to rebuild the model.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

/// Rewrites a checkpoint keeping only backbone tensors.
void strip_auxiliary(const std::string& in_path, const std::string& out_path);

}  // namespace futurerec
