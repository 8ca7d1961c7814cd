#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcl/encoder.hpp"

namespace tcl {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named-tensor manifest: encoder config, node vocabulary and every parameter
/// as (name, shape, row-major values).
struct Checkpoint {
  EncoderConfig config;
  /// External node names in NodeId order (excluding the NULL sentinel).
  std::vector<std::string> vocabulary;
  bool bipartite = false;
  std::map<std::string, ad::Matrix> tensors;
};

Checkpoint make_checkpoint(const ModelParams& params, const Vocabulary& vocab);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies tensors into `params`. Throws CheckpointError naming the tensor when
/// one is missing or its shape differs.
void apply_checkpoint(const Checkpoint& checkpoint, ModelParams& params);

/// Builds a model shaped by the checkpoint's config and vocabulary and loads it.
ModelParams model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace tcl
