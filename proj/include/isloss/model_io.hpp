#pragma once

#include <iosfwd>

#include "isloss/train_harness.hpp"

namespace isloss {

/// Text model file:
///   isloss-model v1
///   <d_in> <d> <K>
///   d_in rows of the projection, then d rows of the class weights,
///   whitespace separated, %.17g (exact round trip).
void write_model(std::ostream& os, const ModelParams& model);
ModelParams read_model(std::istream& is);

}  // namespace isloss
