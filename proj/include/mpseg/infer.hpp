#pragma once

// Graph-free inference forward over the learnable queries only.
//
// This path has no notion of MP queries, override tables or self-attention
// blocking. It drives the kernels directly with the same operation order as
// the differentiable decoder, so its outputs are bit-identical to
// full_forward on a matching-only spec.

#include "mpseg/decoder.hpp"

namespace mpseg {

LayerOutputs inference_forward(const FeaturePyramid& pyramid, const DecoderParams& params);

}  // namespace mpseg
