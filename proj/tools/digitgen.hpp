#ifndef CSPROXY_TOOLS_DIGITGEN_HPP
#define CSPROXY_TOOLS_DIGITGEN_HPP

#include <cstdint>

#include "csproxy/dataset.hpp"

namespace csproxy::digitgen {

/// Deterministic MNIST-style corpus: 28x28 grayscale digits 0-9 rendered
/// from per-class stroke skeletons with seeded affine jitter, stroke-width
/// and brightness variation. Pixels are byte-quantized, so the set
/// round-trips exactly through the IDX container.
ImageSet generate(std::size_t count, std::uint64_t seed);

}  // namespace csproxy::digitgen

#endif
