#pragma once

#include <cstdint>
#include <string>

#include "condex/liver.hpp"

namespace condex {

// JSON round trip of a fitted pipeline.  The file is self-describing: it
// embeds the library version, the configuration used and the fitting seed,
// and loading rebuilds every derived quantity (residual summaries, Laplace
// thresholds) from the stored primitives.  Malformed input throws
// SchemaError.

std::string pipeline_to_json(const PipelineFit& fit, std::uint64_t seed);
PipelineFit pipeline_from_json(const std::string& text);

void save_pipeline(const PipelineFit& fit, const std::string& path,
                   std::uint64_t seed);
PipelineFit load_pipeline(const std::string& path);

}  // namespace condex
