#pragma once

#include <memory>

#include "dkrg/deep_kriging.hpp"
#include "dkrg/local_kriging.hpp"
#include "dkrg/metrics.hpp"

namespace dkrg {

/// Returns the bicubic-upsampled input unchanged.
SrMethod bicubic_method();

/// Returns the reference image (sanity check of the evaluation harness).
SrMethod identity_oracle_method();

/// Local ordinary kriging from the LR lattice.
SrMethod local_kriging_method(const LocalKrigingOptions& options = {});

/// Deep kriging on the bicubic-upsampled input.
SrMethod deep_kriging_method(std::shared_ptr<const NetworkParams<float>> params);

}  // namespace dkrg
