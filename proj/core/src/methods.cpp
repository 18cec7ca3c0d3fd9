#include "dkrg/methods.hpp"

#include <stdexcept>

namespace dkrg {

SrMethod bicubic_method() {
  return [](const SrInput& in) { return in.lr_upsampled; };
}

SrMethod identity_oracle_method() {
  return [](const SrInput& in) { return in.hr; };
}

SrMethod local_kriging_method(const LocalKrigingOptions& options) {
  return [options](const SrInput& in) { return local_krige_sr(in.lr, in.scale, options); };
}

SrMethod deep_kriging_method(std::shared_ptr<const NetworkParams<float>> params) {
  if (!params) throw std::invalid_argument("deep_kriging_method: no parameters");
  return [params](const SrInput& in) { return super_resolve(in.lr_upsampled, *params).sr; };
}

}  // namespace dkrg
