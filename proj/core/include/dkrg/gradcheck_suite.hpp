#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dkrg/nn/gradcheck.hpp"

namespace dkrg {

/// Finite-difference checks of every differentiable op in double precision
/// (tolerance 1e-6), followed by the end-to-end loss of a small network
/// (8x8 input, K = 1, depth 8, two residual units) in single precision
/// (tolerance 1e-3) with respect to every trainable parameter.
std::vector<nn::GradCheckResult> run_gradcheck_suite(std::uint64_t seed);

/// Only the end-to-end single-precision check.
nn::GradCheckResult check_network_gradients(std::uint64_t seed);

/// One line per check: name, entries checked, max relative error,
/// tolerance, PASS/FAIL.
void print_gradcheck_report(std::ostream& out, const std::vector<nn::GradCheckResult>& results);

}  // namespace dkrg
